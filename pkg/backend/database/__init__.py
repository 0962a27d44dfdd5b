# Run results database
