# POEM object edit toolkit backend
