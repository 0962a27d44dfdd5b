# Stage backends: HTTP clients and oracle implementations
