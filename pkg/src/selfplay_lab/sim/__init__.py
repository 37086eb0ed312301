"""Self-play session loop and batch runner."""
