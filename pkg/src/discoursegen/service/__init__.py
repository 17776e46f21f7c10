"""HTTP service wrapping the core pipeline."""
