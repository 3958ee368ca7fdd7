"""Vision Transformer model and parameter accounting."""
