"""AdamW optimizer and training loop."""
