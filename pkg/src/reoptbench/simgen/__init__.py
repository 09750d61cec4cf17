"""Instance series generation and selection."""
