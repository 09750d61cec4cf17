"""Sequential solver harness and run records."""
