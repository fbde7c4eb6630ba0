"""Model- and web-facing roles behind a swappable backend."""
