"""Distributionally robust rate-distortion over KL balls."""
