"""Search for polynomial continued fraction identities of fundamental constants."""

__version__ = "0.1.0"
