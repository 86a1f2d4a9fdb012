"""Self-sovereign identity credentials for EV charge authorization."""

__version__ = "0.1.0"
