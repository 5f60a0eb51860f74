"""RIS-assisted end-to-end autoencoder link simulation."""

__version__ = "0.1.0"
