"""Learned image compression workbench: CAE, GAN and SR-assisted codecs."""

__version__ = "0.1.0"
