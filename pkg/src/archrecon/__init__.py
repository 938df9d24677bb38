"""Recover the architecture of a code repository from its source."""

__version__ = '0.3.0'
