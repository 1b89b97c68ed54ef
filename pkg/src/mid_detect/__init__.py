"""Maximum-index-based detection for two sensors linked by a k-bit message."""

__version__ = "0.1.0"
