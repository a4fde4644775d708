__all__ = ["cli", "__version__"]
__version__ = "0.1.0"
