# noqa: C801
__version__ = "0.1.dev"
