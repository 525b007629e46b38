"""Sequential parity-oblivious random access codes with unsharp observers."""

__version__ = "0.1.0"
