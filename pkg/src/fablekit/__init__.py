"""Block-encoding circuits for real matrices via FABLE and its sparse variants."""

__version__ = "0.1.0"
