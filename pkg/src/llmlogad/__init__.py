"""Log anomaly detection by prompting a chat model over windows of parsed logs."""

__version__ = "0.1.0"
