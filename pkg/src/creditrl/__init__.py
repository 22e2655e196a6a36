"""Credit-limit adjustment with tabular reinforcement learning."""
__version__ = "0.1.0"
