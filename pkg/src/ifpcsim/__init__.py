"""Interactive fingerprinting codes and the adaptive statistical-query attack."""
__version__ = "0.1.0"
