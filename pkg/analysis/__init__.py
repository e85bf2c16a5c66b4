"""
Numerical core of the operator-measure laboratory.

Modules are importable on their own; nothing here configures logging or
reads the environment.
"""

__version__ = "0.3.0"
