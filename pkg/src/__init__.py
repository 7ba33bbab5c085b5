"""School Flu - within-school contact networks and influenza outbreak simulation."""

__version__ = "1.0.0"
