class CognigraphError(Exception):
    """Base class for engine errors."""
