"""Linear-quadratic control of an SDE actuated through a Neumann-controlled heat equation."""
from importlib import resources

from .errors import BlowupError, DomainError, ParseError, ValidationError
from .model import ProblemSpec, load_spec

__version__ = "0.1.0"


def default_config_path():
    """Path of the shipped reference configuration."""
    return resources.files(__name__) / "configs" / "paper_sec7.json"


__all__ = [
    "BlowupError",
    "DomainError",
    "ParseError",
    "ProblemSpec",
    "ValidationError",
    "load_spec",
    "default_config_path",
    "__version__",
]
