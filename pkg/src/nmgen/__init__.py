"""Non-monotonic sequence generation with binary trees."""
from .estimators import TreeLM, WordReorderer
from .tree import END

__all__ = ["END", "TreeLM", "WordReorderer"]
__version__ = "0.1.0"
