"""``python3 -m navrl`` alias for the ``navrl`` console script."""
from .cli import entry

if __name__ == "__main__":
    entry()
