"""Allow `python -m polyaflow` as an alternative to the console script."""

import sys

from polyaflow.cli import main

if __name__ == "__main__":
    sys.exit(main())
