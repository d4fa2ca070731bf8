"""Entry point for python -m flagcheck."""

import sys

from flagcheck.cli import main

if __name__ == "__main__":
    sys.exit(main())
