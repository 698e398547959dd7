"""Allow ``python -m grayhole_plots``."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
