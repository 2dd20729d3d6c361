"""Module entry point: python3 -m hors."""

import sys

from .cli import main

sys.exit(main())
