"""Allow ``python -m pmlbound``."""
import sys

from .cli import main

sys.exit(main())
