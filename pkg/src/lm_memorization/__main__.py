"""Entry point of ``python -m lm_memorization``."""

import sys

from lm_memorization.cli import main

sys.exit(main())
