"""Entry point for `python -m spectrum_mdl`"""

import sys

from .cli import main

sys.exit(main())
