#!/usr/bin/env python3
"""
Run the bvp-fredholm CLI from a checkout without installing the package.

Same entry point as the installed `bvp-fredholm` console script (app.cli).
"""

import sys
from pathlib import Path

# Allow running from project root: python scripts/bvp_fredholm.py analyze fixtures/example5.json
_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from app.cli import main


if __name__ == "__main__":
    sys.exit(main())
