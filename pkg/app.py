"""
Entry script for the vakonomic integrator experiments.

    python app.py flow --config examples.cfg --N 500
    python app.py check
"""

import sys

from src.main import main

if __name__ == "__main__":
    sys.exit(main())
