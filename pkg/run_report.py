"""
Run Gribov Matrix Report
Command-line entry point; see `python run_report.py --help`
"""

import sys
from dotenv import load_dotenv

from src.report.cli_report import main


if __name__ == "__main__":
    # GRIBOV_THREADS may come from .env
    load_dotenv()
    sys.exit(main())
