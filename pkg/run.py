#!/usr/bin/env python3
"""
permin - Main Entry Point
=========================
Run any permin command without installing the package.

Usage:
    python run.py beta --config config/sft_example.json
    python run.py construct --config config/shift_construct.json
    python run.py pipeline --config config/circle_pipeline.json --out results/
    python run.py --help
"""

import sys
from pathlib import Path

# Project paths
PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT / "src"))

from permin.cli import main  # noqa: E402

if __name__ == "__main__":
    main()
