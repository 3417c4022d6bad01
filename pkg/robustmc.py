#!/usr/bin/env python3
"""
Robust matrix completion experiments.

Usage:
    python robustmc.py simulate --p 30 --q 30 --noise student-t:3 --out results/
    python robustmc.py theory-check --trials 1000 --seed 7
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
