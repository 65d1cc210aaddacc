#!/usr/bin/env python
"""
Run with: python run_app.py classify --scenario triangle
"""

import sys

from possnet.cli import main

if __name__ == "__main__":
    sys.exit(main())
