#!/usr/bin/env python3
"""
Sparse Recovery Bench
Command-line entry point
"""

import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli.bench_cli import cli_entry


def main():
    """Main application entry point"""
    return cli_entry(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
