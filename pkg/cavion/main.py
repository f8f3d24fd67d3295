"""
cavion - Main Entry Point
"""

import sys

from .runio import cli_dispatch


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
