import os
import sys

# Make the package importable when run from a source checkout
sys.path.insert(0, os.path.dirname(__file__))

from nshr import create_cli
from nshr.cli import parse_and_dispatch

if __name__ == "__main__":
    sys.exit(parse_and_dispatch(sys.argv[1:], create_cli()))
