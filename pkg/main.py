import sys

from gswlr import main

if __name__ == "__main__":
    sys.exit(main())
