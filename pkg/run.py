import sys

from dualsmooth.cli.main import run

if __name__ == "__main__":
    sys.exit(run())
