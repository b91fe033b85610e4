#!/usr/bin/env python3
"""
Run script for the C-sign gate analysis app
This is a convenience script to run the command line from the root directory
"""

import os
import subprocess
import sys


def main():
    """Forward the arguments to ``python -m loqc_app``"""
    root = os.path.dirname(os.path.abspath(__file__))
    try:
        completed = subprocess.run([sys.executable, "-m", "loqc_app", *sys.argv[1:]], cwd=root)
    except KeyboardInterrupt:
        print("\nRun terminated by user.")
        sys.exit(130)
    sys.exit(completed.returncode)


if __name__ == "__main__":
    main()
