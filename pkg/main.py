"""
Entry point for the Duality Tool.
This file just imports and runs the command-line application.
"""
import sys

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
