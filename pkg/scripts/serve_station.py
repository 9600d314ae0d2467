#!/usr/bin/env python3
"""Serve the base station for interactive use.

Examples:
    python scripts/serve_station.py                       # tunnel-open, real time
    python scripts/serve_station.py --scenario hallway-circuit --speed 4
    python scripts/serve_station.py --speed 0             # headless; step via POST /api/advance
"""

import sys

from fieldrover.station import main

if __name__ == "__main__":
    sys.exit(main())
