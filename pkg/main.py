"""
pmlbound - Main Application Entry Point

Usage:
  python main.py bound --workload histogram:8 --b 1.0 --alpha 0.125
  python main.py calibrate --workload haar:8 --eps 1.0
  python main.py sweep-alpha --config config/presets/fig_alpha_histogram.json --out alpha.csv
  python main.py sweep-epsilon --config config/presets/fig_epsilon_difference.json --out eps.csv
  python main.py certify --workload histogram:2 --n 2 --b 1.0 --alpha 0.3
"""
import sys

from pmlbound.cli import main

if __name__ == "__main__":
    sys.exit(main())
