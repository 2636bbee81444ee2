"""Laser-beam induced current along the line y = 2 of the p-n fixture.

Writes lbic_line.csv next to the script and prints the extreme positions.
Run with a thread count as first argument to parallelise the scan.
"""
import sys
from pathlib import Path

import numpy as np

from ddbounds.output import lbic_table, write_csv
from ddbounds.scenarios import lbic_scan, lbic_scenario, line_positions

threads = int(sys.argv[1]) if len(sys.argv) > 1 else 1
signal = lbic_scan(line_positions(2.0), lbic_scenario(), threads=threads)
cols, rows = lbic_table(signal)
write_csv(Path(__file__).with_name("lbic_line.csv"), cols, rows)

I = signal.values()
x = np.array([p[0] for p in signal.positions])
print(f"{len(x)} positions, {len(signal.failures)} failures")
print(f"max I = {I.max():.6g} at x = {x[I.argmax()]:g}")
print(f"min I = {I.min():.6g} at x = {x[I.argmin()]:g}")
