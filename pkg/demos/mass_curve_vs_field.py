"""Curve mass against the wave-equation norm on a quick, coarse setup.

Runs both pipelines through the ``compare`` command on ``configs/quick.json``
(64^2 grid, t <= 1) and prints the mass table.  The full-size run is

    vortexgerm compare --config demos/configs/reference.json --out runs/compare

which takes several minutes on one core.

    python3 demos/mass_curve_vs_field.py [outdir]
"""

import csv
import json
import os
import sys

from vortexgerm.cli import main

here = os.path.dirname(os.path.abspath(__file__))
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "..", "runs", "quick_compare")
code = main(["compare", "--config", os.path.join(here, "configs", "quick.json"), "--out", out])
if code:
    sys.exit(code)

with open(os.path.join(out, "compare.csv")) as fh:
    for row in csv.DictReader(fh):
        print(f"t={float(row['t']):5.2f}  curve={float(row['mass_semiclassical']):.4f}  "
              f"field={float(row['mass_nlse']):.4f}  rel={float(row['rel_diff']):.3f}")
with open(os.path.join(out, "compare_summary.json")) as fh:
    print(json.load(fh))
