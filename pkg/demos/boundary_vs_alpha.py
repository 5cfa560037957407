"""
Transition line lambda_c(alpha)
===============================

Sweeps lambda at several sampling ratios for the linear activation with a
Gaussian latent prior, locates the jump of the overlap at each alpha, and
writes the whole grid as CSV and a heatmap through the command-line layer.

Run with ``python demos/boundary_vs_alpha.py [output-directory]``.
"""

import io
import sys

from tensorglm import cli

out = sys.argv[1] if len(sys.argv) > 1 else "demo_phase_diagram"

cfg = cli.resolve({}, {
    "command": "phase-diagram",
    "model": {"activation": {"kind": "linear"}, "prior": {"kind": "gaussian"}},
    "grid": {"lambda": {"start": 2.0, "stop": 12.0, "num": 21}, "alpha": [1e-12, 0.5, 1.0, 2.0]},
    "output": {"directory": out},
})
result = cli.run(cfg, stdout=io.StringIO())

print(" alpha      lambda_c   jump")
for row in result["lambda_c"]:
    lc = row["lambda_c"]
    if lc is None:
        print(f"{row['alpha']:6g}   (no transition in grid)")
    else:
        print(f"{row['alpha']:6g}   {lc['lambda_c']:9.4f}   {lc['is_discontinuous']}")
print(f"\nCSV and SVG written to {out}/")
