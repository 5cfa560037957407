"""
Small-alpha threshold for the sign activation
=============================================

With ``phi = sign`` and a standard Gaussian latent vector, the spike
``X = sign(W S / sqrt(p))`` looks more and more like i.i.d. fair signs as
alpha shrinks.  This script solves the full variational problem at
``alpha = 1e-12`` with the plain fixed-point map and compares it to the
one-dimensional limiting objective.

Run with ``python demos/sign_threshold.py``.
"""

import numpy as np

from tensorglm import Activation, FixedPointConfig, ModelParams, Prior
from tensorglm.observables import detect_lambda_c, limit_curve, limit_resolver, sweep_lambda

prior, act = Prior.gaussian(), Activation.sign()
lams = np.linspace(5.0, 10.0, 11)

# the limiting problem: minimise over q_x alone
limit = limit_curve(lams, prior, act)

# the full three-variable map, without routing alpha <= 1e-10 to the limit
template = ModelParams(1.0, 1e-12, prior, act)
full = sweep_lambda(template, lams, FixedPointConfig(route_limit=False))

print(" lambda   mmse(limit)   mmse(full)")
for a, b in zip(limit, full):
    print(f"{a.lam:7.2f}   {a.mmse:11.6f}   {b.mmse:10.6f}")

lc = detect_lambda_c(limit, resolve=limit_resolver(prior, act))
print(f"\nlambda_c = {lc.lambda_c:.4f}  (bracket {lc.bracket[0]:.5f} .. {lc.bracket[1]:.5f})")
print(f"first order: {lc.is_discontinuous}, overlap jumps {lc.q_below:.3f} -> {lc.q_above:.3f}")
