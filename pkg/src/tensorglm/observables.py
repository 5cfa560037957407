"""Sweeps over (lambda, alpha), transition detection and small-alpha curves."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import activation as act_mod
from . import prior as prior_mod
from .errors import InvalidArgumentError, TensorGLMError
from .potential import ModelParams, OverlapPoint
from .quadrature import gauss_hermite_rule
from .solver import FixedPointConfig, solve_limit, solve_variational

#: q_x below this (relative to rho_x) counts as zero overlap
ZERO_OVERLAP = 1e-6
#: a warm-started sweep can follow a metastable branch past the transition
HYSTERESIS_NOTE = "warm-started sweep may track a metastable branch through a first-order transition"


class HysteresisWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhasePoint:
    lam: float
    alpha: float
    q_x_star: float
    q_s_star: float
    r_s_star: float
    psi: float
    mmse: float
    near_degenerate: bool
    rho_x: float = 1.0
    rank: int = 3
    monotone_ok: bool = True
    error: str = ""


@dataclass(frozen=True)
class SweepGrid:
    """Axes of a phase diagram; ``template`` supplies everything but lambda and alpha."""

    lambda_values: tuple
    alpha_values: tuple
    template: ModelParams

    def __post_init__(self):
        for name in ("lambda_values", "alpha_values"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.size == 0 or np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
                raise InvalidArgumentError(f"{name} must be nonempty, positive and strictly increasing")
            object.__setattr__(self, name, tuple(float(v) for v in vals))


class LimitPoint(NamedTuple):
    lam: float
    q_x_star: float
    mmse: float
    psi: float
    near_degenerate: bool
    rho_x: float
    rank: int


class LambdaC(NamedTuple):
    lambda_c: float
    is_discontinuous: bool
    bracket: tuple
    q_below: float
    q_above: float


def _check_grid(values) -> list[float]:
    vals = [float(v) for v in values]
    if not vals or any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise InvalidArgumentError("lambda grid must be nonempty, positive and strictly increasing")
    return vals


def solve_point(template: ModelParams, lam: float, cfg: FixedPointConfig | None = None,
                alpha: float | None = None) -> PhasePoint:
    """Solve one ``(lambda, alpha)`` cell; solver errors become an ``error`` entry."""
    params = template.with_(lam=float(lam), alpha=float(template.alpha if alpha is None else alpha))
    r = params.rank
    try:
        res = solve_variational(params, cfg)
    except TensorGLMError as exc:
        nan = math.nan
        return PhasePoint(params.lam, params.alpha, nan, nan, nan, nan, nan, False,
                          params.rho_x, r, True, f"{type(exc).__name__}: {exc}")
    q = res.point.q_x
    mmse = min(max(params.rho_x**r - q**r, 0.0), params.rho_x**r)
    return PhasePoint(params.lam, params.alpha, q, res.point.q_s, res.point.r_s, res.psi_value,
                      mmse, res.near_degenerate, params.rho_x, r)


def _flag_monotone(points: list[PhasePoint]) -> list[PhasePoint]:
    out, prev = [], -math.inf
    for p in points:
        ok = not (p.q_x_star < prev - 1e-6)
        if math.isfinite(p.q_x_star):
            prev = max(prev, p.q_x_star)
        out.append(p if ok else replace(p, monotone_ok=False))
    return out


def _solve_star(args):
    return solve_point(*args)


def sweep_lambda(template: ModelParams, lambda_values: Sequence[float], cfg: FixedPointConfig | None = None,
                 *, warm_start: bool = False, workers: int = 1) -> list[PhasePoint]:
    """Independent solve per lambda (unless ``warm_start``); order follows the grid."""
    lams = _check_grid(lambda_values)
    cfg = cfg or FixedPointConfig()
    if warm_start:
        warnings.warn(HYSTERESIS_NOTE, HysteresisWarning, stacklevel=2)
        points, prev = [], None
        for lam in lams:
            c = cfg
            if prev is not None and math.isfinite(prev.q_x_star):
                c = replace(cfg, inits=(OverlapPoint(0.0, 0.0, 0.0),
                                        OverlapPoint(prev.q_x_star, prev.q_s_star, prev.r_s_star)))
            prev = solve_point(template, lam, c)
            points.append(prev)
    else:
        jobs = [(template, lam, cfg) for lam in lams]
        points = _map(_solve_star, jobs, workers)
    return _flag_monotone(points)


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def sweep_phase_diagram(grid: SweepGrid, cfg: FixedPointConfig | None = None,
                        *, workers: int = 1) -> list[list[PhasePoint]]:
    """Row per alpha, column per lambda; small alpha goes through the limiting solver."""
    cfg = cfg or FixedPointConfig()
    jobs = [(grid.template, lam, cfg, alpha) for alpha in grid.alpha_values for lam in grid.lambda_values]
    flat = _map(_solve_star, jobs, workers)
    n = len(grid.lambda_values)
    return [_flag_monotone(flat[i * n:(i + 1) * n]) for i in range(len(grid.alpha_values))]


def limit_curve(lambda_values: Sequence[float], prior, activation, rule=None, rank: int = 3) -> list[LimitPoint]:
    """Minimiser of the small-alpha objective for each lambda."""
    lams = _check_grid(lambda_values)
    rule = rule or gauss_hermite_rule()
    rho_x = act_mod.rho_x(activation, prior_mod.moments(prior)[1], rule)
    out = []
    for lam in lams:
        sol = solve_limit(lam, prior, activation, rule, rank)
        mmse = min(max(rho_x**rank - sol.q_x**rank, 0.0), rho_x**rank)
        out.append(LimitPoint(lam, sol.q_x, mmse, sol.psi_value, sol.near_degenerate, rho_x, rank))
    return out


def resolver(template: ModelParams, cfg: FixedPointConfig | None = None) -> Callable[[float], float]:
    """``lambda -> q_x*`` for the full problem."""
    return lambda lam: solve_point(template, lam, cfg).q_x_star


def limit_resolver(prior, activation, rule=None, rank: int = 3) -> Callable[[float], float]:
    """``lambda -> q_x*`` for the small-alpha problem."""
    rule = rule or gauss_hermite_rule()
    return lambda lam: solve_limit(lam, prior, activation, rule, rank).q_x


def detect_lambda_c(curve: Sequence, jump_threshold: float | None = None, *,
                    resolve: Callable[[float], float] | None = None,
                    width: float = 1e-3) -> LambdaC | None:
    """Locate the transition on a solved curve.

    The first adjacent pair whose overlap rises by more than
    ``jump_threshold`` (default ``0.05 rho_x``) is bisected with
    ``resolve`` down to ``width``, always keeping the half that carries the
    larger rise.  The transition is discontinuous when the rise across the
    final bracket still exceeds the threshold.  Otherwise (no such pair, or
    the rise melts away under refinement) the first departure from zero
    overlap is bisected instead and reported as continuous.  When the
    overlap is positive from the first grid point, a melted rise is reported
    at its steepest point.  Returns ``None`` when nothing qualifies.
    """
    pts = sorted(curve, key=lambda p: p.lam)
    if len(pts) < 2:
        return None
    lam = np.array([p.lam for p in pts], dtype=float)
    q = np.array([p.q_x_star for p in pts], dtype=float)
    rho_x = float(getattr(pts[0], "rho_x", 1.0))
    thr = 0.05 * rho_x if jump_threshold is None else float(jump_threshold)
    zero = ZERO_OVERLAP * max(rho_x, 1.0)
    rises = np.diff(q)
    hits = np.nonzero(rises > thr)[0]
    smooth = None
    if hits.size:
        i = int(hits[0])
        lo, hi = (lam[i], q[i]), (lam[i + 1], q[i + 1])
        while resolve is not None and hi[0] - lo[0] > width:
            mid = 0.5 * (lo[0] + hi[0])
            qm = float(resolve(mid))
            if qm - lo[1] >= hi[1] - qm:
                hi = (mid, qm)
            else:
                lo = (mid, qm)
        found = LambdaC(float(0.5 * (lo[0] + hi[0])), bool(hi[1] - lo[1] > thr),
                        (float(lo[0]), float(hi[0])), float(lo[1]), float(hi[1]))
        if found.is_discontinuous or resolve is None:
            return found
        smooth = found
    pos = np.nonzero(q > zero)[0]
    if pos.size == 0 or pos[0] == 0 or q[pos[0] - 1] > zero:
        # overlap already positive at the grid start (side information)
        return smooth
    i = int(pos[0])
    lo, hi = (lam[i - 1], q[i - 1]), (lam[i], q[i])
    while resolve is not None and hi[0] - lo[0] > width:
        mid = 0.5 * (lo[0] + hi[0])
        qm = float(resolve(mid))
        if qm > zero:
            hi = (mid, qm)
        else:
            lo = (mid, qm)
    return LambdaC(float(0.5 * (lo[0] + hi[0])), bool(hi[1] - lo[1] > thr), (float(lo[0]), float(hi[0])),
                   float(lo[1]), float(hi[1]))
