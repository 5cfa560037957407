"""Stationary points of the potential by damped fixed-point iteration.

One Jacobi sweep of the stationarity conditions reads

    q_x <- rho_x - 2 dI_phi/dr (R(q_x), q_s)
    q_s <- rho_s - mmse_S(r_s)
    r_s <- max(0, -2 alpha dI_phi/dq (R(q_x), q_s))

Several starts are iterated and the stationary point with the smallest
potential wins.  A grid scan over ``(q_x, q_s)``, with ``r_s`` set to the
inner maximiser, backs the iteration up when no start converges.  Very
small ``alpha`` is handed to the one-dimensional limiting problem.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import activation as act_mod
from . import potential as pot
from . import prior as prior_mod
from .errors import (InvalidArgumentError, NearDegenerateWarning, NumericDomainError,
                     SolverDivergenceError)
from .potential import ModelParams, OverlapPoint
from .quadrature import gauss_hermite_rule

#: alpha at or below this is solved through the limiting problem
LIMIT_ALPHA = 1e-10
DEGENERACY_TOL = 1e-9
#: stationary points closer than this in every coordinate are one branch
_SAME_BRANCH = 1e-6
#: an iterate this close to an already converged point is taken to join it
_MERGE = 1e-8


@dataclass(frozen=True)
class FixedPointConfig:
    """Iteration controls.

    ``inits`` of ``None`` selects the default starts: the uninformative
    point, the nearly informative point and ``n_random`` seeded box points.
    ``grid`` is ``"auto"`` (scan only if nothing converges), ``"always"`` or
    ``"never"``.  ``route_limit`` sends ``alpha <= 1e-10`` to the limiting
    solver.  ``accelerate`` adds Anderson mixing on top of the damped map.
    """

    damping: float = 0.5
    tol: float = 1e-9
    max_iter: int = 2000
    inits: tuple | None = None
    n_random: int = 3
    seed: int = 0
    grid_nx: int = 64
    grid_ns: int = 64
    dq_step: float | None = None
    grid: str = "auto"
    route_limit: bool = True
    accelerate: bool = True
    anderson_depth: int = 4

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise InvalidArgumentError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.max_iter < 1 or self.grid_nx < 2 or self.grid_ns < 2:
            raise InvalidArgumentError("max_iter must be >= 1 and grids >= 2")
        if self.inits is not None and len(self.inits) < 2:
            raise InvalidArgumentError("at least two starts are required")
        if self.grid not in ("auto", "always", "never"):
            raise InvalidArgumentError(f"grid must be auto, always or never, got {self.grid!r}")


@dataclass(frozen=True)
class Branch:
    """Outcome of one start."""

    start: int
    point: OverlapPoint | None
    psi_value: float
    converged: bool
    iterations: int
    error: str = ""


@dataclass(frozen=True)
class SolveResult:
    point: OverlapPoint
    psi_value: float
    converged: bool
    iterations: int
    branch_id: int
    near_degenerate: bool
    branches: tuple = field(default=(), repr=False)
    method: str = "fixed_point"


# updates ------------------------------------------------------------------


def _clamp(x, hi):
    return min(max(x, 0.0), hi)


def fixed_point_step(params: ModelParams, pt: OverlapPoint, cfg: FixedPointConfig | None = None) -> OverlapPoint:
    """One damped Jacobi sweep, clamped to the box."""
    cfg = cfg or FixedPointConfig()
    pt.check(params)
    rule, act, prior = params.rule, params.activation, params.prior
    rho_x, rho_s = params.rho_x, params.rho_s
    q_x, q_s, r_s = pt.q_x, min(pt.q_s, rho_s), pt.r_s
    snr = pot.channel_snr(params.lam, params.rank, q_x)
    new_qx = rho_x - 2.0 * pot.output_mi_dr(act, snr, q_s, rho_s, rule)
    new_qs = rho_s - pot.scalar_mmse(prior, r_s, rule)
    new_rs = -2.0 * params.alpha * pot.output_mi_dq(act, snr, q_s, rho_s, rule, cfg.dq_step)
    if not all(math.isfinite(v) for v in (new_qx, new_qs, new_rs)):
        raise SolverDivergenceError(f"non-finite update from {pt}", [pt])
    new_qx, new_qs, new_rs = _clamp(new_qx, rho_x), _clamp(new_qs, rho_s), max(new_rs, 0.0)
    d = cfg.damping
    return OverlapPoint(
        _clamp(d * new_qx + (1 - d) * q_x, rho_x),
        _clamp(d * new_qs + (1 - d) * q_s, rho_s),
        max(d * new_rs + (1 - d) * r_s, 0.0),
    )


def residuals(params: ModelParams, pt: OverlapPoint, cfg: FixedPointConfig | None = None):
    """Absolute changes of the undamped map at ``pt``."""
    undamped = FixedPointConfig(damping=1.0, dq_step=(cfg.dq_step if cfg else None))
    nxt = fixed_point_step(params, pt, undamped)
    return tuple(abs(a - b) for a, b in zip(nxt.as_tuple(), pt.as_tuple()))


def default_inits(params: ModelParams, cfg: FixedPointConfig) -> list[OverlapPoint]:
    rho_x, rho_s, rule = params.rho_x, params.rho_s, params.rule
    q_hi = rho_s * (1 - 1e-6)
    starts = [OverlapPoint(0.0, 0.0, 0.0),
              OverlapPoint(rho_x, q_hi, prior_mod.solve_rs(params.prior, q_hi, rule).r_s)]
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.n_random):
        qx, qs = rng.uniform(0, rho_x), rng.uniform(0, rho_s)
        starts.append(OverlapPoint(qx, qs, prior_mod.solve_rs(params.prior, qs, rule).r_s))
    return starts


def _iterate(params, start, cfg, known=()):
    """Iterate to convergence; joining a known fixed point ends the run early.

    With ``cfg.accelerate`` the damped map ``G`` is combined with Anderson
    mixing over the last ``cfg.anderson_depth`` residuals ``G(x) - x``.  A
    mixed candidate is kept only while residuals keep shrinking; otherwise
    the history is dropped and the plain damped step is taken.  Convergence
    is always judged on the plain step from the current iterate.
    """
    lo = np.zeros(3)
    hi = np.array([params.rho_x, params.rho_s, np.inf])
    x = np.array(start.as_tuple())
    xs, fs = [], []
    best_res = np.inf
    for it in range(1, cfg.max_iter + 1):
        g = np.array(fixed_point_step(params, OverlapPoint(*x), cfg).as_tuple())
        f = g - x
        res = float(np.max(np.abs(f)))
        if res < cfg.tol:
            return OverlapPoint(*map(float, g)), True, it
        for k in known:
            if max(abs(a - b) for a, b in zip(g, k.as_tuple())) < _MERGE:
                return k, True, it
        if not cfg.accelerate:
            x = g
            continue
        if res > 2.0 * best_res:
            xs, fs = [], []
        best_res = min(best_res, res)
        xs.append(x)
        fs.append(f)
        if len(xs) > cfg.anderson_depth + 1:
            xs.pop(0)
            fs.pop(0)
        if len(xs) < 2:
            x = g
            continue
        dX = np.diff(np.array(xs), axis=0).T
        dF = np.diff(np.array(fs), axis=0).T
        gamma = np.linalg.lstsq(dF, f, rcond=None)[0]
        cand = x + f - (dX + dF) @ gamma
        x = np.clip(cand, lo, hi) if np.all(np.isfinite(cand)) else g
    return OverlapPoint(*map(float, x)), False, cfg.max_iter


def _select(branches: Sequence[Branch]):
    """Best branch index and the near-degeneracy flag."""
    live = [b for b in branches if b.point is not None]
    order = sorted(live, key=lambda b: (b.psi_value, b.start))
    best = order[0]
    rivals = [b for b in order[1:]
              if b.psi_value - best.psi_value < DEGENERACY_TOL
              and max(abs(x - y) for x, y in zip(b.point.as_tuple(), best.point.as_tuple())) > _SAME_BRANCH]
    if not rivals:
        return best, False
    pick = max([best] + rivals, key=lambda b: (b.point.q_x, -b.start))
    return pick, True


def grid_scan(params: ModelParams, nx: int = 64, ns: int = 64):
    """Minimum over a ``(q_x, q_s)`` grid of ``sup_{r_s} psi``; returns ``(point, psi)``."""
    rule = params.rule
    best = (None, math.inf)
    for q_s in np.linspace(0.0, params.rho_s, ns):
        r_s = prior_mod.solve_rs(params.prior, float(q_s), rule).r_s
        for q_x in np.linspace(0.0, params.rho_x, nx):
            pt = OverlapPoint(float(q_x), float(q_s), r_s)
            val = pot.psi(params, pt)
            if val < best[1]:
                best = (pt, val)
    return best


def solve_variational(params: ModelParams, cfg: FixedPointConfig | None = None) -> SolveResult:
    """Stationary point of smallest potential."""
    cfg = cfg or FixedPointConfig()
    if cfg.route_limit and params.alpha <= LIMIT_ALPHA:
        return _solve_limit_as_result(params)
    starts = list(cfg.inits) if cfg.inits is not None else default_inits(params, cfg)
    branches = []
    for i, start in enumerate(starts):
        try:
            start = start if isinstance(start, OverlapPoint) else OverlapPoint(*start)
            known = [b.point for b in branches if b.converged]
            pt, ok, its = _iterate(params, start.check(params), cfg, known)
            branches.append(Branch(i, pt, pot.psi(params, pt), ok, its))
        except (SolverDivergenceError, NumericDomainError, FloatingPointError) as exc:
            branches.append(Branch(i, None, math.inf, False, 0, f"{type(exc).__name__}: {exc}"))
    if all(b.point is None for b in branches):
        raise SolverDivergenceError("every start diverged", [b.error for b in branches])
    method = "fixed_point"
    if cfg.grid == "always" or (cfg.grid == "auto" and not any(b.converged for b in branches)):
        gpt, _ = grid_scan(params, cfg.grid_nx, cfg.grid_ns)
        pt, ok, its = _iterate(params, gpt, cfg)
        branches.append(Branch(len(branches), pt, pot.psi(params, pt), ok, its))
        gval = pot.psi(params, gpt)
        if gval < branches[-1].psi_value:
            branches.append(Branch(len(branches), gpt, gval, False, 0))
        method = "grid"
    pool = [b for b in branches if b.converged] or [b for b in branches if b.point is not None]
    best, degenerate = _select(pool)
    return SolveResult(best.point, best.psi_value, best.converged, best.iterations, best.start,
                       degenerate, tuple(branches), method)


# limiting problem ---------------------------------------------------------


@dataclass(frozen=True)
class LimitSolution:
    q_x: float
    psi_value: float
    near_degenerate: bool
    candidates: tuple = field(default=(), repr=False)


def _limit_objective(lam, prior, act, rule, rank):
    m_s, rho_s = prior_mod.moments(prior)
    q_s = min(m_s * m_s, rho_s)
    rho_x = act_mod.rho_x(act, rho_s, rule)

    def f(q):
        snr = pot.channel_snr(lam, rank, q)
        return pot.output_mi(act, snr, q_s, rho_s, rule) + pot.tensor_term(lam, rank, rho_x, q)

    return f, rho_x, q_s, rho_s


def solve_limit(lam: float, prior, activation, rule=None, rank: int = 3, *,
                n_scan: int = 41, tol: float = 1e-10, max_iter: int = 2000) -> LimitSolution:
    """Minimise the small-``alpha`` objective over ``q_x`` in ``[0, rho_x]``.

    A coarse scan brackets the local minima, each is polished by bounded
    Brent search, and the ``q_x``-only fixed point is run from both ends.
    """
    rule = rule or gauss_hermite_rule()
    f, rho_x, q_s, rho_s = _limit_objective(lam, prior, activation, rule, rank)
    grid = np.linspace(0.0, rho_x, n_scan)
    vals = np.array([f(q) for q in grid])
    cands = [(0.0, float(vals[0])), (float(rho_x), float(vals[-1]))]
    for i in range(1, n_scan - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            res = minimize_scalar(f, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                  options={"xatol": tol})
            cands.append((float(res.x), float(res.fun)))
    for q0 in (0.0, rho_x):
        q = q0
        for _ in range(max_iter):
            snr = pot.channel_snr(lam, rank, q)
            new = _clamp(rho_x - 2.0 * pot.output_mi_dr(activation, snr, q_s, rho_s, rule), rho_x)
            new = 0.5 * new + 0.5 * q
            done = abs(new - q) < tol
            q = new
            if done:
                break
        cands.append((q, f(q)))
    cands.sort(key=lambda c: (c[1], -c[0]))
    best = cands[0]
    rivals = [c for c in cands if c[1] - best[1] < DEGENERACY_TOL and abs(c[0] - best[0]) > _SAME_BRANCH]
    if rivals:
        best = max([best] + rivals, key=lambda c: c[0])
    return LimitSolution(best[0], best[1], bool(rivals), tuple(cands))


def _solve_limit_as_result(params: ModelParams) -> SolveResult:
    sol = solve_limit(params.lam, params.prior, params.activation, params.rule, params.rank)
    q_s = min(params.m_s**2, params.rho_s)
    pt = OverlapPoint(sol.q_x, q_s, 0.0)
    return SolveResult(pt, pot.psi(params, pt), True, 0, 0, sol.near_degenerate, (), "limit")


# derived quantities -------------------------------------------------------


def mutual_information(params: ModelParams, cfg: FixedPointConfig | None = None) -> float:
    """Asymptotic normalised mutual information (the minimum potential)."""
    return solve_variational(params, cfg).psi_value


def mmse_from_overlap(params: ModelParams, q_x: float) -> float:
    r = params.rank
    return float(min(max(params.rho_x**r - q_x**r, 0.0), params.rho_x**r))


def tensor_mmse(params: ModelParams, cfg: FixedPointConfig | None = None,
                result: SolveResult | None = None) -> float:
    """``rho_x^r - q_x*^r``; warns when the minimiser is nearly degenerate."""
    result = result or solve_variational(params, cfg)
    if result.near_degenerate:
        warnings.warn(f"near-degenerate minimiser at lambda={params.lam}, alpha={params.alpha}",
                      NearDegenerateWarning, stacklevel=2)
    return mmse_from_overlap(params, result.point.q_x)


def jacobian(params: ModelParams, pt: OverlapPoint, h: float = 1e-6, cfg: FixedPointConfig | None = None):
    """Numerical Jacobian of the undamped map; a diagnostic only.

    One-sided differences are taken into the box so the map stays defined.
    """
    base_cfg = FixedPointConfig(damping=1.0, dq_step=(cfg.dq_step if cfg else None))
    f0 = np.array(fixed_point_step(params, pt, base_cfg).as_tuple())
    x0 = np.array(pt.as_tuple())
    hi = (params.rho_x, params.rho_s, math.inf)
    J = np.zeros((3, 3))
    for j in range(3):
        step = -h if x0[j] + h > hi[j] else h
        x = x0.copy()
        x[j] += step
        fj = np.array(fixed_point_step(params, OverlapPoint(*x), base_cfg).as_tuple())
        J[:, j] = (fj - f0) / step
    return J
