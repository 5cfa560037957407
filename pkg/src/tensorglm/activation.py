"""Componentwise nonlinearity and its conditional output channel.

With ``T = sqrt(rho - q) U + sqrt(q) V`` for independent standard normals
``U`` and ``V``, the channel observes ``sqrt(r) phi(T) + Z`` and knows
``V``.  :func:`output_mi` returns ``I(U; sqrt(r) phi(T) + Z | V)``.

Two evaluation routes exist.

*Level collapse* (``sign``, ``sign_deadzone``): given ``V``, ``phi(T)`` is a
discrete variable whose masses are normal CDF differences, so the inner
integral over ``u`` is an exact finite sum.

*Generic*: ``u`` and ``U`` share one quadrature rule; each node becomes a
level of a discrete channel carrying the node weight.  Declared breakpoints
split that rule, so piecewise-constant functions are integrated exactly in
``u``.

In both routes the ``V`` integral switches to narrow windows around the
breakpoint images once ``T | V`` is sharply concentrated, since away from
them the output is known exactly and contributes nothing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from ._channel import discrete_channel, uniform_rule
from .errors import ConfigError, DerivativeSignWarning, InvalidArgumentError, NumericDomainError
from .quadrature import SPAN, QuadratureRule, _legendre, gauss_hermite_rule, panel_rule

LINEAR = "linear"
SIGN = "sign"
SIGN_DEADZONE = "sign_deadzone"
CUSTOM = "custom"

#: windows reach this many conditional standard deviations
_WINDOW = 10.0
_WINDOW_ORDER = 6
#: switch V to windows below this conditional spread (in V units)
_WINDOW_BELOW = 1.0
#: Gauss-Legendre nodes per piece when splitting at breakpoints
_PIECE_ORDER = 8


@dataclass(frozen=True)
class Activation:
    """The GLM nonlinearity ``phi``.

    ``breakpoints`` lists points where a custom ``phi`` jumps or kinks; the
    generic route splits its integrals there.  ``odd`` declares
    ``phi(-x) = -phi(x)`` which halves the ``V`` integral.
    """

    kind: str
    epsilon: float = 0.0
    func: Callable | None = None
    bound: float = math.inf
    breakpoints: tuple = ()
    odd: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in (LINEAR, SIGN, SIGN_DEADZONE, CUSTOM):
            raise InvalidArgumentError(f"unknown activation kind {self.kind!r}")
        if self.kind == SIGN_DEADZONE and not self.epsilon >= 0:
            raise InvalidArgumentError("epsilon must be nonnegative")
        if self.kind == CUSTOM:
            if not callable(self.func):
                raise InvalidArgumentError("custom activation needs a callable")
            if not self.bound > 0:
                raise InvalidArgumentError("sup-norm bound must be positive (inf if unbounded)")

    @classmethod
    def linear(cls) -> "Activation":
        return cls(LINEAR, odd=True, name=LINEAR)

    @classmethod
    def sign(cls) -> "Activation":
        return cls(SIGN, bound=1.0, odd=True, name=SIGN)

    @classmethod
    def sign_deadzone(cls, epsilon: float) -> "Activation":
        return cls(SIGN_DEADZONE, epsilon=float(epsilon), bound=1.0, odd=True, name=SIGN_DEADZONE)

    @classmethod
    def custom(cls, func: Callable, sup_norm: float = math.inf, breakpoints: Sequence[float] = (),
               odd: bool = False, name: str = CUSTOM) -> "Activation":
        """Wrap a vectorised callable; ``sup_norm`` bounds ``|phi|``."""
        bps = tuple(sorted(float(b) for b in breakpoints))
        return cls(CUSTOM, func=func, bound=float(sup_norm), breakpoints=bps, odd=bool(odd), name=name)

    @classmethod
    def from_config(cls, cfg: dict) -> "Activation":
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        if kind == LINEAR and not cfg:
            return cls.linear()
        if kind == SIGN and not cfg:
            return cls.sign()
        if kind == SIGN_DEADZONE and set(cfg) <= {"epsilon"}:
            return cls.sign_deadzone(cfg.get("epsilon", 0.0))
        raise ConfigError(f"cannot build activation from {dict(kind=kind, **cfg)!r}")

    # structure ------------------------------------------------------------

    @property
    def sup_norm(self) -> float:
        return self.bound

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.bound)

    @property
    def levels(self) -> np.ndarray | None:
        """Output values of a piecewise-constant ``phi``, one per piece."""
        if self.kind == SIGN:
            return np.array([-1.0, 1.0])
        if self.kind == SIGN_DEADZONE:
            return np.array([-1.0, 0.0, 1.0])
        return None

    @property
    def cuts(self) -> np.ndarray:
        if self.kind == SIGN:
            return np.array([0.0])
        if self.kind == SIGN_DEADZONE:
            return np.array([-self.epsilon, self.epsilon])
        return np.asarray(self.breakpoints, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == LINEAR:
            return x.copy()
        if self.kind == SIGN:
            return np.sign(x)
        if self.kind == SIGN_DEADZONE:
            return np.where(np.abs(x) <= self.epsilon, 0.0, np.sign(x))
        return np.asarray(self.func(x), dtype=float)


# Gaussian pieces ----------------------------------------------------------


def _interval_mass(lo, hi):
    """``P(lo < Z <= hi)`` without cancellation in the upper tail."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    upper = lo > 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def _piece_nodes(lo, hi, order: int):
    """Gauss-Legendre nodes in CDF coordinates for ``Z`` restricted to ``(lo, hi]``.

    Returns ``(nodes, weights)`` with the weights summing to the mass of the
    piece; a constant integrand on the piece is integrated exactly.
    """
    x, w = _legendre(order)
    lo = np.asarray(lo, float)[..., None]
    hi = np.asarray(hi, float)[..., None]
    upper = lo > 0
    # work in whichever tail keeps the CDF values away from 1
    a = np.where(upper, ndtr(-hi), ndtr(lo))
    b = np.where(upper, ndtr(-lo), ndtr(hi))
    half = 0.5 * (b - a)
    t = a + half * (x + 1.0)
    z = np.where(upper, -ndtri(np.clip(t, 1e-300, 1.0)), ndtri(np.clip(t, 1e-300, 1.0)))
    return z, half * w


def _split_rule(cuts_z, order: int):
    """Piecewise rule for ``Z`` split at ``cuts_z`` of shape ``(..., m)``."""
    cuts_z = np.asarray(cuts_z, float)
    shape = cuts_z.shape[:-1]
    inf = np.full(shape + (1,), np.inf)
    edges = np.concatenate([-inf, np.sort(cuts_z, axis=-1), inf], axis=-1)
    z, w = _piece_nodes(edges[..., :-1], edges[..., 1:], order)
    return z.reshape(shape + (-1,)), w.reshape(shape + (-1,))


def _gauss_pdf(v):
    return np.exp(-0.5 * v * v) / math.sqrt(2.0 * math.pi)


def _fold(nodes, weights):
    """Restrict an even integrand's rule to ``V >= 0``."""
    pos = nodes > 0
    zero = nodes == 0
    return np.concatenate([nodes[zero], nodes[pos]]), np.concatenate([weights[zero], 2 * weights[pos]])


@lru_cache(maxsize=4096)
def _v_rule_cached(q: float, rho: float, cuts: tuple, order: int, odd: bool):
    s = math.sqrt(q)
    sigma_v = math.sqrt(rho - q) / s
    if cuts and sigma_v < _WINDOW_BELOW:
        centers = np.unique(np.asarray(cuts) / s)
        if odd:
            centers = np.unique(np.concatenate([centers, -centers]))
        steps = np.arange(-_WINDOW, _WINDOW + 1.0)
        edges = (centers[:, None] + sigma_v * steps).ravel()
        if odd:
            edges = np.concatenate([edges, [0.0]])
        edges = np.unique(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        near = np.min(np.abs(mid[:, None] - centers[None, :]), axis=1) < _WINDOW * sigma_v
        lo, hi = edges[:-1][near], edges[1:][near]
        x, w = _legendre(_WINDOW_ORDER)
        half = 0.5 * (hi - lo)[:, None]
        v = (lo[:, None] + half * (x + 1.0)).ravel()
        wv = (half * w).ravel() * _gauss_pdf(v)
    else:
        gh = gauss_hermite_rule(order)
        v, wv = np.array(gh.nodes), np.array(gh.weights)
    if odd:
        v, wv = _fold(v, wv)
    v.setflags(write=False)
    wv.setflags(write=False)
    return v, wv


def _v_rule(act: Activation, q: float, rho: float, rule: QuadratureRule):
    if q <= 0.0:
        return np.zeros(1), np.ones(1)
    return _v_rule_cached(q, rho, tuple(act.cuts.tolist()), rule.order, act.odd)


def _check_args(r, q, rho_s):
    r, q, rho_s = float(r), float(q), float(rho_s)
    if not r >= 0:
        raise InvalidArgumentError(f"r must be nonnegative, got {r}")
    if not rho_s >= 0:
        raise InvalidArgumentError(f"rho_s must be nonnegative, got {rho_s}")
    tol = 1e-12 * max(rho_s, 1.0)
    if not -tol <= q <= rho_s + tol:
        raise InvalidArgumentError(f"q must lie in [0, {rho_s}], got {q}")
    return r, min(max(q, 0.0), rho_s), rho_s


# channel evaluations ------------------------------------------------------


def _level_collapse(act, r, q, rho, rule, want_mi, want_var):
    v, wv = _v_rule(act, q, rho, rule)
    sigma, s = math.sqrt(rho - q), math.sqrt(q)
    cz = (act.cuts[None, :] - s * v[:, None]) / sigma
    inf = np.full((v.size, 1), np.inf)
    edges = np.concatenate([-inf, cz, inf], axis=1)
    masses = np.maximum(_interval_mass(edges[:, :-1], edges[:, 1:]), 0.0)
    masses /= masses.sum(axis=1, keepdims=True)
    mi, var = discrete_channel(act.levels, masses, r, want_mi=want_mi, want_var=want_var)
    return (None if mi is None else float(wv @ mi)), (None if var is None else float(wv @ var))


def _generic(act, r, q, rho, rule, want_mi, want_var):
    v, wv = _v_rule(act, q, rho, rule)
    sigma, s = math.sqrt(rho - q), math.sqrt(q)
    cuts = act.cuts
    if cuts.size:
        cz = (cuts[None, :] - s * v[:, None]) / sigma
        u, wu = _split_rule(cz, _PIECE_ORDER)
    else:
        gh = gauss_hermite_rule(rule.order)
        u = np.broadcast_to(gh.nodes, (v.size, gh.order))
        wu = np.broadcast_to(gh.weights, u.shape)
    levels = act(sigma * u + s * v[:, None])
    if not np.all(np.isfinite(levels)):
        bad = np.argwhere(~np.isfinite(levels))[0]
        raise NumericDomainError("activation is not finite at a quadrature node",
                                 node=(float(u[tuple(bad)]), float(v[bad[0]])))
    spread = float(np.max(levels.max(axis=1) - levels.min(axis=1)))
    mi, var = discrete_channel(levels, wu, r, want_mi=want_mi, want_var=want_var,
                               z_rule=uniform_rule(r, spread))
    return (None if mi is None else float(wv @ mi)), (None if var is None else float(wv @ var))


def _evaluate(act, r, q, rho, rule, want_mi, want_var, path):
    if rho - q <= 0.0 or rho == 0.0:
        return 0.0, 0.0
    rule = rule or gauss_hermite_rule()
    if path == "auto":
        path = "levels" if act.levels is not None else "generic"
    if path == "levels":
        if act.levels is None:
            raise InvalidArgumentError(f"{act.kind} has no finite output alphabet")
        return _level_collapse(act, r, q, rho, rule, want_mi, want_var)
    if path == "generic":
        return _generic(act, r, q, rho, rule, want_mi, want_var)
    raise InvalidArgumentError(f"unknown path {path!r}")


def rho_x(act: Activation, rho_s: float, rule: QuadratureRule | None = None) -> float:
    """Second moment ``E phi(T)^2`` for ``T ~ N(0, rho_s)``."""
    rho_s = float(rho_s)
    if not rho_s >= 0:
        raise InvalidArgumentError("rho_s must be nonnegative")
    if act.kind == LINEAR:
        return rho_s
    if rho_s == 0.0:
        return float(act(0.0) ** 2)
    sd = math.sqrt(rho_s)
    if act.kind == SIGN:
        return 1.0
    if act.kind == SIGN_DEADZONE:
        return float(2.0 * ndtr(-act.epsilon / sd))
    # composite panels with an edge at every breakpoint: Gauss-Hermite
    # converges slowly for integrands like tanh^2 with nearby complex poles
    cuts = np.clip(act.cuts / sd, -SPAN, SPAN)
    z, w = panel_rule(np.unique(np.concatenate([np.linspace(-SPAN, SPAN, 73), cuts])), 8)
    vals = act(sd * np.asarray(z)) ** 2
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("activation is not finite at a quadrature node")
    return float(w @ vals)


def output_mi(act: Activation, r: float, q: float, rho_s: float,
              rule: QuadratureRule | None = None, *, path: str = "auto") -> float:
    """``I(U; sqrt(r) phi(sqrt(rho_s - q) U + sqrt(q) V) + Z | V)`` in nats.

    ``path`` selects ``"levels"`` or ``"generic"`` evaluation; ``"auto"``
    uses level collapse whenever the output alphabet is finite.
    """
    r, q, rho_s = _check_args(r, q, rho_s)
    if r == 0.0:
        return 0.0
    if act.kind == LINEAR and path == "auto":
        return 0.5 * math.log1p(r * (rho_s - q))
    mi, _ = _evaluate(act, r, q, rho_s, rule, True, False, path)
    return mi


def output_mi_dr(act: Activation, r: float, q: float, rho_s: float,
                 rule: QuadratureRule | None = None, *, path: str = "auto") -> float:
    """``dI/dr``: half the expected posterior variance of ``phi(T)``."""
    r, q, rho_s = _check_args(r, q, rho_s)
    if act.kind == LINEAR and path == "auto":
        d = rho_s - q
        return 0.5 * d / (1.0 + r * d)
    _, var = _evaluate(act, r, q, rho_s, rule, False, True, path)
    return 0.5 * var


def output_mi_both(act: Activation, r: float, q: float, rho_s: float,
                   rule: QuadratureRule | None = None) -> tuple[float, float]:
    """``(output_mi, output_mi_dr)`` from one pass."""
    r, q, rho_s = _check_args(r, q, rho_s)
    if act.kind == LINEAR:
        d = rho_s - q
        return 0.5 * math.log1p(r * d), 0.5 * d / (1.0 + r * d)
    mi, var = _evaluate(act, r, q, rho_s, rule, r > 0, True, "auto")
    return (0.0 if r == 0 else mi), 0.5 * var


def output_mi_dq(act: Activation, r: float, q: float, rho_s: float,
                 rule: QuadratureRule | None = None, step: float | None = None,
                 *, mi: Callable | None = None, path: str = "auto") -> float:
    """Finite-difference ``dI/dq``; a positive value above 1e-6 warns.

    Central differences are used in the interior and second-order one-sided
    ones within ``step`` of an end of ``[0, rho_s]``.  ``mi`` may supply a
    (cached) replacement for :func:`output_mi` with the same signature.
    Linear activations use the exact ``-r / (2 (1 + r (rho_s - q)))``
    unless a ``step`` is given or ``path="fd"``.
    """
    r, q, rho_s = _check_args(r, q, rho_s)
    if path not in ("auto", "fd"):
        raise InvalidArgumentError(f"unknown path {path!r}")
    if r == 0.0 or rho_s == 0.0:
        return 0.0
    if act.kind == LINEAR and step is None and path == "auto":
        return -0.5 * r / (1.0 + r * (rho_s - q))
    h = 1e-4 * max(rho_s, 1.0) if step is None else float(step)
    if not h > 0:
        raise InvalidArgumentError("step must be positive")
    h = min(h, rho_s / 4.0)
    f = mi or output_mi

    def at(x):
        return f(act, r, min(max(x, 0.0), rho_s), rho_s, rule)

    if q - h >= 0.0 and q + h <= rho_s:
        d = (at(q + h) - at(q - h)) / (2 * h)
    elif q + 2 * h <= rho_s:
        d = (-3 * at(q) + 4 * at(q + h) - at(q + 2 * h)) / (2 * h)
    else:
        d = (3 * at(q) - 4 * at(q - h) + at(q - 2 * h)) / (2 * h)
    if d > 1e-6:
        warnings.warn(f"dI/dq = {d:.3g} > 0 at r={r}, q={q}", DerivativeSignWarning, stacklevel=2)
    return float(d)
