"""Replica-symmetric potentials of the GLM-spiked tensor model.

For rank ``r``, signal strength ``lam`` and sampling ratio ``alpha``

    psi(q_x, q_s, r_s) = I_S(r_s) / alpha + I_phi(R, q_s; rho_s)
                         - r_s (rho_s - q_s) / (2 alpha) + T(q_x)

with channel SNR ``R = lam q_x^(r-1) / (r-1)!`` and tensor term

    T(q_x) = lam / (2 r!) * (rho_x^r + (r-1) q_x^r - r q_x^(r-1) rho_x).

At ``r = 3`` the tensor term factors as ``lam/12 (rho_x - q_x)^2 (rho_x + 2 q_x)``.
Sub-evaluations of the two information functionals are memoised on
arguments rounded to 12 significant digits; the rounded value is the one
evaluated so results do not depend on call order.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from functools import cached_property

from . import activation as act_mod
from . import prior as prior_mod
from .activation import Activation
from .errors import InvalidArgumentError
from .prior import Prior
from .quadrature import DEFAULT_ORDER, QuadratureRule, gauss_hermite_rule

_BOX_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Full problem specification; ``lam`` stands for lambda."""

    lam: float
    alpha: float
    prior: Prior = field(default_factory=Prior.gaussian)
    activation: Activation = field(default_factory=Activation.linear)
    rank: int = 3
    quad_order: int = DEFAULT_ORDER

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if isinstance(self.rank, bool) or int(self.rank) != self.rank or self.rank < 2:
            raise InvalidArgumentError(f"rank must be an integer >= 2, got {self.rank}")
        gauss_hermite_rule(self.quad_order)

    @cached_property
    def rule(self) -> QuadratureRule:
        return gauss_hermite_rule(self.quad_order)

    @cached_property
    def m_s(self) -> float:
        return prior_mod.moments(self.prior)[0]

    @cached_property
    def rho_s(self) -> float:
        return prior_mod.moments(self.prior)[1]

    @cached_property
    def rho_x(self) -> float:
        return act_mod.rho_x(self.activation, self.rho_s, self.rule)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class OverlapPoint:
    """Variational coordinates; nonnegativity is checked here, the box by :meth:`check`."""

    q_x: float
    q_s: float
    r_s: float

    def __post_init__(self):
        for name in ("q_x", "q_s", "r_s"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < -_BOX_TOL:
                raise InvalidArgumentError(f"{name} must be finite and nonnegative, got {v}")

    def check(self, params: ModelParams) -> "OverlapPoint":
        if self.q_x > params.rho_x * (1 + _BOX_TOL) + _BOX_TOL:
            raise InvalidArgumentError(f"q_x={self.q_x} exceeds rho_x={params.rho_x}")
        if self.q_s > params.rho_s * (1 + _BOX_TOL) + _BOX_TOL:
            raise InvalidArgumentError(f"q_s={self.q_s} exceeds rho_s={params.rho_s}")
        return self

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.q_x, self.q_s, self.r_s)


# memo ---------------------------------------------------------------------


class _Memo:
    """Thread-safe dictionary memo of pure sub-evaluations."""

    def __init__(self, maxsize: int = 200_000):
        self._data: dict = {}
        self._lock = threading.Lock()
        self.maxsize = maxsize
        self.hits = self.misses = 0

    def get(self, key, compute):
        with self._lock:
            if key in self._data:
                self.hits += 1
                return self._data[key]
        value = compute()
        with self._lock:
            self.misses += 1
            if len(self._data) >= self.maxsize:
                self._data.clear()
            self._data[key] = value
        return value

    def clear(self):
        with self._lock:
            self._data.clear()
            self.hits = self.misses = 0


_MEMO = _Memo()


def round12(x: float) -> float:
    return float(f"{float(x):.12g}")


def clear_cache() -> None:
    _MEMO.clear()


def cache_stats() -> dict:
    return {"hits": _MEMO.hits, "misses": _MEMO.misses, "size": len(_MEMO._data)}


def scalar_mi(prior: Prior, r_s: float, rule: QuadratureRule) -> float:
    r_s = round12(r_s)
    return _MEMO.get(("smi", prior, r_s), lambda: prior_mod.scalar_mi(prior, r_s, rule))


def scalar_mmse(prior: Prior, r_s: float, rule: QuadratureRule) -> float:
    r_s = round12(r_s)
    return _MEMO.get(("smmse", prior, r_s), lambda: prior_mod.scalar_mmse(prior, r_s, rule))


def output_pair(act: Activation, r: float, q: float, rho_s: float, rule: QuadratureRule):
    """Memoised ``(I_phi, dI_phi/dr)``."""
    r, q = round12(r), min(round12(q), rho_s)
    return _MEMO.get(("phi", act, r, q, rho_s, rule.order),
                     lambda: act_mod.output_mi_both(act, r, q, rho_s, rule))


def output_mi(act: Activation, r: float, q: float, rho_s: float, rule: QuadratureRule) -> float:
    if act.kind == act_mod.LINEAR:
        return act_mod.output_mi(act, r, q, rho_s, rule)
    r, q = round12(r), min(round12(q), rho_s)
    return _MEMO.get(("phimi", act, r, q, rho_s, rule.order),
                     lambda: act_mod.output_mi(act, r, q, rho_s, rule))


def output_mi_dr(act: Activation, r: float, q: float, rho_s: float, rule: QuadratureRule) -> float:
    return output_pair(act, r, q, rho_s, rule)[1]


def output_mi_dq(act: Activation, r: float, q: float, rho_s: float, rule: QuadratureRule,
                 step: float | None = None) -> float:
    return act_mod.output_mi_dq(act, r, q, rho_s, rule, step, mi=output_mi)


# potentials ---------------------------------------------------------------


def channel_snr(lam: float, rank: int, q_x: float) -> float:
    """``lam q_x^(r-1) / (r-1)!``."""
    return lam * q_x ** (rank - 1) / math.factorial(rank - 1)


def tensor_term(lam: float, rank: int, rho_x: float, q_x: float) -> float:
    """``lam / (2 r!) (rho_x^r + (r-1) q_x^r - r q_x^(r-1) rho_x)``."""
    if rank == 3:
        return lam / 12.0 * (rho_x - q_x) ** 2 * (rho_x + 2.0 * q_x)
    if rank == 2:
        return lam / 4.0 * (rho_x - q_x) ** 2
    r = rank
    return lam / (2.0 * math.factorial(r)) * (rho_x**r + (r - 1) * q_x**r - r * q_x ** (r - 1) * rho_x)


def psi(params: ModelParams, pt: OverlapPoint) -> float:
    """The potential at ``pt``."""
    pt.check(params)
    q_x = min(pt.q_x, params.rho_x)
    q_s = min(pt.q_s, params.rho_s)
    rule = params.rule
    snr = channel_snr(params.lam, params.rank, q_x)
    value = (
        scalar_mi(params.prior, pt.r_s, rule) / params.alpha
        + output_mi(params.activation, snr, q_s, params.rho_s, rule)
        - pt.r_s * (params.rho_s - q_s) / (2.0 * params.alpha)
        + tensor_term(params.lam, params.rank, params.rho_x, q_x)
    )
    return float(value)


def psi_tilde(alpha: float, r: float, r_s: float, q_s: float, prior: Prior, activation: Activation,
              rule: QuadratureRule | None = None) -> float:
    """GLM potential ``I_S(r_s) + alpha I_phi(r, q_s) - r_s (rho_s - q_s) / 2``."""
    if min(alpha, r, r_s, q_s) < 0:
        raise InvalidArgumentError("arguments must be nonnegative")
    rule = rule or gauss_hermite_rule()
    rho_s = prior_mod.moments(prior)[1]
    if q_s > rho_s * (1 + _BOX_TOL) + _BOX_TOL:
        raise InvalidArgumentError(f"q_s={q_s} exceeds rho_s={rho_s}")
    q_s = min(q_s, rho_s)
    return float(
        scalar_mi(prior, r_s, rule)
        + alpha * output_mi(activation, r, q_s, rho_s, rule)
        - r_s * (rho_s - q_s) / 2.0
    )


def psi_limit(lam: float, q_x: float, prior: Prior, activation: Activation,
              rule: QuadratureRule | None = None, rank: int = 3) -> float:
    """Small-``alpha`` objective: side information fixed at ``q_s = m_s^2``."""
    rule = rule or gauss_hermite_rule()
    m_s, rho_s = prior_mod.moments(prior)
    rho_x = act_mod.rho_x(activation, rho_s, rule)
    if not -_BOX_TOL <= q_x <= rho_x * (1 + _BOX_TOL) + _BOX_TOL:
        raise InvalidArgumentError(f"q_x must lie in [0, {rho_x}], got {q_x}")
    q_x = min(max(q_x, 0.0), rho_x)
    snr = channel_snr(lam, rank, q_x)
    q_s = min(m_s * m_s, rho_s)
    return float(output_mi(activation, snr, q_s, rho_s, rule) + tensor_term(lam, rank, rho_x, q_x))
