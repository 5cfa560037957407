"""Latent priors and their scalar Gaussian channel.

For ``Y = sqrt(r) S + Z`` the module evaluates the mutual information
``I(S; Y)``, the MMSE ``E (S - E[S | Y])^2`` and the inverse problem of
finding the SNR at which the MMSE reaches a target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from ._channel import discrete_channel
from .errors import ConfigError, InvalidArgumentError
from .quadrature import QuadratureRule

GAUSSIAN = "gaussian"
TWO_POINT = "two_point"
FINITE_SUPPORT = "finite_support"

R_CAP = 1e6
_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Prior:
    """Distribution of the latent entries ``S_j``.

    Use the constructors rather than the raw fields.  Gaussian priors keep
    ``support_bound == 0`` (unbounded); the discrete kinds store their atoms
    in ``values`` and ``probs``.
    """

    kind: str
    values: tuple = ()
    probs: tuple = ()
    mean: float = 0.0
    variance: float = 0.0
    support_bound: float = 0.0

    def __post_init__(self):
        if self.kind == GAUSSIAN:
            if not (math.isfinite(self.mean) and math.isfinite(self.variance)) or self.variance < 0:
                raise InvalidArgumentError("gaussian prior needs a finite mean and variance >= 0")
            return
        if self.kind not in (TWO_POINT, FINITE_SUPPORT):
            raise InvalidArgumentError(f"unknown prior kind {self.kind!r}")
        if len(self.values) == 0 or len(self.values) != len(self.probs):
            raise InvalidArgumentError("values and probs must be non-empty and of equal length")
        p = np.asarray(self.probs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("support values must be finite")
        if np.any(p < 0) or abs(p.sum() - 1.0) > _PROB_TOL:
            raise InvalidArgumentError("probabilities must be nonnegative and sum to 1")
        if np.any(np.abs(v) > self.support_bound * (1 + 1e-15)):
            raise InvalidArgumentError("support exceeds support_bound")

    # constructors -------------------------------------------------------

    @classmethod
    def gaussian(cls, mean: float = 0.0, variance: float = 1.0) -> "Prior":
        return cls(GAUSSIAN, mean=float(mean), variance=float(variance))

    @classmethod
    def two_point(cls, v_plus: float = 1.0, v_minus: float = -1.0, p_plus: float = 0.5) -> "Prior":
        if not 0.0 <= p_plus <= 1.0:
            raise InvalidArgumentError(f"p_plus must lie in [0, 1], got {p_plus}")
        vals = (float(v_plus), float(v_minus))
        return cls(TWO_POINT, vals, (float(p_plus), 1.0 - float(p_plus)),
                   support_bound=max(abs(vals[0]), abs(vals[1])))

    @classmethod
    def finite_support(cls, values: Sequence[float], probs: Sequence[float],
                       support_bound: float | None = None) -> "Prior":
        vals = tuple(float(x) for x in values)
        bound = max((abs(x) for x in vals), default=0.0) if support_bound is None else float(support_bound)
        return cls(FINITE_SUPPORT, vals, tuple(float(x) for x in probs), support_bound=bound)

    @classmethod
    def rademacher(cls) -> "Prior":
        return cls.two_point(1.0, -1.0, 0.5)

    @classmethod
    def bernoulli_rademacher(cls, rho: float) -> "Prior":
        """Zero with probability ``1 - rho``, otherwise a fair sign."""
        if not 0.0 < rho <= 1.0:
            raise InvalidArgumentError(f"rho must lie in (0, 1], got {rho}")
        return cls.finite_support((-1.0, 0.0, 1.0), (rho / 2, 1.0 - rho, rho / 2))

    @classmethod
    def from_config(cls, cfg: dict) -> "Prior":
        """Build from ``{"kind": ..., **parameters}``."""
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        try:
            if kind == GAUSSIAN:
                return cls.gaussian(**cfg)
            if kind == TWO_POINT:
                return cls.two_point(**cfg)
            if kind == FINITE_SUPPORT:
                return cls.finite_support(**cfg)
            if kind == "rademacher":
                return cls.rademacher(**cfg)
            if kind == "bernoulli_rademacher":
                return cls.bernoulli_rademacher(**cfg)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for prior {kind!r}: {exc}") from None
        raise ConfigError(f"unknown prior kind {kind!r}")

    # derived ------------------------------------------------------------

    @property
    def is_discrete(self) -> bool:
        return self.kind != GAUSSIAN

    @property
    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and their masses, zero-mass atoms dropped."""
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        keep = p > 0
        return v[keep], p[keep]

    @property
    def m_s(self) -> float:
        return moments(self)[0]

    @property
    def rho_s(self) -> float:
        return moments(self)[1]

    @property
    def prior_variance(self) -> float:
        m, rho = moments(self)
        return max(rho - m * m, 0.0)


def moments(prior: Prior) -> tuple[float, float]:
    """First moment ``m_s`` and second moment ``rho_s``."""
    if prior.kind == GAUSSIAN:
        return prior.mean, prior.variance + prior.mean**2
    v, p = prior.atoms
    return float(p @ v), float(p @ (v * v))


def _check_snr(r_s: float) -> float:
    r_s = float(r_s)
    if not r_s >= 0.0:
        raise InvalidArgumentError(f"snr must be nonnegative, got {r_s}")
    return r_s


def scalar_mi(prior: Prior, r_s: float, rule: QuadratureRule | None = None) -> float:
    """``I(S; sqrt(r_s) S + Z)`` in nats.

    Gaussian priors use the closed form.  Discrete priors sum exactly over
    both the true and the candidate atoms and integrate ``Z`` with
    kink-refined panels; ``rule`` is accepted for interface symmetry.
    """
    r_s = _check_snr(r_s)
    if r_s == 0.0:
        return 0.0
    if prior.kind == GAUSSIAN:
        return 0.5 * math.log1p(r_s * prior.variance)
    v, p = prior.atoms
    mi, _ = discrete_channel(v, p[None, :], r_s, want_var=False)
    return float(mi[0])


def scalar_mmse(prior: Prior, r_s: float, rule: QuadratureRule | None = None) -> float:
    """``E (S - E[S | sqrt(r_s) S + Z])^2``, twice the derivative of :func:`scalar_mi`."""
    r_s = _check_snr(r_s)
    if prior.kind == GAUSSIAN:
        return prior.variance / (1.0 + r_s * prior.variance)
    if r_s == 0.0:
        return prior.prior_variance
    v, p = prior.atoms
    _, var = discrete_channel(v, p[None, :], r_s, want_mi=False)
    return float(min(max(var[0], 0.0), prior.prior_variance))


class RsSolution(NamedTuple):
    r_s: float
    saturated: bool


def solve_rs(prior: Prior, q_s: float, rule: QuadratureRule | None = None,
             r_cap: float = R_CAP) -> RsSolution:
    """Maximiser over ``r_s >= 0`` of ``I(r_s) - r_s (rho_s - q_s) / 2`` up to sign.

    The objective ``r_s (rho_s - q_s) / 2 - I(r_s)`` is convex, so its
    minimiser solves ``scalar_mmse(r_s) = rho_s - q_s`` when that has a root
    and sits at ``r_s = 0`` when ``q_s <= m_s^2`` (there the MMSE at zero
    SNR already falls short of the target).  Targets below
    ``scalar_mmse(r_cap)`` return ``r_cap`` with ``saturated=True``.
    """
    if not r_cap > 0:
        raise InvalidArgumentError("r_cap must be positive")
    m, rho = moments(prior)
    q_s = float(q_s)
    if not -1e-12 <= q_s <= rho * (1 + 1e-12) + 1e-15:
        raise InvalidArgumentError(f"q_s must lie in [0, {rho}], got {q_s}")
    target = rho - q_s
    var0 = prior.prior_variance
    if target >= var0:
        return RsSolution(0.0, False)
    if prior.kind == GAUSSIAN:
        if target <= 0.0:
            return RsSolution(float(r_cap), True)
        r = 1.0 / target - 1.0 / prior.variance
        return RsSolution(r, False) if r <= r_cap else RsSolution(float(r_cap), True)
    if target <= scalar_mmse(prior, r_cap):
        return RsSolution(float(r_cap), True)
    # bracket geometrically before the final root solve to keep it short
    hi = 1.0
    while hi < r_cap and scalar_mmse(prior, hi) > target:
        hi = min(hi * 4.0, r_cap)
    lo = 0.0 if hi <= 1.0 else hi / 4.0
    r = brentq(lambda x: scalar_mmse(prior, x) - target, lo, hi, xtol=1e-10, rtol=1e-14, maxiter=200)
    return RsSolution(float(r), False)
