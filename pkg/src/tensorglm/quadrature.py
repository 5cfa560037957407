"""Gaussian expectations by quadrature.

Two families of rules live here.

* Probabilists' Gauss-Hermite rules, normalised so that
  ``sum(w * f(z)) ~ E[f(Z)]`` for ``Z ~ N(0, 1)``.  These are the default for
  smooth integrands.
* Composite Gauss-Legendre panel rules carrying the standard normal density
  in their weights.  Panel edges may be refined around known transition
  points, which is what the discrete-level channels need once the SNR makes
  their posteriors switch sharply.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgumentError, NumericDomainError

DEFAULT_ORDER = 41
MAX_ORDER = 256

#: half-width of the truncated real line used by panel rules
SPAN = 9.0

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights approximating ``E[f(Z)]`` for a standard normal ``Z``.

    Arrays are read-only; a rule is fully determined by its ``order``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        if self.nodes.shape != (self.order,) or self.weights.shape != (self.order,):
            raise InvalidArgumentError("nodes and weights must both have shape (order,)")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __hash__(self):
        return hash(("gauss_hermite", self.order))

    def __eq__(self, other):
        return isinstance(other, QuadratureRule) and other.order == self.order


@lru_cache(maxsize=None)
def gauss_hermite_rule(order: int = DEFAULT_ORDER) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule with weights summing to one.

    Parameters
    ----------
    order : int
        Number of nodes, ``1 <= order <= 256``.  The rule integrates
        polynomials of degree ``<= 2 * order - 1`` exactly.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise InvalidArgumentError(f"order must be an integer, got {order!r}")
    order = int(order)
    if not 1 <= order <= MAX_ORDER:
        raise InvalidArgumentError(f"order must lie in [1, {MAX_ORDER}], got {order}")
    x, w = hermegauss(order)
    # symmetrise explicitly so the node set equals its negation bit for bit
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    return QuadratureRule(nodes=x.astype(np.float64), weights=w.astype(np.float64), order=order)


def expect_gaussian(f: Callable[..., np.ndarray], rule: QuadratureRule, d: int = 1) -> float:
    """Tensor-product estimate of ``E[f(Z_1, ..., Z_d)]`` for iid standard normals.

    ``f`` is called once with ``d`` broadcastable node arrays and must return
    an array of matching shape (a scalar is broadcast).
    """
    if d not in (1, 2, 3):
        raise InvalidArgumentError(f"dimension must be 1, 2 or 3, got {d}")
    grids = np.meshgrid(*([rule.nodes] * d), indexing="ij")
    values = np.broadcast_to(np.asarray(f(*grids), dtype=float), grids[0].shape)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        node = tuple(float(rule.nodes[i]) for i in idx)
        raise NumericDomainError(f"integrand is not finite at node {node}", node=node)
    w = rule.weights
    if d == 1:
        return float(w @ values)
    if d == 2:
        return float(w @ values @ w)
    return float(np.einsum("i,j,k,ijk->", w, w, w, values))


@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges: np.ndarray, order: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule for ``int f(z) phi(z) dz`` over ``[edges[0], edges[-1]]``.

    ``edges`` has shape ``(..., m + 1)`` and must be sorted along its last
    axis; zero-width panels are allowed and contribute nothing.  Returns
    ``(nodes, weights)`` of shape ``(..., m * order)`` with the normal density
    folded into the weights.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(order)
    lo = edges[..., :-1, None]
    half = 0.5 * (edges[..., 1:, None] - lo)
    nodes = lo + half * (x + 1.0)
    weights = half * w * np.exp(-0.5 * nodes * nodes) * _INV_SQRT_2PI
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def refined_edges(
    centers: np.ndarray,
    widths: np.ndarray,
    *,
    span: float = SPAN,
    base_width: float = 1.0,
    reach: float = 8.0,
    per_width: int = 1,
) -> np.ndarray:
    """Panel edges on ``[-span, span]`` refined around transition points.

    Each center ``c`` with width ``s`` contributes edges ``c + s * k / per_width``
    for ``|k / per_width| <= reach``.  ``centers`` has shape ``(..., M)``;
    ``widths`` broadcasts against it.  Every row gets the same number of
    edges, so rows can be stacked; edges falling outside the span are clipped
    onto it and produce empty panels.
    """
    base = np.linspace(-span, span, int(round(2 * span / base_width)) + 1)
    centers = np.asarray(centers, dtype=float)
    if centers.shape[-1] == 0:
        return np.broadcast_to(base, centers.shape[:-1] + base.shape).copy()
    widths = np.broadcast_to(np.asarray(widths, dtype=float), centers.shape)
    steps = np.linspace(-reach, reach, int(round(2 * reach * per_width)) + 1)
    local = centers[..., None] + widths[..., None] * steps
    local = local.reshape(centers.shape[:-1] + (-1,))
    base = np.broadcast_to(base, centers.shape[:-1] + base.shape)
    edges = np.concatenate([base, np.clip(local, -span, span)], axis=-1)
    return np.sort(edges, axis=-1)

