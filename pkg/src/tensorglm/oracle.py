"""Finite-size ground truth by exact posterior enumeration.

An instance draws ``W`` (n x p standard normal), ``S`` from a finite-support
prior, ``X = phi(W S / sqrt(p))`` and, for every ordered tuple
``i_1 <= ... <= i_r``,

    Y_i = sqrt(lam) n^(-(r-1)/2) X_i1 ... X_ir + Z_i.

Because ``S`` has finitely many values, the posterior over all ``K^p``
latent configurations is computed exactly with a log-sum-exp.  Monte-Carlo
averages over independent instances then estimate the normalised mutual
information ``I(X; Y | W) / n`` and the tensor MMSE.

Random streams
--------------
Every draw comes from ``numpy.random.Philox`` with a two-word key
``(seed XOR k, tag)``: ``k`` indexes the instance and ``tag`` separates
purposes, so results never depend on scheduling.  The draw order inside an
instance is fixed (``W``, then ``S``, then ``Z``) and does not involve
``lam``, so estimates at different ``lam`` share their randomness.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import NamedTuple

import numpy as np

from .activation import Activation
from .errors import InvalidArgumentError, UnsupportedPriorError, UnsupportedSizeError
from .potential import ModelParams
from .prior import Prior

MAX_CONFIGS = 2**20
MAX_P = 20
MAX_N = 64
MI_SAMPLES = 2000
MMSE_SAMPLES = 500

_MASK64 = (1 << 64) - 1
#: stream tags
TAG_INSTANCE = 0
TAG_IMMSE_MMSE = 1
#: entries of the (configs x n^(r-1)) work arrays held at once
_CHUNK_ENTRIES = 12_000_000


def generator(seed: int, k: int = 0, tag: int = TAG_INSTANCE) -> np.random.Generator:
    """Philox generator for instance ``k`` of stream ``tag``."""
    return np.random.Generator(np.random.Philox(key=[(int(seed) ^ int(k)) & _MASK64, int(tag) & _MASK64]))


@lru_cache(maxsize=64)
def index_tuples(n: int, rank: int) -> np.ndarray:
    """Ordered tuples ``i_1 <= ... <= i_r`` as an ``(M, r)`` array."""
    t = np.array(list(combinations_with_replacement(range(n), rank)), dtype=np.int64).reshape(-1, rank)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=64)
def multiplicities(n: int, rank: int) -> np.ndarray:
    """Number of index permutations represented by each ordered tuple."""
    t = index_tuples(n, rank)
    out = np.empty(len(t))
    for i, row in enumerate(t):
        _, counts = np.unique(row, return_counts=True)
        out[i] = math.factorial(rank) / np.prod([math.factorial(c) for c in counts])
    out.setflags(write=False)
    return out


def _atoms(prior: Prior):
    if not prior.is_discrete:
        raise UnsupportedPriorError("exact enumeration needs a finite-support prior")
    return prior.atoms


def _check_size(prior: Prior, n: int, p: int):
    if not (isinstance(n, (int, np.integer)) and isinstance(p, (int, np.integer))) or n < 1 or p < 1:
        raise InvalidArgumentError("n and p must be positive integers")
    if p > MAX_P or n > MAX_N:
        raise UnsupportedSizeError(f"n <= {MAX_N} and p <= {MAX_P} required, got n={n}, p={p}")
    values, _ = _atoms(prior)
    if len(values) ** p > MAX_CONFIGS:
        raise UnsupportedSizeError(f"{len(values)}^{p} configurations exceed {MAX_CONFIGS}")


@lru_cache(maxsize=16)
def _configs(prior: Prior, p: int):
    """All latent configurations and their log prior masses."""
    values, probs = _atoms(prior)
    K = len(values)
    idx = np.array(np.unravel_index(np.arange(K**p), (K,) * p)).T
    return values[idx], np.log(probs)[idx].sum(axis=1)


@dataclass(frozen=True, eq=False)
class Instance:
    n: int
    p: int
    rank: int
    lam: float
    seed: int
    W: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)

    @property
    def tuples(self) -> np.ndarray:
        return index_tuples(self.n, self.rank)

    def to_json(self, full: bool = False) -> str:
        """Seed and dimensions regenerate the instance; ``full`` adds arrays."""
        blob = {"n": self.n, "p": self.p, "rank": self.rank, "lambda": self.lam, "seed": self.seed}
        if full:
            blob.update(W=self.W.tolist(), S=self.S.tolist(), X=self.X.tolist(), Y=self.Y.tolist())
        return json.dumps(blob, sort_keys=True)


def _scale(lam: float, n: int, rank: int) -> float:
    return math.sqrt(lam) * n ** (-(rank - 1) / 2.0)


def _products(X: np.ndarray, tuples: np.ndarray) -> np.ndarray:
    out = X[..., tuples[:, 0]].copy()
    for j in range(1, tuples.shape[1]):
        out *= X[..., tuples[:, j]]
    return out


def _draw(params: ModelParams, n: int, p: int, rng: np.random.Generator):
    values, probs = _atoms(params.prior)
    W = rng.standard_normal((n, p))
    S = values[np.minimum(np.searchsorted(np.cumsum(probs), rng.random(p), side="right"), len(values) - 1)]
    X = params.activation(W @ S / math.sqrt(p))
    Z = rng.standard_normal(len(index_tuples(n, params.rank)))
    return W, S, X, Z


def _signal(params: ModelParams, lam: float | None) -> float:
    """``lam`` overrides ``params.lam`` and may be zero (pure noise)."""
    if lam is None:
        return params.lam
    lam = float(lam)
    if not (lam >= 0 and math.isfinite(lam)):
        raise InvalidArgumentError(f"lambda must be finite and >= 0, got {lam}")
    return lam


def sample_instance(params: ModelParams, n: int, p: int, seed: int, *, k: int = 0,
                    tag: int = TAG_INSTANCE, lam: float | None = None) -> Instance:
    """Draw one instance; identical arguments give bit-identical arrays."""
    _check_size(params.prior, n, p)
    lam = _signal(params, lam)
    W, S, X, Z = _draw(params, n, p, generator(seed, k, tag))
    T = _products(X, index_tuples(n, params.rank))
    Y = _scale(lam, n, params.rank) * T + Z
    return Instance(n, p, params.rank, lam, int(seed), W, S, X, Z, Y)


@lru_cache(maxsize=64)
def _flat_index(n: int, rank: int) -> np.ndarray:
    """Position of each ordered tuple in a C-ordered ``n^r`` array."""
    return np.ravel_multi_index(tuple(index_tuples(n, rank).T), (n,) * rank)


def _dense(vals: np.ndarray, n: int, rank: int) -> np.ndarray:
    """Ordered-tuple values laid into an ``(n, n^(r-1))`` array, zeros elsewhere."""
    D = np.zeros(n**rank)
    D[_flat_index(n, rank)] = vals
    return D.reshape(n, -1)


def _kron_rows(X: np.ndarray, m: int) -> np.ndarray:
    """Row-wise Kronecker power ``(C, n) -> (C, n^m)``."""
    out = X
    for _ in range(m - 1):
        out = (out[:, :, None] * X[:, None, :]).reshape(len(X), -1)
    return out


class _Posterior(NamedTuple):
    log_norm: float
    log_lik_true: float
    mean_products: np.ndarray | None


def _posterior(params, W, X, Ys, lams, want_mean):
    """Exact posterior summaries for one ``(W, X)`` and several ``(Y, lam)`` pairs.

    For a configuration with spike ``x`` the log-likelihood is, up to a
    constant, ``scale <Y, T(x)> - scale^2 |T(x)|^2 / 2`` with ``T(x)`` the
    ordered-tuple products.  Both inner products are contractions of a dense
    tensor supported on ordered tuples, done with one matrix product per
    chunk of configurations.
    """
    n, p = W.shape
    rank = params.rank
    tuples = index_tuples(n, rank)
    S_all, log_prior = _configs(params.prior, p)
    C = len(S_all)
    T_true = _products(X, tuples)
    width = n ** (rank - 1)
    chunk = max(1, _CHUNK_ENTRIES // width)
    scales = [_scale(lam, n, rank) for lam in lams]
    mask = _dense(np.ones(len(tuples)), n, rank)
    Yd = [_dense(Y, n, rank) for Y in Ys]
    lin = np.empty((len(Ys), C))
    quad = np.empty(C)
    for a in range(0, C, chunk):
        Xc = params.activation(S_all[a:a + chunk] @ W.T / math.sqrt(p))
        K = _kron_rows(Xc, rank - 1)
        quad[a:a + chunk] = np.einsum("ck,ck->c", (Xc * Xc) @ mask, K * K)
        for j, D in enumerate(Yd):
            lin[j, a:a + chunk] = np.einsum("ck,ck->c", Xc @ D, K)
    out = []
    for j, Y in enumerate(Ys):
        sc = scales[j]
        expo = log_prior + sc * lin[j] - 0.5 * sc * sc * quad
        top = expo.max()
        w = np.exp(expo - top)
        total = w.sum()
        true_ll = sc * float(T_true @ Y) - 0.5 * sc * sc * float(T_true @ T_true)
        mean = None
        if want_mean:
            w /= total
            acc = np.zeros((n, width))
            for a in range(0, C, chunk):
                Xc = params.activation(S_all[a:a + chunk] @ W.T / math.sqrt(p))
                acc += (w[a:a + chunk, None] * Xc).T @ _kron_rows(Xc, rank - 1)
            mean = acc.ravel()[_flat_index(n, rank)]
        out.append(_Posterior(top + math.log(total), true_ll, mean))
    return out, T_true


def log_posterior(params: ModelParams, inst: Instance) -> np.ndarray:
    """Unnormalised log posterior of every latent configuration."""
    S_all, log_prior = _configs(params.prior, inst.p)
    Xc = params.activation(S_all @ inst.W.T / math.sqrt(inst.p))
    Tc = _products(Xc, inst.tuples)
    sc = _scale(inst.lam, inst.n, inst.rank)
    return log_prior + sc * (Tc @ inst.Y) - 0.5 * sc * sc * np.einsum("cm,cm->c", Tc, Tc)


def posterior_weights(params: ModelParams, inst: Instance) -> np.ndarray:
    """Normalised posterior over every latent configuration."""
    expo = log_posterior(params, inst)
    w = np.exp(expo - expo.max())
    return w / w.sum()


def instance_mi(params: ModelParams, inst: Instance) -> float:
    """``[ln p(Y | X) - ln p(Y)] / n`` for one instance."""
    (post,), _ = _posterior(params, inst.W, inst.X, [inst.Y], [inst.lam], False)
    return (post.log_lik_true - post.log_norm) / inst.n


def instance_sq_errors(params: ModelParams, inst: Instance) -> tuple[float, float]:
    """Tensor squared error of the posterior mean.

    Returns ``(full, index_set)``: the first sums over all ``n^r`` entries of
    the symmetric tensor, the second over ordered tuples only; both are
    divided by ``n^r``.
    """
    (post,), T_true = _posterior(params, inst.W, inst.X, [inst.Y], [inst.lam], True)
    err = (T_true - post.mean_products) ** 2
    nr = float(inst.n) ** inst.rank
    return float(multiplicities(inst.n, inst.rank) @ err) / nr, float(err.sum()) / nr


class Estimate(NamedTuple):
    estimate: float
    standard_error: float


def _mean_se(x) -> Estimate:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return Estimate(float(x.mean()), math.nan)
    return Estimate(float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)))


def _check_samples(n_samples):
    if not isinstance(n_samples, (int, np.integer)) or n_samples < 1:
        raise InvalidArgumentError("n_samples must be a positive integer")


def _stream(params, n, p, n_samples, seed, tag, lams, want_mean):
    """Per-instance posterior summaries at each ``lam`` with shared randomness.

    ``want_mean`` is a bool or the number of leading instances that also
    get the posterior mean.
    """
    _check_size(params.prior, n, p)
    _check_samples(n_samples)
    tuples = index_tuples(n, params.rank)
    for k in range(n_samples):
        W, S, X, Z = _draw(params, n, p, generator(seed, k, tag))
        T = _products(X, tuples)
        Ys = [_scale(lam, n, params.rank) * T + Z for lam in lams]
        yield _posterior(params, W, X, Ys, lams, bool(want_mean is True or k < want_mean))


def mc_mutual_information(params: ModelParams, n: int, p: int, n_samples: int = MI_SAMPLES,
                          seed: int = 0, *, lam: float | None = None) -> Estimate:
    """Monte-Carlo ``I(X; Y | W) / n`` with its standard error."""
    lams = [_signal(params, lam)]
    vals = [(post.log_lik_true - post.log_norm) / n
            for (post,), _ in _stream(params, n, p, n_samples, seed, TAG_INSTANCE, lams, False)]
    return _mean_se(vals)


def _mmse_samples(params, n, p, n_samples, seed, tag, lam):
    mult = multiplicities(n, params.rank)
    nr = float(n) ** params.rank
    full, index = [], []
    for (post,), T_true in _stream(params, n, p, n_samples, seed, tag, [lam], True):
        err = (T_true - post.mean_products) ** 2
        full.append(float(mult @ err) / nr)
        index.append(float(err.sum()) / nr)
    return full, index


def mc_tensor_mmse(params: ModelParams, n: int, p: int, n_samples: int = MMSE_SAMPLES,
                   seed: int = 0, *, lam: float | None = None) -> Estimate:
    """Monte-Carlo ``E ||X^(r) - E[X^(r) | Y, W]||^2 / n^r`` over the full tensor."""
    full, _ = _mmse_samples(params, n, p, n_samples, seed, TAG_INSTANCE, _signal(params, lam))
    return _mean_se(full)


def mc_estimates(params: ModelParams, n: int, p: int, n_samples: int = MI_SAMPLES,
                 mmse_samples: int | None = MMSE_SAMPLES, seed: int = 0, *,
                 lam: float | None = None) -> tuple[Estimate, Estimate]:
    """MI and full-tensor MMSE from one pass over the instance stream.

    The MMSE uses the first ``mmse_samples`` instances (all of them when
    ``None``), so the pair equals :func:`mc_mutual_information` and
    :func:`mc_tensor_mmse` called with the same seed.
    """
    m = n_samples if mmse_samples is None else mmse_samples
    _check_samples(m)
    mult = multiplicities(n, params.rank)
    nr = float(n) ** params.rank
    mi, full = [], []
    lams = [_signal(params, lam)]
    for (post,), T_true in _stream(params, n, p, max(n_samples, m), seed, TAG_INSTANCE, lams, m):
        if len(mi) < n_samples:
            mi.append((post.log_lik_true - post.log_norm) / n)
        if post.mean_products is not None:
            full.append(float(mult @ (T_true - post.mean_products) ** 2) / nr)
    return _mean_se(mi), _mean_se(full)


@dataclass(frozen=True)
class ImmseReport:
    lam_lo: float
    lam_hi: float
    one_sided: bool
    derivative: float
    derivative_se: float
    mmse: float
    mmse_se: float
    predicted: float
    predicted_se: float
    predicted_index_set: float
    combined_se: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def immse_check(params: ModelParams, n: int, p: int, n_samples: int = MI_SAMPLES,
                dlambda: float = 0.5, seed: int = 0, mmse_samples: int | None = None, *,
                lam: float | None = None) -> ImmseReport:
    """Compare ``d(I/n)/dlam`` with ``MMSE / (2 r!)``.

    The derivative is a difference of the MI at ``lam -+ dlam/2`` computed on
    the same instances, so its standard error is that of the paired
    differences.  The MMSE at the midpoint uses a separate stream.  At
    ``lam < dlam/2`` a one-sided difference on ``[lam, lam + dlam]`` is used.
    The check passes within three combined standard errors plus ``2/n``.
    """
    if not dlambda > 0:
        raise InvalidArgumentError("dlambda must be positive")
    lam = _signal(params, lam)
    one_sided = lam - dlambda / 2 < 0
    lo, hi = (lam, lam + dlambda) if one_sided else (lam - dlambda / 2, lam + dlambda / 2)
    diffs = []
    for (a, b), _ in _stream(params, n, p, n_samples, seed, TAG_INSTANCE, [lo, hi], False):
        diffs.append(((b.log_lik_true - b.log_norm) - (a.log_lik_true - a.log_norm)) / (n * (hi - lo)))
    d = _mean_se(diffs)
    mid = params.with_(lam=0.5 * (lo + hi))
    full, index = _mmse_samples(mid, n, p, mmse_samples or MMSE_SAMPLES, seed, TAG_IMMSE_MMSE, mid.lam)
    m = _mean_se(full)
    div = 2.0 * math.factorial(params.rank)
    pred, pred_se = m.estimate / div, m.standard_error / div
    comb = math.sqrt(d.standard_error**2 + pred_se**2)
    slack = 3.0 * comb + 2.0 / n
    return ImmseReport(lo, hi, one_sided, d.estimate, d.standard_error, m.estimate, m.standard_error,
                       pred, pred_se, float(np.mean(index)) / 2.0, comb, slack,
                       bool(abs(d.estimate - pred) <= slack))
