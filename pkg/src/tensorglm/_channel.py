"""Gaussian channel with a finite input alphabet.

Input ``L`` takes value ``levels[..., k]`` with probability ``probs[..., k]``
and is observed as ``sqrt(snr) * L + Z``.  Writing ``D = l_j - l_k`` for a
true level ``j`` and a candidate ``k``,

    I = -E_j E_Z ln sum_k p_k exp(-snr D^2 / 2 - sqrt(snr) D Z)

and the posterior variance ``E (L - <l>)^2`` uses the same softmax weights.
The log-sum-exp is smooth but switches between its linear pieces over a
width ``1 / (sqrt(snr) |l_k - l_k'|)``; the Z-rule is refined around each
switch so accuracy holds at high SNR.
"""

from __future__ import annotations

import numpy as np

from .quadrature import panel_rule, refined_edges

#: refine the Z-rule once a switch is narrower than this
_REFINE_BELOW = 1.0
_PANEL_ORDER = 5
_REACH = 6.0


def _kink_rule(log_p: np.ndarray, levels: np.ndarray, snr: float):
    """Per-(context, true level) panel rule; arrays shaped ``(C, K, nZ)``.

    Only valid for a level set shared by all contexts.
    """
    C, K = log_p.shape
    iu = np.triu_indices(K, 1)
    pair_gap = np.abs(levels[iu[0]] - levels[iu[1]])
    sr = np.sqrt(snr)
    widths = np.full(pair_gap.shape, np.inf)
    nz = pair_gap > 0
    widths[nz] = 1.0 / (sr * pair_gap[nz])
    refine = widths < _REFINE_BELOW
    if not refine.any():
        return panel_rule(refined_edges(np.zeros((C, K, 0)), np.zeros(0)), _PANEL_ORDER)
    k1, k2 = iu[0][refine], iu[1][refine]
    # line k: a_k + b_k Z with a_k = ln p_k - snr D_jk^2 / 2 and b_k = -sqrt(snr) D_jk
    delta = levels[:, None] - levels[None, :]
    a = log_p[:, None, :] - 0.5 * snr * delta[None, :, :] ** 2
    b = -sr * delta
    with np.errstate(invalid="ignore", divide="ignore"):
        centers = (a[..., k2] - a[..., k1]) / (b[None, :, k1] - b[None, :, k2])
    centers = np.nan_to_num(centers, nan=-1e3, posinf=1e3, neginf=-1e3)
    return panel_rule(refined_edges(centers, widths[refine], reach=_REACH), _PANEL_ORDER)


def uniform_rule(snr: float, spread: float):
    """Uniform panel rule fine enough for every switch when levels span ``spread``."""
    width = 1.0
    if snr > 0 and spread > 0:
        width = min(1.0, 1.0 / (np.sqrt(snr) * spread))
    n_panels = int(np.ceil(18.0 / width))
    return panel_rule(np.linspace(-9.0, 9.0, n_panels + 1), _PANEL_ORDER)


def discrete_channel(levels, probs, snr: float, *, want_mi=True, want_var=True, z_rule=None):
    """Mutual information and posterior variance for each context.

    Parameters
    ----------
    levels : array (K,) or (C, K)
    probs : array (C, K)
        Input distribution per context; rows sum to one, zeros allowed.
    snr : float
    z_rule : optional ``(nodes, weights)``
        Overrides the kink-refined rule; required when levels vary by context.

    Returns
    -------
    mi, post_var : arrays (C,), ``None`` for quantities not requested.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    C, K = probs.shape
    levels = np.asarray(levels, dtype=float)
    lev = np.broadcast_to(levels, (C, K))
    if snr <= 0.0 or K == 1:
        var = np.sum(probs * lev**2, axis=1) - np.sum(probs * lev, axis=1) ** 2
        return (np.zeros(C) if want_mi else None), (np.maximum(var, 0.0) if want_var else None)
    with np.errstate(divide="ignore"):
        log_p = np.log(probs)
    if z_rule is None:
        if levels.ndim != 1:
            raise ValueError("context-dependent levels need an explicit z_rule")
        z, wz = _kink_rule(log_p, levels, snr)
        if K == 2:
            return _binary(levels, probs, log_p, snr, z, wz, want_mi, want_var)
    else:
        z, wz = z_rule
        z = np.broadcast_to(z, (C, K, np.shape(z)[-1]))
        wz = np.broadcast_to(wz, z.shape)
    sr = np.sqrt(snr)
    delta = lev[:, :, None] - lev[:, None, :]  # (C, j, k)
    expo = (
        log_p[:, None, None, :]
        - 0.5 * snr * delta[:, :, None, :] ** 2
        - sr * delta[:, :, None, :] * z[..., None]
    )  # (C, j, nZ, k)
    top = expo.max(axis=-1)
    shifted = np.exp(expo - top[..., None])
    total = shifted.sum(axis=-1)
    mi = var = None
    if want_mi:
        lse = top + np.log(total)
        per_j = -np.sum(wz * lse, axis=-1)
        mi = np.maximum(np.sum(np.where(probs > 0, probs * per_j, 0.0), axis=1), 0.0)
    if want_var:
        mean = np.einsum("cjzk,ck->cjz", shifted, lev) / total
        err2 = (lev[:, :, None] - mean) ** 2
        per_j = np.sum(wz * err2, axis=-1)
        var = np.sum(np.where(probs > 0, probs * per_j, 0.0), axis=1)
    return mi, var


def _binary(levels, probs, log_p, snr, z, wz, want_mi, want_var):
    """Two-level case: the log-sum-exp is a softplus of one log-odds line."""
    gap = levels[0] - levels[1]
    sr = np.sqrt(snr)
    with np.errstate(invalid="ignore"):
        odds = log_p[:, 1] - log_p[:, 0]
    odds = np.nan_to_num(odds, nan=0.0)
    # log-odds of the wrong level given the true one, per true level j
    x0 = odds[:, None] - 0.5 * snr * gap**2 - sr * gap * z[:, 0, :]
    x1 = -odds[:, None] - 0.5 * snr * gap**2 + sr * gap * z[:, 1, :]
    live = probs > 0
    mi = var = None
    if want_mi:
        with np.errstate(invalid="ignore"):
            ent = -np.sum(np.where(live, probs * log_p, 0.0), axis=1)
        sp0 = np.sum(wz[:, 0, :] * np.logaddexp(0.0, x0), axis=1)
        sp1 = np.sum(wz[:, 1, :] * np.logaddexp(0.0, x1), axis=1)
        loss = np.where(live[:, 0], probs[:, 0] * sp0, 0.0) + np.where(live[:, 1], probs[:, 1] * sp1, 0.0)
        mi = np.maximum(ent - loss, 0.0)
    if want_var:
        e0 = np.sum(wz[:, 0, :] * (0.5 * (1.0 + np.tanh(0.5 * x0))) ** 2, axis=1)
        e1 = np.sum(wz[:, 1, :] * (0.5 * (1.0 + np.tanh(0.5 * x1))) ** 2, axis=1)
        var = gap**2 * (np.where(live[:, 0], probs[:, 0] * e0, 0.0) + np.where(live[:, 1], probs[:, 1] * e1, 0.0))
    return mi, var
