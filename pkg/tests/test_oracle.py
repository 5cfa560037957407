import json
import math

import numpy as np
import pytest

import _oracles
from tensorglm import oracle
from tensorglm.activation import Activation
from tensorglm.errors import InvalidArgumentError, UnsupportedPriorError, UnsupportedSizeError
from tensorglm.oracle import (Instance, immse_check, instance_mi, instance_sq_errors, mc_estimates,
                              mc_mutual_information, mc_tensor_mmse, posterior_weights, sample_instance)
from tensorglm.potential import ModelParams
from tensorglm.prior import Prior

SIGN, LIN, DZ = Activation.sign(), Activation.linear(), Activation.sign_deadzone(0.5)
RAD = Prior.rademacher()


def test_tiny_instance():
    params = ModelParams(2.0, 2.0, RAD, LIN)
    inst = sample_instance(params, 2, 1, seed=3)
    assert np.array_equal(np.abs(inst.X), np.abs(inst.W[:, 0]))
    assert len(posterior_weights(params, inst)) == 2
    assert inst.Y.shape == (4,) and inst.tuples.tolist() == [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]]


def test_config_count():
    params = ModelParams(2.0, 2.0, Prior.two_point(1.0, -1.0, 0.6), SIGN)
    inst = sample_instance(params, 12, 6, seed=0)
    assert len(posterior_weights(params, inst)) == 64


def test_scale_and_noise():
    params = ModelParams(3.0, 1.0, RAD, SIGN, rank=4)
    inst = sample_instance(params, 5, 3, seed=11)
    T = oracle._products(inst.X, inst.tuples)
    assert np.allclose(inst.Y, math.sqrt(3.0) * 5 ** -1.5 * T + inst.Z, rtol=0, atol=1e-15)
    assert np.array_equal(inst.X, SIGN(inst.W @ inst.S / math.sqrt(3)))


def test_determinism_and_streams():
    params = ModelParams(4.0, 1.0, RAD, SIGN)
    a, b = sample_instance(params, 6, 3, seed=42), sample_instance(params, 6, 3, seed=42)
    for f in ("W", "S", "X", "Z", "Y"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = sample_instance(params, 6, 3, seed=42, k=1)
    assert not np.array_equal(a.W, c.W)
    # lambda does not enter the draw order
    d = sample_instance(params.with_(lam=9.0), 6, 3, seed=42)
    assert np.array_equal(a.Z, d.Z) and np.array_equal(a.W, d.W)


def test_to_json_regenerates():
    params = ModelParams(4.0, 1.0, RAD, SIGN)
    inst = sample_instance(params, 5, 3, seed=7)
    blob = json.loads(inst.to_json())
    again = sample_instance(params.with_(lam=blob["lambda"]), blob["n"], blob["p"], blob["seed"])
    assert np.array_equal(again.Y, inst.Y)
    full = json.loads(inst.to_json(full=True))
    assert np.array_equal(np.array(full["Y"]), inst.Y)


def test_errors():
    with pytest.raises(UnsupportedPriorError):
        sample_instance(ModelParams(1.0, 1.0), 4, 2, seed=0)
    with pytest.raises(UnsupportedSizeError):
        mc_mutual_information(ModelParams(1.0, 1.0, RAD), 4, 21, 2)
    with pytest.raises(UnsupportedSizeError):
        mc_mutual_information(ModelParams(1.0, 1.0, RAD), 65, 2, 2)
    with pytest.raises(UnsupportedSizeError):
        mc_mutual_information(ModelParams(1.0, 1.0, Prior.bernoulli_rademacher(0.5)), 4, 13, 2)
    with pytest.raises(InvalidArgumentError):
        mc_mutual_information(ModelParams(1.0, 1.0, RAD), 4, 2, 0)
    with pytest.raises(InvalidArgumentError):
        mc_mutual_information(ModelParams(1.0, 1.0, RAD), 4, 2, 2, lam=-1.0)
    with pytest.raises(InvalidArgumentError):
        immse_check(ModelParams(1.0, 1.0, RAD), 4, 2, 2, dlambda=0.0)


@pytest.mark.parametrize("rank,act,prior", [
    (2, DZ, Prior.bernoulli_rademacher(0.4)),
    (3, SIGN, Prior.two_point(1.0, -1.0, 0.6)),
    (3, LIN, RAD),
    (4, LIN, Prior.two_point(2.0, -0.5, 0.3)),
], ids=["r2-dz", "r3-sign", "r3-lin", "r4-lin"])
def test_against_brute_force(rank, act, prior):
    params = ModelParams(6.0, 1.0, prior, act, rank=rank)
    values, probs = prior.atoms
    for seed in (0, 1):
        inst = sample_instance(params, 4, 3, seed=seed)
        mi, full, index = _oracles.brute_posterior(values, probs, inst.W, inst.X, inst.Y, inst.lam, rank, act)
        assert abs(instance_mi(params, inst) - mi) < 1e-10
        got_full, got_index = instance_sq_errors(params, inst)
        assert abs(got_full - full) < 1e-12 and abs(got_index - index) < 1e-12


def test_chunking_does_not_change_results(monkeypatch):
    params = ModelParams(5.0, 1.0, RAD, SIGN)
    inst = sample_instance(params, 6, 5, seed=2)
    ref = instance_mi(params, inst), instance_sq_errors(params, inst)
    monkeypatch.setattr(oracle, "_CHUNK_ENTRIES", 7)
    got = instance_mi(params, inst), instance_sq_errors(params, inst)
    assert abs(got[0] - ref[0]) < 1e-12 and max(abs(a - b) for a, b in zip(got[1], ref[1])) < 1e-12


def test_weights_normalised():
    for lam in (1e-3, 5.0, 1e4):
        params = ModelParams(lam, 1.0, Prior.bernoulli_rademacher(0.3), DZ)
        w = posterior_weights(params, sample_instance(params, 8, 6, seed=5))
        assert np.all(w >= 0) and abs(w.sum() - 1.0) < 1e-12


def test_zero_signal():
    params = ModelParams(1.0, 1.0, RAD, SIGN)
    mi = mc_mutual_information(params, 6, 4, 300, lam=0.0)
    assert abs(mi.estimate) <= 3 * mi.standard_error + 1e-12
    # at lam = 0 the posterior is the prior: the MMSE is the conditional prior variance
    est = mc_tensor_mmse(params, 6, 4, 200, lam=0.0)
    S_all, log_prior = oracle._configs(RAD, 4)
    tuples, mult = oracle.index_tuples(6, 3), oracle.multiplicities(6, 3)
    var = []
    for k in range(200):
        inst = sample_instance(params, 6, 4, seed=0, k=k, lam=0.0)
        Tc = oracle._products(SIGN(S_all @ inst.W.T / 2.0), tuples)
        pi = np.exp(log_prior)
        mean = pi @ Tc
        var.append(float(pi @ (Tc**2 @ mult) - mult @ mean**2) / 216)
    assert abs(est.estimate - np.mean(var)) <= 3 * est.standard_error


def test_perfect_recovery_ceiling():
    params = ModelParams(1e4, 2.0, RAD, LIN)
    mi = mc_mutual_information(params, 8, 4, 100)
    assert abs(mi.estimate - 4 * math.log(2) / 8) < 0.02
    assert mc_tensor_mmse(params, 8, 4, 50).estimate < 1e-6


def test_mi_monotone_in_lambda():
    base = ModelParams(1.0, 2.0, RAD, SIGN)
    ests = [mc_mutual_information(base, 8, 4, 200, lam=l) for l in (2.0, 6.0, 12.0)]
    for a, b in zip(ests, ests[1:]):
        assert b.estimate >= a.estimate - 3 * math.hypot(a.standard_error, b.standard_error)
    assert ests[0].estimate >= -3 * ests[0].standard_error


def test_combined_pass_matches_separate_calls():
    params = ModelParams(5.0, 2.0, RAD, SIGN)
    mi, mmse = mc_estimates(params, 6, 3, 40, 15, seed=9)
    assert mi == mc_mutual_information(params, 6, 3, 40, seed=9)
    assert mmse == mc_tensor_mmse(params, 6, 3, 15, seed=9)


def test_exchangeability():
    params = ModelParams(5.0, 2.0, RAD, SIGN)
    inst = sample_instance(params, 6, 4, seed=13)
    perm = np.array([3, 0, 5, 1, 4, 2])
    pos = {tuple(t): m for m, t in enumerate(inst.tuples.tolist())}
    # Y entry for tuple t of the permuted problem is the original entry at perm(t)
    src = [pos[tuple(sorted(perm[list(t)]))] for t in inst.tuples.tolist()]
    permuted = Instance(6, 4, 3, inst.lam, inst.seed, inst.W[perm], inst.S, inst.X[perm], inst.Z[src], inst.Y[src])
    assert abs(instance_mi(params, permuted) - instance_mi(params, inst)) < 1e-12
    assert max(abs(a - b) for a, b in zip(instance_sq_errors(params, permuted), instance_sq_errors(params, inst))) < 1e-12


def test_immse_small():
    params = ModelParams(5.0, 2.0, RAD, LIN)
    rep = immse_check(params, 8, 4, 200, dlambda=0.5, mmse_samples=100)
    assert not rep.one_sided and (rep.lam_lo, rep.lam_hi) == (4.75, 5.25)
    assert rep.predicted == pytest.approx(rep.mmse / 12)
    assert rep.slack == pytest.approx(3 * rep.combined_se + 2 / 8)
    assert rep.passed
    d = rep.to_dict()
    assert d["passed"] is True and set(d) >= {"derivative", "mmse", "predicted", "combined_se"}


def test_immse_one_sided_and_rank2():
    params = ModelParams(0.1, 2.0, RAD, SIGN, rank=2)
    rep = immse_check(params, 6, 3, 100, dlambda=0.5, mmse_samples=50)
    assert rep.one_sided and (rep.lam_lo, rep.lam_hi) == (0.1, 0.6)
    assert rep.predicted == pytest.approx(rep.mmse / 4)
    edge = immse_check(params, 6, 3, 50, dlambda=0.5, mmse_samples=20, lam=0.0)
    assert edge.one_sided and (edge.lam_lo, edge.lam_hi) == (0.0, 0.5)
