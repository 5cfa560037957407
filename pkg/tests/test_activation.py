import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

import _oracles
from tensorglm.activation import Activation, output_mi, output_mi_both, output_mi_dq, output_mi_dr, rho_x
from tensorglm.errors import ConfigError, DerivativeSignWarning, InvalidArgumentError

SIGN = Activation.sign()
DZ = Activation.sign_deadzone(0.5)
LIN = Activation.linear()
TANH = Activation.custom(np.tanh, sup_norm=1.0, odd=True, name="tanh")
BUILTIN = [LIN, SIGN, DZ, Activation.sign_deadzone(0.0)]

# frozen from tests/_oracles.step_output_channel (nested adaptive quad)
SIGN_MI_2_05 = 0.3547185301172386
SIGN_DR_2_05 = 0.08555204672378564
DZ_MI_3_03 = 0.4218961463968417
DZ_DR_3_03 = 0.08901615572359312
# Sign at q=0: binary symmetric input; quad value, then Monte Carlo (1e7 draws)
SIGN_MI_1_0 = 0.33683082034683276
SIGN_MI_1_0_MC, SIGN_MI_1_0_SE = 0.3366984735, 0.000178
SIGN_DR_1_025 = 0.19702595154133973
# Richardson extrapolation of central differences of the quad oracle
SIGN_DQ_1_05 = -0.2418970074094806


def test_kinds_and_bounds():
    assert not LIN.bounded and math.isinf(LIN.sup_norm)
    assert SIGN.sup_norm == 1.0 and DZ.sup_norm == 1.0
    z = np.linspace(-3, 3, 61)
    np.testing.assert_array_equal(SIGN(-z), -SIGN(z))
    np.testing.assert_array_equal(DZ(-z), -DZ(z))
    nz = z[z != 0]
    np.testing.assert_array_equal(Activation.sign_deadzone(0.0)(nz), SIGN(nz))
    assert SIGN(0.0) == 0.0


def test_from_config():
    assert Activation.from_config({"kind": "sign"}) == SIGN
    assert Activation.from_config({"kind": "sign_deadzone", "epsilon": 0.5}) == DZ
    with pytest.raises(ConfigError):
        Activation.from_config({"kind": "relu"})
    with pytest.raises(ConfigError):
        Activation.from_config({"kind": "linear", "epsilon": 1})
    with pytest.raises(InvalidArgumentError):
        Activation.sign_deadzone(-1.0)


def test_rho_x():
    assert rho_x(LIN, 1.0) == 1.0
    assert rho_x(SIGN, 0.3) == 1.0
    for eps in (0.0, 0.5, 1.3):
        assert rho_x(Activation.sign_deadzone(eps), 1.0) == pytest.approx(2 * ndtr(-eps), abs=1e-15)
    assert rho_x(Activation.sign_deadzone(0.5), 4.0) == pytest.approx(2 * ndtr(-0.25), abs=1e-15)
    # tanh by quadrature against an independent integral
    from scipy import integrate
    ref = integrate.quad(lambda z: np.tanh(z) ** 2 * math.exp(-z * z / 2) / math.sqrt(2 * math.pi), -20, 20)[0]
    assert rho_x(TANH, 1.0) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("act", BUILTIN + [TANH], ids=lambda a: a.name + str(a.epsilon))
def test_trivial_limits(act):
    assert output_mi(act, 0.0, 0.3, 1.0) == 0.0
    assert abs(output_mi(act, 3.0, 1.0, 1.0)) < 1e-9


def test_linear_closed_forms():
    assert output_mi(LIN, 2.0, 0.5, 1.0) == pytest.approx(math.log(2) / 2, abs=1e-15)
    for r, q in [(0.5, 0.1), (3.0, 0.7)]:
        assert output_mi_dr(LIN, r, q, 1.0) == pytest.approx((1 - q) / (2 * (1 + r * (1 - q))), abs=1e-15)
        exact = -r / (2 * (1 + r * (1 - q)))
        assert output_mi_dq(LIN, r, q, 1.0) == pytest.approx(exact, abs=1e-15)
        assert abs(output_mi_dq(LIN, r, q, 1.0, path="fd") - exact) < 1e-6


def test_sign_frozen_values():
    assert abs(output_mi(SIGN, 2.0, 0.5, 1.0) - SIGN_MI_2_05) < 1e-9
    assert abs(output_mi_dr(SIGN, 2.0, 0.5, 1.0) - SIGN_DR_2_05) < 1e-9
    assert abs(output_mi(DZ, 3.0, 0.3, 1.0) - DZ_MI_3_03) < 1e-9
    assert abs(output_mi_dr(DZ, 3.0, 0.3, 1.0) - DZ_DR_3_03) < 1e-9
    assert abs(output_mi_dr(SIGN, 1.0, 0.25, 1.0) - SIGN_DR_1_025) < 1e-9


def test_sign_q0_monte_carlo():
    got = output_mi(SIGN, 1.0, 0.0, 1.0)
    assert abs(got - SIGN_MI_1_0) < 1e-9
    assert abs(got - SIGN_MI_1_0_MC) < 3 * SIGN_MI_1_0_SE


def test_sign_dq_richardson():
    assert abs(output_mi_dq(SIGN, 1.0, 0.5, 1.0) - SIGN_DQ_1_05) < 1e-6
    assert output_mi_dq(SIGN, 0.0, 0.5, 1.0) == 0.0


@pytest.mark.parametrize("act", BUILTIN, ids=lambda a: a.name + str(a.epsilon))
def test_dr_zero_snr(act):
    # at r = 0 the posterior mean is the prior mean, here 0 by oddness
    assert output_mi_dr(act, 0.0, 0.0, 1.0) == pytest.approx(rho_x(act, 1.0) / 2, abs=1e-12)


@pytest.mark.parametrize("act", BUILTIN, ids=lambda a: a.name + str(a.epsilon))
@pytest.mark.parametrize("r", [0.5, 2.0, 8.0])
@pytest.mark.parametrize("q", [0.0, 0.4, 0.9])
def test_dr_matches_difference(act, r, q):
    h = 1e-4
    fd = (output_mi(act, r + h, q, 1.0) - output_mi(act, r - h, q, 1.0)) / (2 * h)
    assert abs(fd - output_mi_dr(act, r, q, 1.0)) < 1e-5


@pytest.mark.parametrize("act", [SIGN, DZ], ids=["sign", "deadzone"])
def test_level_and_generic_paths_agree(act):
    for r in np.linspace(0.25, 12.0, 5):
        for q in np.linspace(0.0, 0.95, 5):
            a = output_mi(act, r, q, 1.0, path="levels")
            b = output_mi(act, r, q, 1.0, path="generic")
            assert abs(a - b) < 1e-7
    da = output_mi_dr(act, 3.0, 0.4, 1.0, path="levels")
    db = output_mi_dr(act, 3.0, 0.4, 1.0, path="generic")
    assert abs(da - db) < 1e-7


# _oracles.step_output_channel (nested adaptive quad), frozen: (r, q, rho) -> (mi, dI/dr)
NESTED_QUAD = {
    "sign": {(0.7, 0.2, 1.0): (0.23215978544331645, 0.2508641371271847),
             (15.0, 0.6, 1.0): (0.44883664823219205, 5.896462984818943e-05),
             (4.0, 0.5, 2.0): (0.5521162901007766, 0.03069275662196756)},
    "dz": {(0.7, 0.2, 1.0): (0.15366559548550038, 0.1871490949711014),
           (15.0, 0.6, 1.0): (0.683267755041754, 0.01081294494542003),
           (4.0, 0.5, 2.0): (0.5523118582717992, 0.07075265380707635)},
}


@pytest.mark.parametrize("name,act", [("sign", SIGN), ("dz", DZ)])
def test_against_nested_quad_values(name, act):
    for (r, q, rho), (mi, dr) in NESTED_QUAD[name].items():
        assert abs(output_mi(act, r, q, rho) - mi) < 1e-9
        assert abs(output_mi_dr(act, r, q, rho) - dr) < 1e-9


@pytest.mark.slow
def test_nested_quad_live():
    mi, dr = _oracles.step_output_channel(0.7, 0.2, 1.0, [0.0], [-1, 1])
    assert (mi, dr) == pytest.approx(NESTED_QUAD["sign"][(0.7, 0.2, 1.0)], abs=1e-12)


def test_custom_step_matches_sign():
    step = Activation.custom(np.sign, sup_norm=1.0, breakpoints=[0.0], odd=True, name="step")
    for r, q in [(1.0, 0.3), (6.0, 0.7)]:
        assert abs(output_mi(step, r, q, 1.0) - output_mi(SIGN, r, q, 1.0)) < 1e-7


def test_tanh_order_doubling():
    from tensorglm.quadrature import gauss_hermite_rule
    a = output_mi(TANH, 2.0, 0.4, 1.0, gauss_hermite_rule(41))
    b = output_mi(TANH, 2.0, 0.4, 1.0, gauss_hermite_rule(81))
    assert abs(a - b) < 1e-7
    assert 0 < a < output_mi(LIN, 2.0, 0.4, 1.0)


def test_both_matches_parts():
    mi, dr = output_mi_both(DZ, 2.5, 0.2, 1.0)
    assert mi == output_mi(DZ, 2.5, 0.2, 1.0) and dr == output_mi_dr(DZ, 2.5, 0.2, 1.0)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(0, 2), r0=st.floats(0.0, 20.0), d1=st.floats(0.05, 4.0), d2=st.floats(0.05, 4.0),
       q=st.floats(0.0, 0.95))
def test_monotone_concave_lipschitz_in_r(k, r0, d1, d2, q):
    act = [SIGN, DZ, LIN][k]
    r1, r2 = r0 + d1, r0 + d1 + d2
    f0, f1, f2 = (output_mi(act, r, q, 1.0) for r in (r0, r1, r2))
    assert f1 >= f0 - 1e-10 and f2 >= f1 - 1e-10
    second = ((f2 - f1) / (r2 - r1) - (f1 - f0) / (r1 - r0)) / (r2 - r0)
    assert second <= 1e-8
    if act.bounded:
        assert abs(f2 - f0) <= act.sup_norm**2 / 2 * (r2 - r0) + 1e-8
        assert 0 <= output_mi_dr(act, r1, q, 1.0) <= act.sup_norm**2 / 2 + 1e-12


@settings(max_examples=20, deadline=None)
@given(k=st.integers(0, 2), r=st.floats(0.1, 20.0), a=st.floats(0.0, 0.99), b=st.floats(0.0, 0.99))
def test_more_side_information_less_mi(k, r, a, b):
    act = [SIGN, DZ, LIN][k]
    lo, hi = sorted((a, b))
    assert output_mi(act, r, hi, 1.0) <= output_mi(act, r, lo, 1.0) + 1e-10


def test_dq_sign_warning():
    # a deliberately crude step lets round-off push the estimate positive
    bumpy = Activation.custom(lambda z: np.sin(40 * z) * 0 + np.heaviside(z - 5, 0.0), sup_norm=1.0,
                              breakpoints=[5.0], name="bump")
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        d = output_mi_dq(bumpy, 1.0, 0.5, 1.0, step=1e-4)
    if d > 1e-6:
        assert any(issubclass(w.category, DerivativeSignWarning) for w in rec)
    assert d <= 1e-6 or rec


@pytest.mark.parametrize("args", [(-1.0, 0.2, 1.0), (1.0, -0.1, 1.0), (1.0, 1.5, 1.0), (1.0, 0.0, -1.0)])
def test_domain_errors(args):
    with pytest.raises(InvalidArgumentError):
        output_mi(SIGN, *args)
