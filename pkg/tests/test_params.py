import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dflab.params import (DomainError, PhysParams, assumption_interval, assumption_stamp, c_aux,
                          check_assumption_1, check_ephf_condition, default_radius,
                          derive_constants, mu_of)

SQRT3_2 = math.sqrt(3.0) / 2.0


def test_rejects_invalid_params():
    for kw in (dict(alpha=-1, c=1, Z=0, q=1), dict(alpha=0, c=0, Z=0, q=1),
               dict(alpha=0, c=1, Z=-1, q=1), dict(alpha=0, c=1, Z=0, q=0),
               dict(alpha=0, c=1, Z=0, q=1.5)):
        with pytest.raises(ValueError):
            PhysParams(**kw)


def test_constants_direct_arithmetic():
    d = derive_constants(PhysParams(0.01, 100.0, 10.0, 2), 1.0)
    assert d.kappa == pytest.approx(0.2004, abs=1e-15)
    assert d.lambda0 == pytest.approx(0.9, abs=1e-15)


def test_constants_zero_coupling():
    d = derive_constants(PhysParams(0.0, 7.0, 0.0, 1), 1.0)
    assert (d.kappa, d.lambda0, d.a_const, d.L_const) == (0.0, 1.0, 0.0, 0.0)


def test_constants_match_independent_evaluation():
    # frozen from a 40-digit mpmath evaluation of the closed forms
    d = derive_constants(PhysParams(0.05, 20.0, 5.0, 3), 2.0)
    assert d.kappa == pytest.approx(0.515, rel=1e-14)
    assert d.lambda0 == pytest.approx(0.75, rel=1e-14)
    assert d.a_const == pytest.approx(0.003255580129119058, rel=1e-13)
    assert d.L_const == pytest.approx(0.013022320516476232, rel=1e-13)
    assert d.A_const == pytest.approx(1.0131941388211441, rel=1e-13)
    assert d.C_kl == pytest.approx(82.893356184191886, rel=1e-13)


def test_undefined_constants_are_flagged():
    d = derive_constants(PhysParams(1.0, 1.0, 1.0, 1), 1.0)
    assert not d.defined and not d.kappa_ok and math.isnan(d.a_const)
    with pytest.raises(DomainError):
        d.require()


def test_derive_constants_is_pure():
    p = PhysParams(0.3, 17.0, 1.5, 2)
    assert derive_constants(p, 3.0).as_dict() == derive_constants(p, 3.0).as_dict()


def test_kappa_lambda_monotonicity():
    alphas = np.linspace(0.0, 2.0, 10)
    cs = np.geomspace(5.0, 500.0, 12)
    for Z in (0.0, 1.0, 2.0):
        for q in (1, 2, 3):
            for a in alphas:
                ks = [derive_constants(PhysParams(a, c, Z, q), 1.0) for c in cs]
                kap = [d.kappa for d in ks]
                lam = [d.lambda0 for d in ks]
                assert all(x >= y for x, y in zip(kap, kap[1:]))
                assert all(x <= y for x, y in zip(lam, lam[1:]))
            kap_a = [derive_constants(PhysParams(a, 50.0, Z, q), 1.0).kappa for a in alphas]
            assert all(x < y for x, y in zip(kap_a, kap_a[1:]))
    kap_q = [derive_constants(PhysParams(0.5, 50.0, 1.0, q), 1.0).kappa for q in range(1, 6)]
    kap_z = [derive_constants(PhysParams(0.5, 50.0, z, 2), 1.0).kappa for z in range(0, 6)]
    assert all(x < y for x, y in zip(kap_q, kap_q[1:]))
    assert all(x < y for x, y in zip(kap_z, kap_z[1:]))


def test_assumption_holds_inside_interval_at_zero_alpha():
    p = PhysParams(0.0, 1.0, 0.1, 1)
    lo, hi = assumption_interval(p)
    assert math.isinf(hi)
    for R in (lo * 1.01, lo * 10, 1e6):
        assert check_assumption_1(None, p, R).holds


def test_assumption_item1_failure_reason():
    st_ = check_assumption_1(None, PhysParams(1.0, 2.0, 1.0, 1), 1.0)
    assert not st_.holds and st_.reason == "item (1) violated"


def test_assumption_boundary_in_c():
    # smallest c where (alpha=1, Z=1, q=2, R=3) passes; frozen from an mpmath bisection
    c0 = 13.627433388230814
    assert not check_assumption_1(None, PhysParams(1.0, c0 * (1 - 1e-9), 1.0, 2), 3.0).holds
    assert check_assumption_1(None, PhysParams(1.0, c0 * (1 + 1e-9), 1.0, 2), 3.0).holds


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.integers(1, 4))
def test_assumption_eventually_holds_for_large_c(alpha, Z, q):
    R = default_radius(1.0, q)
    cs = np.geomspace(1.0, 1e6, 60)
    flags = [check_assumption_1(None, PhysParams(alpha, c, Z, q), R).holds for c in cs]
    assert flags[-1]
    first = flags.index(True)
    assert all(flags[first:])


def test_mu_at_zero():
    assert c_aux(0.0) == 1.0
    assert mu_of(0.0) == 1.0


def test_mu_half_matches_bisection_oracle():
    assert mu_of(0.5) == pytest.approx(0.10802937786434148, rel=1e-12)


def test_mu_positive_on_grid_and_bounded():
    vals = [mu_of(a) for a in np.linspace(0.0, 0.85, 200)]
    assert all(0.0 < v <= 1.0 for v in vals)


def test_mu_positive_up_to_domain_edge():
    # positive for every admissible a; it tends to 0 at the edge since C_a -> 0 there
    for eps in (1e-2, 1e-4, 1e-6):
        a = SQRT3_2 - eps
        assert mu_of(a) > 0.0
        assert mu_of(a) <= c_aux(a) ** 2
    with pytest.raises(DomainError):
        mu_of(SQRT3_2)


@given(st.floats(-0.86, 0.86))
def test_mu_is_the_binding_root(a):
    mu = mu_of(a)
    C2 = c_aux(a) ** 2
    assert mu <= C2
    lhs = mu + (C2 * a * a / (C2 - mu) if mu < C2 else 0.0)
    assert lhs <= 1.0 + 1e-9
    if a != 0.0:
        assert lhs == pytest.approx(1.0, abs=1e-8)


def test_ephf_condition_zero_alpha():
    assert check_ephf_condition(PhysParams(0.0, 10.0, 5.0, 3), 3.0)


def test_ephf_condition_zero_charge_reduces_to_unit_cap():
    c, q, tr = 10.0, 2, 2.0
    for alpha in np.linspace(0.01, 2.0, 50):
        ac = alpha / c
        expected = math.pi * ac * (0.25 + max(tr, q)) + 4 * ac * tr < 1.0
        assert check_ephf_condition(PhysParams(alpha, c, 0.0, q), tr) == expected


def test_ephf_condition_half_charge():
    p = PhysParams(1e-3 * 50.0, 50.0, 25.0, 2)  # alpha_c = 1e-3, Z_c = 0.5
    lhs = math.pi * 1e-3 * (0.25 + 2) + 4e-3 * 2
    assert check_ephf_condition(p, 2.0) == (lhs < 0.10802937786434148)


def test_ephf_condition_domain():
    with pytest.raises(DomainError):
        check_ephf_condition(PhysParams(0.1, 1.0, 0.9, 1), 1.0)


def test_assumption_stamp_contents():
    s = assumption_stamp(PhysParams(0.5, 20.0, 2.0, 2), 8.0)
    assert s["assumption_1"]["R"] == 8.0
    assert s["constants"]["defined"]
    assert isinstance(s["ephf_condition"], bool)
