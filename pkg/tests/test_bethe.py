from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from openspin.bethe import (
    BetheRootSet,
    Case,
    PoleError,
    SelfTermPolicy,
    SolverSettings,
    analyticity_check,
    bethe_residuals,
    case_factors,
    dressed_eigenvalue,
    dressing,
    e_fn,
    g_function,
    lambda0,
    level_rules,
    match_spectrum,
    residue_cancellation,
    solve_bethe,
)
from openspin.chain import ChainSpec, vacuum_eigenvalue
from openspin.exact import I, gauss, to_complex
from openspin.graded import GradingSignature
from openspin.reflection import BoundarySpec

SL2 = GradingSignature(2, 0)
LAMS = [0.37 - 0.81j, -1.2 + 0.4j, 2.1 + 1.3j]


def sp(sig, L, boundary=None):
    return ChainSpec(sig, L, "open-sp", boundary)


# --------------------------------------------------------------------------
# elementary functions


def test_e_fn_values():
    assert e_fn(0, 0.7 + 0.2j) == 1
    assert e_fn(1, 0j) == -1
    assert e_fn(1, gauss(0)) == gauss(-1)
    with pytest.raises(PoleError):
        e_fn(2, 1j)
    with pytest.raises(PoleError):
        e_fn(2, I)


def test_g_function_examples():
    x = gauss(("2/3", "1/5"))
    assert g_function(Case.SP, SL2, None, 0, x) == (x + I) / (x + I * gauss(Fraction(1, 2)))
    assert g_function(Case.SNP, SL2, None, 0, x) == x / (x + I * gauss(Fraction(1, 2)))
    # middle function of an odd-dimensional SNP chain is 1
    assert g_function(Case.SNP, GradingSignature(1, 2, "symmetric"), None, 1, x) == gauss(1)
    with pytest.raises(IndexError):
        g_function(Case.SP, SL2, None, 2, x)


def test_boundary_factor_multiplies_lower_g():
    x = gauss(("1/3", "-2/7"))
    b = BoundarySpec.diagonal((1, 1, 0, 0), "3/2")
    plain = g_function(Case.SP, SL2, None, 0, x)
    assert g_function(Case.SP, SL2, b, 0, x) == (-x + I * gauss("3/2")) * plain


def test_case_factors():
    x = 0.4 + 0.3j
    a, b, c = case_factors(Case.SP, SL2, x)
    assert np.isclose(a, (x + 1j) ** 2) and np.isclose(b, x**2) and np.isclose(c, x**2)
    a, b, c = case_factors(Case.SNP, SL2, x)
    bbar = -x - 1j
    assert np.isclose(b, (x * bbar) ** 2)
    assert np.isclose(a, ((x + 1j) * bbar) ** 2)


def test_lambda0_sl2_single_site():
    chain = sp(SL2, 1)
    for x in LAMS:
        expected = (x + 1j) ** 2 * (x + 1j) / (x + 0.5j) + x**2 * x / (x + 0.5j)
        assert abs(complex(lambda0(chain, x)) - expected) < 1e-12 * abs(expected)
        assert abs(vacuum_eigenvalue(chain, x)[0] - expected) < 1e-12 * abs(expected)


def test_lambda0_is_exact_on_rationals():
    chain = sp(GradingSignature(2, 1), 2, BoundarySpec.diagonal((1, 1, 1, 0), 2))
    x = gauss(("1/3", "1/4"))
    assert abs(to_complex(lambda0(chain, x)) - vacuum_eigenvalue(chain, complex(1 / 3, 1 / 4))[0]) < 1e-10


# --------------------------------------------------------------------------
# dressings


def test_dressing_sl2_single_root():
    u = 0.31 + 0.12j
    rs = BetheRootSet((1,), ((u,),))
    for x in LAMS:
        expected = ((x + u - 0.5j) * (x - u - 0.5j)) / ((x + u + 0.5j) * (x - u + 0.5j))
        assert abs(dressing(Case.SP, SL2, 0, rs, x) - expected) < 1e-13


def test_empty_rootset_gives_vacuum():
    chain = sp(GradingSignature(3, 0), 2)
    rs = BetheRootSet.empty(2)
    for x in LAMS:
        assert dressing(Case.SP, chain.sig, 1, rs, x) == 1
        assert abs(dressed_eigenvalue(chain, rs, x) - complex(lambda0(chain, x))) < 1e-12 * abs(lambda0(chain, x))
    assert bethe_residuals(chain, rs).size == 0


roots = st.complex_numbers(min_magnitude=0.2, max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(u=roots, v=roots)
def test_dressing_parity_under_root_sign(u, v):
    sig = GradingSignature(3, 0)
    a = BetheRootSet((1, 1), ((u,), (v,)))
    b = BetheRootSet((1, 1), ((-u,), (v,)))
    x = 0.913 - 0.377j
    for l in range(3):
        try:
            da, db = dressing(Case.SP, sig, l, a, x), dressing(Case.SP, sig, l, b, x)
        except PoleError:
            continue
        assert abs(da - db) <= 1e-9 * max(1.0, abs(da))


@settings(max_examples=40, deadline=None)
@given(st.lists(roots, min_size=3, max_size=3))
def test_sp_analyticity_identities_hold_for_random_roots(zs):
    rs = BetheRootSet((2, 1), ((zs[0], zs[1]), (zs[2],)))
    assert analyticity_check(Case.SP, GradingSignature(3, 0), rs)["max_deviation"] < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(roots, min_size=2, max_size=2))
def test_snp_crossing_completion_holds_for_random_roots(zs):
    sig = GradingSignature(2, 2, "symmetric")
    rs = BetheRootSet((1, 1), ((zs[0],), (zs[1],)))
    checks = analyticity_check(Case.SNP, sig, rs)["checks"]
    assert max(v for k, v in checks.items() if k.startswith("cross")) < 1e-12


def test_level_structure():
    rules = level_rules(sp(GradingSignature(2, 1), 1))
    assert [r.level for r in rules] == [1, 2]
    assert rules[0].lhs_e1_power == 2 and rules[1].sign == 1 and rules[1].self_factors == ()
    snp = level_rules(ChainSpec(GradingSignature(1, 2, "symmetric"), 2, "open-snp"))
    assert snp[-1].lhs_extra == ((-0.5, 1),)


# --------------------------------------------------------------------------
# solver and oracle


def _all_rootsets(chain, max_magnons, policy=SelfTermPolicy.RESIDUE):
    out = []
    for c in range(max_magnons + 1):
        out += solve_bethe(chain, (c,), SolverSettings(seeds=20), policy=policy)
    return out


def test_self_term_policy_calibration():
    # only the pole-cancellation form covers both sl(2) spectra at two sites
    results = {}
    for boundary in (None, BoundarySpec.diagonal((1, 1, 0, 0), "3/2")):
        chain = sp(SL2, 2, boundary)
        for policy in SelfTermPolicy:
            m = match_spectrum(chain, _all_rootsets(chain, 2, policy), LAMS)
            results[(boundary is None, policy)] = m.complete
    assert results[(True, SelfTermPolicy.RESIDUE)] and results[(False, SelfTermPolicy.RESIDUE)]
    assert not (results[(True, SelfTermPolicy.INCLUDE_SELF)] and results[(False, SelfTermPolicy.INCLUDE_SELF)])
    assert not (results[(True, SelfTermPolicy.EXCLUDE_SELF)] and results[(False, SelfTermPolicy.EXCLUDE_SELF)])


def test_solver_soundness_and_symmetry():
    chain = sp(SL2, 2, BoundarySpec.diagonal((1, 1, 0, 0), "3/2"))
    found = solve_bethe(chain, (1,))
    assert found
    for rs in found:
        assert np.abs(bethe_residuals(chain, rs)).max() < 1e-10
        assert residue_cancellation(chain, rs) < 1e-8
        flipped = BetheRootSet(rs.counts, tuple(tuple(-u for u in lv) for lv in rs.roots))
        assert np.abs(bethe_residuals(chain, flipped)).max() < 1e-10
        for x in LAMS:
            assert abs(dressed_eigenvalue(chain, rs, x) - dressed_eigenvalue(chain, flipped, x)) < 1e-9 * abs(
                dressed_eigenvalue(chain, rs, x)
            )


def test_single_site_one_magnon_matches_oracle():
    chain = sp(SL2, 1, BoundarySpec.diagonal((1, 1, 0, 0), "3/2"))
    rs = _all_rootsets(chain, 1)
    m = match_spectrum(chain, rs, LAMS)
    assert m.complete


def test_vacuum_rootset_matches_with_tiny_deviation():
    chain = sp(SL2, 2)
    m = match_spectrum(chain, [BetheRootSet.empty(1)], LAMS)
    assert min(dev for _, dev in m.assignments) < 1e-12


def test_perturbed_root_fails_to_match():
    chain = sp(SL2, 2, BoundarySpec.diagonal((1, 1, 0, 0), "3/2"))
    rs = solve_bethe(chain, (1,))[0]
    bad = BetheRootSet(rs.counts, ((rs.roots[0][0] + 0.1,),))
    good = match_spectrum(chain, [rs], LAMS)
    worse = match_spectrum(chain, [bad], LAMS)
    assert min(d for _, d in good.assignments) < 1e-8
    assert min(d for _, d in worse.assignments) > 1e-3


def test_boundary_changes_roots_and_spectrum():
    plain = sp(SL2, 2)
    bnd = sp(SL2, 2, BoundarySpec.diagonal((1, 1, 0, 0), "3/2"))
    r_plain, r_bnd = solve_bethe(plain, (1,)), solve_bethe(bnd, (1,))
    assert not any(a.same_as(b) for a in r_plain for b in r_bnd)
    assert match_spectrum(bnd, _all_rootsets(bnd, 2), LAMS).complete


def test_counts_validation_and_empty_solution():
    chain = sp(GradingSignature(3, 0), 1)
    assert solve_bethe(chain, (0, 0)) == [BetheRootSet.empty(2)]
    with pytest.raises(ValueError):
        solve_bethe(chain, (1, 0, 0))
    with pytest.raises(ValueError):
        BetheRootSet((2,), ((0.1,),))
    with pytest.raises(ValueError):
        lambda0(ChainSpec(SL2, 2, "closed"), 0.3)
