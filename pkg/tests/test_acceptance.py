"""Acceptance suite: one test per numbered criterion.

Every test prints a single ``[criterion N] PASS|FAIL ...`` line to the
terminal (capture is bypassed) before asserting, so the pytest log doubles as
an acceptance report.
"""

import json
import random
from fractions import Fraction

import numpy as np
import pytest

from openspin.bethe import (
    BetheRootSet,
    Case,
    SolverSettings,
    analyticity_check,
    lambda0,
    match_spectrum,
    residue_cancellation,
    solve_bethe,
)
from openspin.chain import ChainSpec, commutator_norm, pseudo_vacuum, transfer, transfer_exact
from openspin.cli import main
from openspin.exact import ExactMatrix, gauss, poly
from openspin.graded import GradingSignature, twisted_transpose
from openspin.reflection import (
    BoundarySpec,
    SPClass,
    brute_force_sp_solutions,
    build_snp_k,
    build_sp_k,
    snp_re_residual,
    sp_re_residual,
)
from openspin.reports import random_rational_points
from openspin.yang_baxter import rbar_consistency_residual, unitarity_residual, ybe_residual

BASIC = [GradingSignature(m, n) for m, n in [(2, 0), (3, 0), (4, 0), (1, 1), (2, 1), (2, 2)]]


@pytest.fixture
def verdict(capsys):
    """``verdict(n, ok, detail)`` prints the criterion line, then asserts."""

    def _verdict(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return _verdict


def points(count: int, seed: int) -> list[complex]:
    return [complex(float(a), float(b)) for a, b in random_rational_points(count, seed)]


def rand_frac(rng: random.Random, lo=-9, hi=9) -> Fraction:
    return Fraction(rng.randint(lo, hi), rng.randint(1, 7))


def rand_even_matrix(sig: GradingSignature, rng: random.Random, nonzero_diag=False):
    d, g = sig.dim, sig.grading
    while True:
        m = [[rand_frac(rng) if g[r] == g[c] else 0 for c in range(d)] for r in range(d)]
        if nonzero_diag:
            for r in range(d):
                m[r][r] = m[r][r] or Fraction(1)
        if abs(np.linalg.det(np.array(m, dtype=float))) > 1e-9:
            return m


# --------------------------------------------------------------------------
# R-matrix


def test_criterion_01_ybe_exact(verdict):
    bad = [s.label() for s in BASIC if not ybe_residual(s).is_zero()]
    verdict(1, not bad, f"YBE residual identically zero for {len(BASIC)} signatures" + (f"; nonzero: {bad}" if bad else ""))


def test_criterion_02_unitarity_exact(verdict):
    bad = [s.label() for s in BASIC if not unitarity_residual(s).is_zero()]
    verdict(2, not bad, "R12(l)R21(-l) = -(l^2+1) exactly" + (f"; fails: {bad}" if bad else ""))


def test_criterion_03_rbar_consistency(verdict):
    # the crossing matrix must preserve the grading; see the decision ledger
    # for sl(1|1) and sl(2|1), where no such basis exists in either order
    sigs = [
        GradingSignature(2, 0),
        GradingSignature(2, 0, theta0=-1),
        GradingSignature(3, 0),
        GradingSignature(4, 0),
        GradingSignature(4, 0, theta0=-1),
        GradingSignature(2, 2, "symmetric"),
        GradingSignature(2, 2, "symmetric", theta0=-1),
        GradingSignature(1, 2, "symmetric"),
    ]
    bad = [s.label() for s in sigs if not rbar_consistency_residual(s).is_zero()]
    no_basis = [s for s in (GradingSignature(1, 1), GradingSignature(2, 1)) if s.crossing_compatible]
    ok = not bad and not no_basis
    verdict(3, ok, f"t1/t2 conjugate matrices agree exactly for {len(sigs)} crossing-compatible signatures "
            "(both theta0 where the dimension is even); sl(1|1), sl(2|1) have no grading-preserving V")


# --------------------------------------------------------------------------
# reflection equations


def _random_sp_family(rng: random.Random):
    sig = rng.choice([GradingSignature(2, 0), GradingSignature(3, 0), GradingSignature(2, 1), GradingSignature(1, 2), GradingSignature(2, 2)])
    xi = rand_frac(rng)
    U = rand_even_matrix(sig, rng, nonzero_diag=True) if rng.random() < 0.6 else None
    if rng.random() < 0.25:
        # rank-one nilpotent inside a block of equal parity
        g = sig.grading
        pairs = [(r, c) for r in range(sig.dim) for c in range(sig.dim) if r != c and g[r] == g[c]]
        r, c = rng.choice(pairs)
        E = [[1 if (i, j) == (r, c) else 0 for j in range(sig.dim)] for i in range(sig.dim)]
        return sig, BoundarySpec.nilpotent_family(E, xi, conjugator=U)
    m1 = rng.randint(0, sig.M)
    n1 = rng.randint(0, sig.N)
    return sig, BoundarySpec.diagonal((m1, sig.M - m1, sig.N - n1, n1), xi, conjugator=U)


def test_criterion_04_sp_forward_classification(verdict):
    rng = random.Random(4)
    failures, kinds = [], {}
    for _ in range(100):
        sig, spec = _random_sp_family(rng)
        fam = build_sp_k(sig, spec)
        if not sp_re_residual(sig, fam).is_zero():
            failures.append((sig.label(), spec))
        kind = "nilpotent" if spec.nilpotent is not None else "diagonal"
        kinds[kind] = kinds.get(kind, 0) + 1
    verdict(4, not failures, f"100 random classified K (diagonal {kinds.get('diagonal', 0)}, nilpotent {kinds.get('nilpotent', 0)}) "
            f"solve the SP reflection equation exactly; failures: {len(failures)}")


@pytest.mark.slow
def test_criterion_05_sp_reverse_classification(verdict):
    summary, unclassified, uncertified = [], 0, 0
    for sig in (GradingSignature(2, 0), GradingSignature(3, 0)):
        fams = brute_force_sp_solutions(sig)
        labels = [lab for f in fams for lab in f.labels]
        unclassified += sum(lab.kind not in (SPClass.DIAGONALIZABLE, SPClass.NILPOTENT) for lab in labels)
        uncertified += sum(not f.certified for f in fams)
        summary.append(f"{sig.label()}: {len(fams)} gauge classes, {len(labels)} samples")
    ok = unclassified == 0 and uncertified == 0
    verdict(5, ok, "; ".join(summary) + f"; unclassified {unclassified}, uncertified {uncertified}")


def test_criterion_06_snp_reflection(verdict):
    rng = random.Random(6)
    sigs = [GradingSignature(2, 0), GradingSignature(4, 0), GradingSignature(2, 2, "symmetric")]
    failures = 0
    for k in range(100):
        sig = sigs[k % 3]
        eps = 1 if k % 2 == 0 else -1
        K = ExactMatrix.from_array(np.array([[gauss(x) for x in row] for row in rand_even_matrix(sig, rng)], dtype=object))
        Kt = K + twisted_transpose(sig, K, 0, 1) * eps
        if Kt.is_zero():
            continue
        spec = BoundarySpec.snp_matrix([[Kt[(r, c)].LC if Kt[(r, c)] else 0 for c in range(sig.dim)] for r in range(sig.dim)], eps)
        if not snp_re_residual(sig, build_snp_k(sig, spec)).is_zero():
            failures += 1
    # negative control: neither symmetric nor antisymmetric
    sig = GradingSignature(4, 0)
    K = ExactMatrix.from_array(np.array([[gauss(x) for x in row] for row in rand_even_matrix(sig, rng)], dtype=object))
    control = not snp_re_residual(sig, K).is_zero()
    verdict(6, failures == 0 and control, f"100 random (anti)symmetric K on sl(2), sl(4), sl(2|2): {failures} failures; "
            f"generic K gives a nonzero residual: {control}")


# --------------------------------------------------------------------------
# open chains used by criteria 7 and 8


def _open_chains():
    rng = random.Random(78)
    out = []
    for L in (1, 2, 3):
        for sig, blocks in ((GradingSignature(2, 0), (1, 1, 0, 0)), (GradingSignature(2, 1), (1, 1, 1, 0))):
            out.append(ChainSpec(sig, L, "open-sp"))
            out.append(ChainSpec(sig, L, "open-sp", BoundarySpec.diagonal(blocks, rand_frac(rng))))
    for sig in (GradingSignature(2, 0), GradingSignature(2, 2, "symmetric")):
        d = sig.dim
        for sites in (2, 4):
            out.append(ChainSpec(sig, sites, "open-snp"))
            half = [rand_frac(rng, 1, 9) for _ in range((d + 1) // 2)]
            pal = half + half[: d // 2][::-1]
            out.append(ChainSpec(sig, sites, "open-snp", BoundarySpec.snp_diagonal(pal)))
    return out


def _label(c: ChainSpec) -> str:
    b = c.boundary_minus
    return f"{c.mode.value} {c.sig.label()} sites={c.sites} K={'I' if b is None else 'diag'}"


def test_criterion_07_transfer_commutation(verdict):
    lam = points(20, 7)
    pairs = list(zip(lam[0::2], lam[1::2]))
    chains = [ChainSpec(s, L, "closed") for s in (GradingSignature(2, 0), GradingSignature(3, 0)) for L in (1, 2, 3)]
    chains += _open_chains()
    worst, worst_label = 0.0, ""
    for c in chains:
        n = max(commutator_norm(c, a, b) for a, b in pairs)
        if n > worst:
            worst, worst_label = n, _label(c)
    h = Fraction(1, 2)
    broken = ChainSpec(
        GradingSignature(3, 0),
        2,
        "open-sp",
        BoundarySpec.affine_family(
            [[gauss((0, h)), 0, 0], [0, gauss((0, h)), 0], [0, 0, gauss((0, Fraction(3, 4)))]], [[-1, 0, 0], [0, 1, 0], [0, 0, 1]]
        ),
    )
    control = min(commutator_norm(broken, a, b) for a, b in pairs)
    ok = worst < 1e-10 and control > 1e-3
    verdict(7, ok, f"{len(chains)} chains x 10 pairs: max |[t,t']| = {worst:.2e} ({worst_label}); "
            f"broken sl(3) K gives min {control:.3g}")


def _exact_vacuum_holds(chain, point) -> bool:
    """``t(x)|w> == Lambda0(x)|w>`` in exact arithmetic at a Gaussian rational."""
    x = gauss(point)
    T = transfer_exact(chain, x)
    column = {r: v for (r, c), v in T.items() if c == 0}
    return set(column) == {0} and column[0] == poly(lambda0(chain, x))


@pytest.mark.slow
def test_criterion_08_pseudo_vacuum(verdict):
    exact_points = random_rational_points(20, 8)
    lam = [complex(float(a), float(b)) for a, b in exact_points]
    chains = _open_chains()
    worst, worst_label, exact_failures = 0.0, "", []
    for c in chains:
        w = pseudo_vacuum(c)
        for x in lam:
            tw = transfer(c, x) @ w
            dev = np.linalg.norm(tw - complex(lambda0(c, x)) * w) / np.linalg.norm(tw)
            if dev > worst:
                worst, worst_label = dev, _label(c)
        if not all(_exact_vacuum_holds(c, p) for p in exact_points):
            exact_failures.append(_label(c))
    # the deviation is exactly zero in rational arithmetic; the float figure
    # is roundoff of the dense transfer matrix and reported for reference
    verdict(8, not exact_failures, f"{len(chains)} open chains x 20 rational points: exact deviation 0 "
            f"(failures: {exact_failures or 'none'}); float max {worst:.2e} ({worst_label}); "
            "left boundary = identity (calibrated, recorded in reports)")


# --------------------------------------------------------------------------
# Bethe ansatz


def _solve_all(chain, max_magnons, seeds=40):
    out = []
    for c in range(max_magnons + 1):
        out += solve_bethe(chain, (c,), SolverSettings(seeds=seeds))
    return out


@pytest.fixture(scope="module")
def completeness_runs():
    lam = points(8, 9)
    runs = {}
    for name, chain, m in [
        ("K=I, sites=2", ChainSpec(GradingSignature(2, 0), 2, "open-sp"), 2),
        ("blocks=(1,1,0,0) xi=3/2, sites=2", ChainSpec(GradingSignature(2, 0), 2, "open-sp", BoundarySpec.diagonal((1, 1, 0, 0), "3/2")), 2),
        ("K=I, sites=4", ChainSpec(GradingSignature(2, 0), 4, "open-sp"), 4),
    ]:
        rs = _solve_all(chain, m)
        runs[name] = (chain, rs, match_spectrum(chain, rs, lam, tolerance=1e-8))
    return runs


@pytest.mark.slow
def test_criterion_09_bethe_completeness(verdict, completeness_runs):
    parts, ok = [], True
    for name, (chain, rs, m) in completeness_runs.items():
        parts.append(f"{name}: {m.matched}/{m.total} curves from {len(rs)} root sets")
        ok &= m.complete
    # the two-site sl(2) chain has four states; sixteen curves are reached at four sites
    verdict(9, ok, "; ".join(parts) + " (8 samples, 1e-8 relative)")


def test_criterion_10_sl21_spot_check(verdict):
    chain = ChainSpec(GradingSignature(2, 1), 2, "open-sp")
    lam = points(8, 10)
    vac = BetheRootSet.empty(2)
    one = solve_bethe(chain, (1, 0))
    m = match_spectrum(chain, [vac] + one, lam, tolerance=1e-8)
    vac_ok = any(idx == 0 and dev < 1e-8 for idx, dev in m.assignments)
    one_ok = any(idx is not None and idx >= 1 and dev < 1e-8 for idx, dev in m.assignments)
    n_one = len({idx for idx, dev in m.assignments if idx is not None and idx >= 1 and dev < 1e-8})
    verdict(10, vac_ok and one_ok, f"vacuum curve matched: {vac_ok}; one-root level-1 sector: {n_one} of {len(one)} "
            f"root sets matched ({m.matched}/{m.total} curves overall)")


def test_criterion_11_snp_vacuum(verdict):
    lam = points(20, 11)
    configs = [
        ChainSpec(GradingSignature(2, 0), 2, "open-snp"),
        ChainSpec(GradingSignature(2, 0), 2, "open-snp", BoundarySpec.snp_diagonal(["3/2", "3/2"])),
        ChainSpec(GradingSignature(2, 2, "symmetric"), 2, "open-snp"),
        ChainSpec(GradingSignature(2, 2, "symmetric"), 2, "open-snp", BoundarySpec.snp_diagonal([2, "-1/3", "-1/3", 2])),
    ]
    worst = 0.0
    for c in configs:
        w = pseudo_vacuum(c)
        for x in lam:
            tw = transfer(c, x) @ w
            worst = max(worst, np.linalg.norm(tw - complex(lambda0(c, x)) * w) / np.linalg.norm(tw))
    verdict(11, worst < 1e-12, f"SNP sl(2), sl(2|2), two sites, identity and palindromic diagonal K: max deviation {worst:.2e}")


@pytest.mark.slow
def test_criterion_12_analyticity(verdict, completeness_runs):
    rng = np.random.default_rng(12)

    def rand_roots(n):
        return tuple(complex(z) for z in rng.normal(size=n) + 1j * rng.normal(size=n))

    worst_sp = max(
        analyticity_check(Case.SP, GradingSignature(3, 0), BetheRootSet((2, 1), (rand_roots(2), rand_roots(1))))["max_deviation"]
        for _ in range(50)
    )
    worst_snp = max(
        analyticity_check(Case.SNP, GradingSignature(2, 2, "symmetric"), BetheRootSet((1, 2), (rand_roots(1), rand_roots(2))))["max_deviation"]
        for _ in range(50)
    )
    worst_res, count = 0.0, 0
    for chain, rs, _ in completeness_runs.values():
        for r in rs:
            worst_res = max(worst_res, residue_cancellation(chain, r))
            count += 1
    ok = worst_sp < 1e-12 and worst_snp < 1e-12 and worst_res < 1e-8
    verdict(12, ok, f"SP sl(3) {worst_sp:.1e}, SNP sl(2|2) {worst_snp:.1e} over 50 random root sets each; "
            f"residue cancellation {worst_res:.1e} over {count} solver root sets")


def test_criterion_13_determinism(verdict, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "chain": {"m": 2, "n": 0, "sites": 2, "mode": "open-sp"},
        "boundary": {"blocks": [1, 1, 0, 0], "xi": "3/2"},
        "seed": 13,
    }))
    texts, codes = [], []
    for k in range(2):
        out = tmp_path / f"report{k}.json"
        codes.append(main(["full-report", "--config", str(cfg), "--out", str(out)]))
        data = json.loads(out.read_text())
        data.pop("timestamp")
        texts.append(json.dumps(data, indent=2))
    same = texts[0] == texts[1]
    verdict(13, same and codes == [0, 0], f"two full-report runs (seed 13): identical modulo timestamp: {same}; exit codes {codes}")
