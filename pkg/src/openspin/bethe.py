"""Analytical Bethe ansatz for the open chains.

The pseudo-vacuum eigenvalue is a signed sum of ``M+N`` terms
``w_l(lam) = s_l * {alpha, beta, gamma}(lam)^L * g_l(lam)``, one per basis
vector of the auxiliary space.  General eigenvalues multiply each term by a
dressing ``A_l``; every dressing is stored as a list of simple factors
``(lam + c_num) / (lam + c_den)`` so that poles and residues are explicit.

Scalars may be complex floats or exact Gaussian rationals (``QQ_I``
elements); the formulas are written once and work for both.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .chain import ChainMode, ChainSpec, spectral_curves
from .exact import I as EXACT_I
from .exact import ExactScalar, gauss
from .graded import GradingSignature
from .reflection import BoundaryKind, BoundarySpec


class Case(str, Enum):
    SP = "SP"
    SNP = "SNP"


class SelfTermPolicy(str, Enum):
    """How the ``j = i`` term of same-level Bethe products is treated.

    ``include-self`` and ``exclude-self`` evaluate the displayed Bethe
    equations with or without that term.  ``residue`` replaces the displayed
    equations by the pole-cancellation conditions of the dressed eigenvalue
    itself (one condition per root, read off the two terms sharing the pole).
    """

    INCLUDE_SELF = "include-self"
    EXCLUDE_SELF = "exclude-self"
    RESIDUE = "residue"


# Calibrated against the exact-diagonalization oracle (tests/test_bethe.py):
# only the pole-cancellation form reproduces the open-chain spectra.
DEFAULT_SELF_TERM_POLICY = SelfTermPolicy.RESIDUE


class PoleError(ZeroDivisionError):
    """Evaluation point sits on a pole."""


def _exact(x) -> bool:
    return isinstance(x, ExactScalar)


def _ic(q, like):
    """``i * q`` in the number system of ``like``."""
    if _exact(like):
        return EXACT_I * gauss(Fraction(q))
    return 1j * float(q)


def _const(q, like):
    return gauss(q) if _exact(like) else complex(q)


def _div(n, d, where=""):
    if not d:
        raise PoleError(f"pole {where}".strip())
    return n / d


def case_of(chain: ChainSpec) -> Case:
    if chain.mode is ChainMode.OPEN_SNP:
        return Case.SNP
    if chain.mode is ChainMode.OPEN_SP:
        return Case.SP
    raise ValueError("the Bethe ansatz here covers open chains only")


# --------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True)
class KinematicFns:
    """``a, b`` and their crossed versions ``abar(l) = a(-l - i rho)`` etc.

    ``a(l) = l + i*s`` where ``s = (-1)^{[e_1]}`` is the sign of the
    super-permutation on the doubled pseudo-vacuum vector; ``s = 1`` unless
    the first basis vector is fermionic (symmetric basis).
    """

    sig: GradingSignature

    @property
    def vacuum_sign(self) -> int:
        return -1 if self.sig.grading[0] else 1

    def a(self, x):
        return x + _ic(self.vacuum_sign, x)

    def b(self, x):
        return x

    def crossed(self, x):
        return -x - _ic(self.sig.rho, x)

    def abar(self, x):
        return self.a(self.crossed(x))

    def bbar(self, x):
        return self.b(self.crossed(x))


def case_factors(case: Case, sig: GradingSignature, x):
    """``(alpha, beta, gamma)`` at ``x``."""
    k = KinematicFns(sig)
    if case is Case.SP:
        return k.a(x) ** 2, k.b(x) ** 2, k.b(x) ** 2
    return (k.a(x) * k.bbar(x)) ** 2, (k.b(x) * k.bbar(x)) ** 2, (k.abar(x) * k.b(x)) ** 2


def e_fn(x, lam):
    """``e_x(lam) = (lam + i x/2) / (lam - i x/2)``."""
    if _exact(lam):
        h = EXACT_I * gauss(Fraction(x) / 2)
    else:
        h = 0.5j * complex(x)
    return _div(lam + h, lam - h, f"of e_{x} at {lam}")


# --------------------------------------------------------------------------
# g functions


def _sp_g(sig: GradingSignature, l: int, x):
    M, N = sig.M, sig.N
    num = x * (x + _ic(Fraction(M - N, 2), x))
    if l < M:
        den = (x + _ic(Fraction(l, 2), x)) * (x + _ic(Fraction(l + 1, 2), x))
    else:
        den = (x + _ic(Fraction(2 * M - l - 1, 2), x)) * (x + _ic(Fraction(2 * M - l, 2), x))
    return _div(num, den, f"of g_{l}")


def _snp_g(sig: GradingSignature, l: int, x):
    d, rho = sig.dim, Fraction(sig.rho)
    if 2 * l < d - 1:
        return _div(x + _ic((rho - 1) / 2, x), x + _ic(rho / 2, x), f"of g_{l}")
    if 2 * l == d - 1:
        return _const(1, x)
    return _snp_g(sig, d - 1 - l, -x - _ic(rho, x))


def _sp_boundary_factor(sig: GradingSignature, boundary: BoundarySpec | None, l: int, x):
    if boundary is None or boundary.blocks is None:
        return _const(1, x)
    m1, m2, n2, _ = boundary.blocks
    xi = gauss(boundary.xi) if _exact(x) else complex(_as_complex(boundary.xi))
    ixi = (EXACT_I * xi) if _exact(x) else 1j * xi
    if l < m1:
        return -x + ixi
    if l < sig.M + n2:
        return x + ixi + _ic(m1, x)
    return -x + ixi - _ic(m2, x) + _ic(n2, x)


def _as_complex(v) -> complex:
    if isinstance(v, ExactScalar):
        return complex(float(v.x), float(v.y))
    if isinstance(v, str):
        return complex(Fraction(v))
    if isinstance(v, (tuple, list)):
        return complex(float(Fraction(v[0])), float(Fraction(v[1])))
    return complex(v)


def _snp_k_diag(sig: GradingSignature, boundary: BoundarySpec | None, x) -> list:
    if boundary is None or boundary.k_diag is None:
        return [_const(1, x)] * sig.dim
    if _exact(x):
        return [gauss(k) for k in boundary.k_diag]
    return [_as_complex(k) for k in boundary.k_diag]


def _require_diagonal(case: Case, boundary: BoundarySpec | None):
    if boundary is None:
        return
    if case is Case.SP and any(x is not None for x in (boundary.nilpotent, boundary.conjugator, boundary.affine)):
        raise ValueError("closed-form pseudo-vacuum data need a diagonal SP boundary")
    if case is Case.SNP and boundary.k_matrix is not None:
        raise ValueError("closed-form pseudo-vacuum data need a diagonal SNP boundary")


def g_function(case: Case, sig: GradingSignature, boundary: BoundarySpec | None, l: int, x):
    """``g_l`` (identity boundary) or ``g~_l`` (diagonal boundary) at ``x``."""
    if not 0 <= l < sig.dim:
        raise IndexError(f"g index {l} out of range")
    _require_diagonal(case, boundary)
    if case is Case.SP:
        return _sp_boundary_factor(sig, boundary, l, x) * _sp_g(sig, l, x)
    return _snp_k_diag(sig, boundary, x)[l] * _snp_g(sig, l, x)


def term_signs(sig: GradingSignature) -> list[int]:
    """``(-1)^{[l]}`` for the auxiliary basis vector of each term."""
    return [-1 if g else 1 for g in sig.grading]


def vacuum_weights(chain: ChainSpec, x) -> list:
    """``w_l(x)`` with ``Lambda0 = sum_l w_l``."""
    case = case_of(chain)
    sig, L, d = chain.sig, chain.double_row_length, chain.sig.dim
    alpha, beta, gamma = case_factors(case, sig, x)
    signs = term_signs(sig)
    out = []
    for l in range(d):
        base = alpha if l == 0 else gamma if l == d - 1 else beta
        out.append(signs[l] * base**L * g_function(case, sig, chain.boundary_minus, l, x))
    return out


def lambda0(chain: ChainSpec, x):
    """Pseudo-vacuum eigenvalue (exact for exact ``x``)."""
    return sum(vacuum_weights(chain, x)[1:], vacuum_weights(chain, x)[0])


# --------------------------------------------------------------------------
# root sets and dressings


@dataclass(frozen=True)
class BetheRootSet:
    counts: tuple
    roots: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        roots = tuple(tuple(complex(r) for r in level) for level in self.roots)
        if len(roots) < len(counts):
            roots = roots + ((),) * (len(counts) - len(roots))
        if tuple(len(r) for r in roots) != counts:
            raise ValueError("root lists do not match the level counts")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "roots", roots)

    @classmethod
    def empty(cls, levels: int) -> "BetheRootSet":
        return cls((0,) * levels, ((),) * levels)

    @classmethod
    def from_flat(cls, counts, flat) -> "BetheRootSet":
        out, k = [], 0
        for c in counts:
            out.append(tuple(flat[k : k + c]))
            k += c
        return cls(tuple(counts), tuple(out))

    def flat(self) -> np.ndarray:
        return np.array([r for level in self.roots for r in level], dtype=complex)

    def level(self, l: int) -> tuple:
        """Roots of level ``l`` (1-based); empty outside the range."""
        return self.roots[l - 1] if 1 <= l <= len(self.roots) else ()

    def canonical(self) -> "BetheRootSet":
        """Sign-fixed (``Im >= 0``, then ``Re >= 0``) and sorted per level."""
        def fix(z: complex) -> complex:
            if abs(z.imag) > 1e-9:
                return z if z.imag > 0 else -z
            return z if z.real >= 0 else -z

        levels = tuple(tuple(sorted((fix(z) for z in lv), key=lambda z: (round(z.real, 7), round(z.imag, 7)))) for lv in self.roots)
        return BetheRootSet(self.counts, levels)

    def same_as(self, other: "BetheRootSet", tol: float = 1e-7) -> bool:
        if self.counts != other.counts:
            return False
        a, b = self.canonical().flat(), other.canonical().flat()
        return bool(np.all(np.abs(a - b) < tol))

    def to_dict(self) -> dict:
        return {
            "counts": list(self.counts),
            "roots": [[{"re": repr(z.real), "im": repr(z.imag)} for z in lv] for lv in self.canonical().roots],
        }


@dataclass(frozen=True)
class Factor:
    """``(lam + num) / (lam + den)``, tagged with the root that produced it."""

    num: complex
    den: complex
    level: int
    index: int
    sign: int

    def __call__(self, x):
        return _div(x + self.num, x + self.den, "of a dressing factor")

    def crossed(self, rho) -> "Factor":
        # (-lam - i rho + c) / (-lam - i rho + d) = (lam + i rho - c) / (lam + i rho - d)
        shift = 1j * float(rho)
        return Factor(shift - self.num, shift - self.den, self.level, self.index, -self.sign)


def _pair(roots, level, c_num, c_den) -> list[Factor]:
    out = []
    for j, r in enumerate(roots):
        for s in (1, -1):
            out.append(Factor(s * r + c_num, s * r + c_den, level, j, s))
    return out


def levels_count(case: Case, sig: GradingSignature) -> int:
    if case is Case.SP:
        return sig.dim - 1
    return sig.N // 2 + sig.M // 2


def _sp_dressing_factors(sig: GradingSignature, rs: BetheRootSet, l: int) -> list[Factor]:
    M = sig.M
    if l == 0:
        return _pair(rs.level(1), 1, -0.5j, 0.5j)
    if l < M:
        h = 0.5j * l
        return _pair(rs.level(l), l, h + 1j, h) + _pair(rs.level(l + 1), l + 1, h - 0.5j, h + 0.5j)
    h = 1j * M - 0.5j * l
    return _pair(rs.level(l), l, h - 1j, h) + _pair(rs.level(l + 1), l + 1, h + 0.5j, h - 0.5j)


def _snp_lower_factors(sig: GradingSignature, rs: BetheRootSet, l: int) -> list[Factor]:
    n = sig.N // 2
    if l == 0:
        c = 0.5j * KinematicFns(sig).vacuum_sign
        return _pair(rs.level(1), 1, -c, c)
    # the ascending/descending forms, read with i -> -i (calibrated against
    # the oracle for sl(2), sl(3), sl(4), sl(1|2), sl(3|2))
    if l < n:
        h = -0.5j * l
        return _pair(rs.level(l), l, h - 1j, h) + _pair(rs.level(l + 1), l + 1, h + 0.5j, h - 0.5j)
    h = -1j * n + 0.5j * l
    return _pair(rs.level(l), l, h + 1j, h) + _pair(rs.level(l + 1), l + 1, h - 0.5j, h + 0.5j)


def _snp_middle_factors(sig: GradingSignature, rs: BetheRootSet, k: int) -> list[Factor]:
    n = sig.N // 2
    h = -1j * n + 0.5j * k
    return _pair(rs.level(k), k, h + 1j, h) + _pair(rs.level(k), k, h - 0.5j, h + 0.5j)


def dressing_factors(case: Case, sig: GradingSignature, l: int, rs: BetheRootSet) -> list[Factor]:
    """Factor list of ``A_l``; SNP levels above the fold via crossing."""
    d = sig.dim
    if case is Case.SP:
        return _sp_dressing_factors(sig, rs, l)
    half = (sig.M - 1) / 2 + sig.N // 2  # lower levels: l < n + (M-1)/2
    if l < half:
        return _snp_lower_factors(sig, rs, l)
    if sig.M % 2 == 1 and l == sig.M // 2 + sig.N // 2:
        return _snp_middle_factors(sig, rs, l)
    return [f.crossed(sig.rho) for f in dressing_factors(case, sig, d - 1 - l, rs)]


def _eval_factors(factors: list[Factor], x) -> complex:
    out = 1.0 + 0j
    for f in factors:
        out *= f(x)
    return out


def dressing(case: Case, sig: GradingSignature, l: int, rs: BetheRootSet, x) -> complex:
    """``A_l(x)``."""
    return _eval_factors(dressing_factors(case, sig, l, rs), complex(x))


def dressed_terms(chain: ChainSpec, rs: BetheRootSet, x) -> list:
    case = case_of(chain)
    w = vacuum_weights(chain, complex(x))
    return [w[l] * dressing(case, chain.sig, l, rs, x) for l in range(chain.sig.dim)]


def dressed_eigenvalue(chain: ChainSpec, rs: BetheRootSet, x) -> complex:
    return complex(sum(dressed_terms(chain, rs, x)))


# --------------------------------------------------------------------------
# analyticity


def analyticity_check(case: Case, sig: GradingSignature, rs: BetheRootSet) -> dict:
    """Check the dressing identities that make the internal poles cancel.

    SP: ``A_l(-il/2) = A_{l-1}(-il/2)`` for ``l = 1..M-1`` and
    ``A_{2M-l}(-il/2) = A_{2M-l-1}(-il/2)`` for ``l = M-N+1..M-1``.
    SNP: the crossing completion ``A_l(x) = A_{d-1-l}(-x - i rho)`` at a
    generic point, plus ``A_l = A_{l-1}`` at ``i*l/2`` (``l <= n``) or
    ``i*(2n-l)/2`` (``l > n``) up to the fold.
    """
    devs: dict[str, float] = {}
    M, N, d = sig.M, sig.N, sig.dim

    def point_dev(a: int, b: int, pt: complex) -> float:
        try:
            va = dressing(case, sig, a, rs, pt)
            vb = dressing(case, sig, b, rs, pt)
        except PoleError:
            # move off the exact point along a symmetric direction
            va = dressing(case, sig, a, rs, pt + 1e-7)
            vb = dressing(case, sig, b, rs, pt + 1e-7)
        return float(abs(va - vb) / max(1.0, abs(va), abs(vb)))

    if case is Case.SP:
        for l in range(1, M):
            devs[f"A{l}=A{l-1}@-i{l}/2"] = point_dev(l, l - 1, -0.5j * l)
        for l in range(max(M - N + 1, 1), M):
            a, b = 2 * M - l, 2 * M - l - 1
            if 0 <= b and a < d:
                devs[f"A{a}=A{b}@-i{l}/2"] = point_dev(a, b, -0.5j * l)
    else:
        n = N // 2
        half = (M - 1) / 2 + n
        for l in range(1, d):
            if l >= half + 1:
                break
            k = l if l <= n else 2 * n - l
            devs[f"A{l}=A{l-1}@i{k}/2"] = point_dev(l, l - 1, 0.5j * k)
        pt = 0.3137 + 0.2719j
        rho = complex(0, float(sig.rho))
        for l in range(d):
            va = dressing(case, sig, l, rs, pt)
            vb = dressing(case, sig, d - 1 - l, rs, -pt - rho)
            devs[f"cross{l}"] = float(abs(va - vb) / max(1.0, abs(va)))
    return {"max_deviation": max(devs.values(), default=0.0), "checks": devs}


def vacuum_poles(chain: ChainSpec) -> list[complex]:
    """Poles of the individual vacuum weights ``w_l`` (they cancel in the sum)."""
    sig = chain.sig
    if case_of(chain) is Case.SNP:
        return [-0.5j * float(sig.rho)]
    M, out = sig.M, set()
    for l in range(sig.dim):
        ks = (l, l + 1) if l < M else (2 * M - l - 1, 2 * M - l)
        out.update(ks)
    return [-0.5j * k for k in sorted(out)]


def residue_table(chain: ChainSpec, rs: BetheRootSet, tol: float = 1e-9) -> list[dict]:
    """Residue of the dressed eigenvalue at every dressing or vacuum pole.

    Each entry: ``pole``, ``residue`` (sum over terms), ``scale`` (largest
    single-term contribution).  Coinciding poles from different sources are
    reported once.
    """
    case = case_of(chain)
    sig, d = chain.sig, chain.sig.dim
    facs = [dressing_factors(case, sig, l, rs) for l in range(d)]
    poles: list[complex] = []
    for p in [-f.den for fl in facs for f in fl] + vacuum_poles(chain):
        if not any(abs(p - q) < tol for q in poles):
            poles.append(p)
    out = []
    for p in poles:
        total, scale = 0j, 0.0
        for l, fl in enumerate(facs):
            c = _term_residue(chain, l, fl, p, tol)
            total += c
            scale = max(scale, abs(c))
        out.append({"pole": p, "residue": total, "scale": scale})
    return out


def _term_residue(chain: ChainSpec, l: int, factors: list[Factor], p: complex, tol: float) -> complex:
    """Residue of ``w_l * A_l`` at ``p`` (0 if regular there).

    A single simple dressing pole is handled in closed form; coinciding
    poles (several factors, or a vacuum-weight pole) use a small-circle
    average.
    """
    hits = [f for f in factors if abs(p + f.den) < tol]
    try:
        w = vacuum_weights(chain, p)[l]
    except PoleError:
        w = None
    if w is not None and not hits:
        return 0j
    if w is None or len(hits) > 1:
        return _numeric_residue(lambda x: vacuum_weights(chain, x)[l] * _eval_factors(factors, x), p)
    others = [f for f in factors if f is not hits[0]]
    return w * (p + hits[0].num) * _eval_factors(others, p)


def _numeric_residue(fn, p: complex, r: float = 1e-4, k: int = 16) -> complex:
    z = r * np.exp(2j * np.pi * (np.arange(k) + 0.5) / k)
    return complex(np.mean([fn(p + zz) * zz for zz in z]))


# generic point used to set the absolute size of the dressed eigenvalue
_REFERENCE_POINT = 0.37 + 0.61j


def residue_cancellation(chain: ChainSpec, rs: BetheRootSet, floor: float = 1e-6) -> float:
    """Max relative residue ``|sum| / scale`` over all dressing poles.

    ``scale`` is the largest single-term residue, but never less than
    ``floor * |Lambda|`` at a generic point: a pole whose terms are all
    negligible (e.g. cancelled by a vacuum zero) is not a pole.
    """
    try:
        ref = abs(dressed_eigenvalue(chain, rs, _REFERENCE_POINT))
    except PoleError:
        ref = 0.0
    worst = 0.0
    for entry in residue_table(chain, rs):
        scale = max(entry["scale"], floor * ref)
        if scale > 0:
            worst = max(worst, abs(entry["residue"]) / scale)
    return worst


# --------------------------------------------------------------------------
# Bethe equations


@dataclass(frozen=True)
class LevelRule:
    """One displayed Bethe equation: ``lhs(u) = sign * prod(rhs factors)``."""

    level: int
    lhs_e1_power: int = 0  # e_1(u)^power on the left
    lhs_extra: tuple = ()  # extra e_x(u) factors on the left: (x, power)
    sign: int = -1
    self_factors: tuple = ((2, 1),)  # (x, power) of e_x(u -+ u_j) over same level
    neighbours: tuple = ()  # (level, x, power)


def level_rules(chain: ChainSpec) -> list[LevelRule]:
    case = case_of(chain)
    sig = chain.sig
    K = levels_count(case, sig)
    L2 = 2 * chain.double_row_length
    rules = []
    if case is Case.SP:
        M = sig.M
        for l in range(1, K + 1):
            power = L2 if l == 1 else 0
            if l == M and sig.N > 0:
                nb = [(l - 1, -1, 1), (l + 1, 1, 1)]
                rules.append(LevelRule(l, power, (), 1, (), tuple(x for x in nb if 1 <= x[0] <= K)))
            else:
                nb = [(l - 1, -1, 1), (l + 1, -1, 1)]
                rules.append(LevelRule(l, power, (), -1, ((2, 1),), tuple(x for x in nb if 1 <= x[0] <= K)))
        return rules
    n, k = sig.N // 2, K
    for l in range(1, K + 1):
        power = L2 if l == 1 else 0
        lower = (l - 1, -1, 1)
        upper = (l + 1, -1, 1)
        if l == k:
            if sig.M % 2 == 1:
                rules.append(LevelRule(l, power, ((-0.5, 1),), -1, ((2, 1), (-1, 1)), tuple(x for x in [lower] if x[0] >= 1)))
            else:
                rules.append(LevelRule(l, power, ((1, 1),), -1, ((2, 1),), tuple((a, b, 2) for a, b, _ in [lower] if a >= 1)))
        elif l == n:
            nb = [(l + 1, 1, 1), (l - 1, -1, 1)]
            rules.append(LevelRule(l, power, (), 1, (), tuple(x for x in nb if 1 <= x[0] <= K)))
        else:
            nb = [lower, upper]
            rules.append(LevelRule(l, power, (), -1, ((2, 1),), tuple(x for x in nb if 1 <= x[0] <= K)))
    return rules


def _boundary_lhs(chain: ChainSpec, level: int, u: complex) -> complex:
    b = chain.boundary_minus
    if b is None:
        return 1.0
    out = 1.0 + 0j
    if b.kind is BoundaryKind.SP and b.blocks is not None:
        m1, m2, n2, _ = b.blocks
        xi = _as_complex(b.xi)
        if level == m1:
            out *= -1.0 / _e_complex(2 * xi + m1, u)
        if level == chain.sig.M + n2:
            out *= -1.0 / _e_complex(2 * xi + m1 - m2 - n2, u)
    if b.kind is BoundaryKind.SNP and b.k_diag is not None:
        k = [_as_complex(x) for x in b.k_diag]
        out *= k[level - 1] / k[level]
    return out


def _e_complex(x: complex, u: complex) -> complex:
    h = 0.5j * complex(x)
    return _div(u + h, u - h, f"of e_{x}")


def _displayed_residuals(chain: ChainSpec, rs: BetheRootSet, policy: SelfTermPolicy) -> np.ndarray:
    out = []
    for rule in level_rules(chain):
        roots = rs.level(rule.level)
        for i, u in enumerate(roots):
            lhs = _e_complex(1, u) ** rule.lhs_e1_power * _boundary_lhs(chain, rule.level, u)
            for x, pw in rule.lhs_extra:
                lhs *= _e_complex(x, u) ** pw
            rhs = complex(rule.sign)
            for j, v in enumerate(roots):
                if j == i and policy is SelfTermPolicy.EXCLUDE_SELF:
                    continue
                for x, pw in rule.self_factors:
                    rhs *= (_e_complex(x, u - v) * _e_complex(x, u + v)) ** pw
            for lvl, x, pw in rule.neighbours:
                for v in rs.level(lvl):
                    rhs *= (_e_complex(x, u - v) * _e_complex(x, u + v)) ** pw
            out.append(lhs / rhs - 1.0)
    return np.array(out, dtype=complex)


def _pole_pair(chain: ChainSpec, rs: BetheRootSet, level: int, index: int):
    """Pole carried by root ``(level, index)`` and the two terms sharing it."""
    case = case_of(chain)
    sig, d = chain.sig, chain.sig.dim
    facs = [dressing_factors(case, sig, l, rs) for l in range(d)]
    u = rs.level(level)[index]
    candidates: dict = {}
    for l, fl in enumerate(facs):
        for f in fl:
            if f.level == level and f.index == index and f.sign == -1:
                # factor (lam - u + c_num) / (lam - u + c_den): pole at u - c_den
                c_den = f.den + u
                candidates.setdefault((round(c_den.real, 9), round(c_den.imag, 9)), set()).add(l)
    for shift, terms in sorted(candidates.items()):
        if len(terms) == 2:
            return complex(*shift), sorted(terms), facs
    raise ValueError(f"no shared pole for root {index} of level {level}")


def _residue_residuals(chain: ChainSpec, rs: BetheRootSet, pinned: int | tuple = 0) -> np.ndarray:
    """Residue-ratio equations; the first ``pinned[level-1]`` roots of each
    level are held fixed and get no equation."""
    if isinstance(pinned, int):
        pinned = (pinned,) * len(rs.counts)
    out = []
    for level in range(1, len(rs.counts) + 1):
        for i, u in enumerate(rs.level(level)):
            if i < pinned[level - 1]:
                continue
            shift, (l1, l2), facs = _pole_pair(chain, rs, level, i)
            p = u - shift
            c1 = _term_residue(chain, l1, facs[l1], p, 1e-12)
            c2 = _term_residue(chain, l2, facs[l2], p, 1e-12)
            out.append(_div(c1, -c2, "in residue ratio") - 1.0)
    return np.array(out, dtype=complex)


def _exceptional_first(chain: ChainSpec, rs: BetheRootSet, tol: float = 1e-9):
    """Reorder each level so roots at exceptional positions come first."""
    values = exceptional_values(chain)

    def special(u: complex) -> bool:
        return any(min(abs(u - e), abs(u + e)) < tol for e in values)

    levels, pinned = [], []
    for lv in rs.roots:
        head = [u for u in lv if special(u)]
        levels.append(tuple(head) + tuple(u for u in lv if not special(u)))
        pinned.append(len(head))
    return BetheRootSet(rs.counts, tuple(levels)), tuple(pinned)


def bethe_residuals(chain: ChainSpec, rs: BetheRootSet, policy: SelfTermPolicy = DEFAULT_SELF_TERM_POLICY) -> np.ndarray:
    """One complex residual per non-exceptional root; all vanish on a solution.

    Under the residue policy, roots at exceptional positions (see
    :func:`exceptional_values`) carry no equation and are skipped.
    """
    policy = SelfTermPolicy(policy)
    if policy is SelfTermPolicy.RESIDUE:
        ordered, pinned = _exceptional_first(chain, rs)
        return _residue_residuals(chain, ordered, pinned)
    return _displayed_residuals(chain, rs, policy)


# --------------------------------------------------------------------------
# solver


@dataclass
class SolverSettings:
    seeds: int = 40
    max_iter: int = 200
    tol: float = 1e-12
    step_tol: float = 1e-14
    halvings: int = 20
    seed: int = 0
    accept: float = 1e-10
    singular_tol: float = 1e-6
    # roots drifting this far out are limits of descendant states, not solutions
    max_root: float = 1e4
    max_condition: float = 1e8
    # exceptional roots (SNP only): how many copies of the crossing fixed
    # point may be pinned per level, and the analyticity gate they must pass
    max_exceptional: int = 2
    analytic_tol: float = 1e-8


def _jacobian(fun, z: np.ndarray, f: np.ndarray | None = None, h: float = 1e-7) -> np.ndarray:
    J = np.empty((z.size, z.size), dtype=complex)
    for k in range(z.size):
        dz = np.zeros_like(z)
        dz[k] = h
        J[:, k] = (fun(z + dz) - fun(z - dz)) / (2 * h)
    return J


def _newton(fun, z0: np.ndarray, s: SolverSettings):
    z = z0.astype(complex)
    try:
        f = fun(z)
    except (PoleError, ValueError):
        return None
    norm = np.abs(f).max() if f.size else 0.0
    for _ in range(s.max_iter):
        if norm < s.tol:
            break
        try:
            step = np.linalg.solve(_jacobian(fun, z), -f)
        except (np.linalg.LinAlgError, PoleError, ValueError):
            return None
        t = 1.0
        for _ in range(s.halvings):
            try:
                trial = z + t * step
                ft = fun(trial)
                nt = np.abs(ft).max()
            except (PoleError, ValueError):
                nt = np.inf
            if nt < norm:
                break
            t *= 0.5
        else:
            return None
        z, f, norm = trial, ft, nt
        if np.abs(t * step).max() < s.step_tol:
            break
    return z, norm


def _is_singular(chain: ChainSpec, rs: BetheRootSet, tol: float) -> bool:
    """Roots at 0, coinciding (up to sign) within a level, or near e-poles."""
    for level in rs.roots:
        for i, u in enumerate(level):
            if abs(u) < tol:
                return True
            for v in level[i + 1 :]:
                if abs(u - v) < tol or abs(u + v) < tol:
                    return True
    return False


def exceptional_values(chain: ChainSpec) -> tuple:
    """Root positions that the residue equations cannot describe.

    In the SNP case a root at ``i/2`` or ``0`` (equivalently ``-i/2``, since
    roots are defined up to sign) puts its own poles on top of zeros of the
    vacuum weights or of its partner factor, so the shared-pole ratio
    degenerates to 0/0.  Such roots do occur in the spectrum (already for
    sl(2) with four sites); they are pinned and the resulting eigenvalue is
    accepted on analyticity alone.
    """
    if case_of(chain) is Case.SNP:
        return (0.5j, 0j)
    return ()


def _pinning_patterns(counts: tuple, values: tuple, cap: int):
    """Per-level pinned roots: tuples of tuples of exceptional values."""
    per_level = []
    for c in counts:
        opts = [()]
        for m in range(1, min(c, cap) + 1):
            opts.extend(itertools.combinations_with_replacement(values, m))
        per_level.append(opts)
    return list(itertools.product(*per_level))


def solve_bethe(
    chain: ChainSpec,
    counts,
    settings: SolverSettings | None = None,
    policy: SelfTermPolicy = DEFAULT_SELF_TERM_POLICY,
) -> list[BetheRootSet]:
    """Damped-Newton solutions of the Bethe equations for fixed ``counts``.

    Seeds: random complex points plus a grid along the real axis and the
    ``i/2``-shifted line (two-string positions).  Solutions are deduplicated
    up to permutations and ``u -> -u``; singular ones are dropped.  With the
    residue policy, SNP root sets may also contain exceptional roots (see
    :func:`exceptional_values`), accepted only if the dressed eigenvalue is
    pole-free.
    """
    s = settings or SolverSettings()
    case = case_of(chain)
    K = levels_count(case, chain.sig)
    counts = tuple(counts) + (0,) * (K - len(counts))
    if len(counts) != K:
        raise ValueError(f"expected {K} level counts")
    if sum(counts) == 0:
        return [BetheRootSet(counts, ((),) * K)]
    policy = SelfTermPolicy(policy)
    values = exceptional_values(chain) if policy is SelfTermPolicy.RESIDUE else ()
    rng = np.random.default_rng(s.seed)
    found: list[BetheRootSet] = []
    for pins in _pinning_patterns(counts, values, s.max_exceptional):
        free = tuple(c - len(p) for c, p in zip(counts, pins))
        for rs in _solve_free(chain, counts, pins, free, s, policy, rng):
            if not any(rs.same_as(f) for f in found):
                found.append(rs)
    return found


def _solve_free(chain, counts, pins, free, s: SolverSettings, policy, rng):
    pinned = tuple(len(p) for p in pins)
    total = sum(free)

    def assemble(z) -> BetheRootSet:
        roots, k = [], 0
        for p, f in zip(pins, free):
            roots.append(tuple(p) + tuple(complex(v) for v in z[k : k + f]))
            k += f
        return BetheRootSet(counts, tuple(roots))

    def fun(z):
        rs = assemble(z)
        if policy is SelfTermPolicy.RESIDUE:
            return _residue_residuals(chain, rs, pinned)
        return bethe_residuals(chain, rs, policy)

    def admissible(rs: BetheRootSet, z) -> bool:
        free_roots = BetheRootSet(free, tuple(lv[n:] for lv, n in zip(rs.roots, pinned)))
        if _is_singular(chain, free_roots, s.singular_tol):
            return False
        for lv, n in zip(rs.roots, pinned):
            if any(min(abs(u - e), abs(u + e)) < s.singular_tol for u in lv[n:] for e in lv[:n]):
                return False
        if not np.all(np.isfinite(rs.flat())) or np.any(np.abs(rs.flat()) > s.max_root):
            return False
        if any(pinned):
            try:
                return residue_cancellation(chain, rs) < s.analytic_tol
            except (PoleError, ValueError):
                return False
        return True

    if total == 0:
        rs = assemble(np.zeros(0, dtype=complex))
        return [rs.canonical()] if admissible(rs, None) else []
    seeds = []
    grid = [0.15, 0.35, 0.6, 1.0, 1.7]
    for combo in itertools.islice(itertools.permutations(grid, total), 30):
        seeds.append(np.array(combo, dtype=complex) + 0.01j)
    for _ in range(s.seeds):
        seeds.append(rng.normal(scale=1.0, size=total) + 1j * rng.normal(scale=0.6, size=total))
    out: list[BetheRootSet] = []
    for z0 in seeds:
        res = _newton(fun, z0, s)
        if res is None:
            continue
        z, norm = res
        if norm > s.accept:
            continue
        rs = assemble(z)
        if not admissible(rs, z):
            continue
        try:
            if np.linalg.cond(_jacobian(fun, z)) > s.max_condition:
                continue  # converged onto a non-isolated family
        except (PoleError, ValueError):
            continue
        rs = rs.canonical()
        if any(rs.same_as(f) for f in out):
            continue
        out.append(rs)
    return out


# --------------------------------------------------------------------------
# oracle matching


@dataclass
class MatchReport:
    lambdas: list
    curve_values: np.ndarray
    assignments: list  # per curve: (rootset index or None, deviation)
    rootsets: list
    tolerance: float

    @property
    def matched(self) -> int:
        return sum(1 for idx, dev in self.assignments if idx is not None and dev < self.tolerance)

    @property
    def total(self) -> int:
        return len(self.assignments)

    @property
    def complete(self) -> bool:
        return self.matched == self.total

    def to_dict(self) -> dict:
        return {
            "curves": self.total,
            "matched": self.matched,
            "tolerance": self.tolerance,
            "assignments": [
                {"curve": c, "rootset": idx, "deviation": repr(float(dev))} for c, (idx, dev) in enumerate(self.assignments)
            ],
            "rootsets": [r.to_dict() for r in self.rootsets],
        }


def curve_deviation(chain: ChainSpec, rs: BetheRootSet, lambdas, values) -> float:
    try:
        pred = np.array([dressed_eigenvalue(chain, rs, x) for x in lambdas])
    except PoleError:
        return float("inf")
    return float(np.max(np.abs(pred - values) / np.maximum(np.abs(values), 1e-300)))


def match_spectrum(chain: ChainSpec, rootsets, lambdas, tolerance: float = 1e-8, seed: int = 0) -> MatchReport:
    curves = spectral_curves(chain, lambdas, seed=seed)
    assignments = []
    for c in range(curves.count):
        best = (None, float("inf"))
        for k, rs in enumerate(rootsets):
            dev = curve_deviation(chain, rs, curves.lambdas, curves.values[c])
            if dev < best[1]:
                best = (k, dev)
        assignments.append(best)
    return MatchReport(list(curves.lambdas), curves.values, assignments, list(rootsets), tolerance)
