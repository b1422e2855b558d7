"""Boundary K-matrices: construction, reflection-equation residuals, classification.

A soliton-preserving (SP) K-matrix is stored through its coefficient pair
``K(l) = A + l*B``; soliton non-preserving (SNP) K-matrices are constant.
Everything here runs on the exact backend: residuals are bivariate
polynomial matrices in ``(l1, l2)`` that must vanish identically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .exact import I, L1, L2, ExactMatrix, gauss, gaussian_sqrt, poly, to_fraction_pair
from .graded import GradingSignature, embed, swap_slots, twisted_transpose
from .yang_baxter import r_matrix


class BoundaryKind(str, Enum):
    SP = "SP"
    SNP = "SNP"


class BoundaryError(ValueError):
    """Inconsistent or singular boundary data."""


def _as_matrix(data, d: int) -> ExactMatrix:
    m = data if isinstance(data, ExactMatrix) else ExactMatrix.from_array(data)
    if m.n != d:
        raise BoundaryError(f"expected a {d}x{d} matrix, got {m.n}x{m.n}")
    return m


@dataclass(frozen=True)
class KFamily:
    """``K(l) = A + l*B`` with constant exact coefficient matrices."""

    A: ExactMatrix
    B: ExactMatrix

    @property
    def dim(self) -> int:
        return self.A.n

    def exact(self, lam=L1) -> ExactMatrix:
        return self.A + self.B * poly(lam)

    def at(self, lam: complex) -> np.ndarray:
        return self.A.to_numpy() + complex(lam) * self.B.to_numpy()

    @property
    def is_constant(self) -> bool:
        return self.B.is_zero()

    @classmethod
    def constant(cls, K: ExactMatrix) -> "KFamily":
        return cls(K, ExactMatrix.zeros(K.n))


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary data for one end of an open chain.

    SP: ``blocks=(m1, m2, n2, n1)`` gives the diagonal solution
    ``diag(alpha.., beta.., beta.., alpha..)`` with ``alpha=-l+i*xi`` and
    ``beta=l+i*xi``; ``nilpotent`` gives ``i*xi + l*E``; either may be
    conjugated by ``conjugator``.  ``affine=(A, B)`` gives an arbitrary
    ``A + l*B`` (not necessarily a solution; used for negative controls and
    for classifying user data).  With none of these, ``K`` is the identity.

    SNP: ``k_diag`` (palindromic) or ``k_matrix`` gives the constant
    ``Ktilde`` with ``Ktilde^t = epsilon * Ktilde``.
    """

    kind: BoundaryKind = BoundaryKind.SP
    xi: object = 0
    blocks: tuple | None = None
    conjugator: tuple | None = None
    nilpotent: tuple | None = None
    epsilon: int = 1
    k_diag: tuple | None = None
    k_matrix: tuple | None = None
    affine: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", BoundaryKind(self.kind))
        if self.kind is BoundaryKind.SP:
            given = [x is not None for x in (self.blocks, self.nilpotent, self.affine)]
            if sum(given) > 1:
                raise BoundaryError("choose one of diagonal blocks, a nilpotent E or an affine (A, B) pair")
        if self.epsilon not in (1, -1):
            raise BoundaryError("epsilon must be +1 or -1")

    # convenience constructors ---------------------------------------------
    @classmethod
    def identity(cls, kind: BoundaryKind | str = BoundaryKind.SP) -> "BoundarySpec":
        return cls(kind=BoundaryKind(kind))

    @classmethod
    def diagonal(cls, blocks, xi, conjugator=None) -> "BoundarySpec":
        return cls(kind=BoundaryKind.SP, xi=xi, blocks=tuple(blocks), conjugator=_freeze(conjugator))

    @classmethod
    def nilpotent_family(cls, E, xi, conjugator=None) -> "BoundarySpec":
        return cls(kind=BoundaryKind.SP, xi=xi, nilpotent=_freeze(E), conjugator=_freeze(conjugator))

    @classmethod
    def affine_family(cls, A, B, conjugator=None) -> "BoundarySpec":
        return cls(kind=BoundaryKind.SP, affine=(_freeze(A), _freeze(B)), conjugator=_freeze(conjugator))

    @classmethod
    def snp_diagonal(cls, k) -> "BoundarySpec":
        return cls(kind=BoundaryKind.SNP, k_diag=tuple(k), epsilon=1)

    @classmethod
    def snp_matrix(cls, K, epsilon: int = 1) -> "BoundarySpec":
        return cls(kind=BoundaryKind.SNP, k_matrix=_freeze(K), epsilon=epsilon)

    @property
    def is_trivial(self) -> bool:
        return all(x is None for x in (self.blocks, self.nilpotent, self.affine, self.k_diag, self.k_matrix))

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.kind is BoundaryKind.SP:
            if self.blocks is not None:
                out["blocks"] = list(self.blocks)
            if self.nilpotent is not None:
                out["nilpotent"] = _serial(self.nilpotent)
            if self.blocks is not None or self.nilpotent is not None:
                out["xi"] = _scalar_text(self.xi)
            if self.affine is not None:
                out["affine"] = {"A": _serial(self.affine[0]), "B": _serial(self.affine[1])}
            if self.conjugator is not None:
                out["conjugator"] = _serial(self.conjugator)
        else:
            out["epsilon"] = self.epsilon
            if self.k_diag is not None:
                out["k_diag"] = [_scalar_text(k) for k in self.k_diag]
            if self.k_matrix is not None:
                out["k_matrix"] = _serial(self.k_matrix)
        return out


def _freeze(m):
    if m is None:
        return None
    if isinstance(m, ExactMatrix):
        return tuple(tuple(m[(r, c)].LC if m[(r, c)] else 0 for c in range(m.n)) for r in range(m.n))
    return tuple(tuple(row) for row in np.asarray(m, dtype=object).tolist())


def _scalar_text(x) -> str:
    from .exact import format_scalar

    return format_scalar(x)


def _serial(m) -> list:
    return [[_scalar_text(x) for x in row] for row in m]


# --------------------------------------------------------------------------
# builders


def diagonal_entries(blocks, xi, lam=L1) -> list:
    m1, m2, n2, n1 = blocks
    alpha = -poly(lam) + I * gauss(xi)
    beta = poly(lam) + I * gauss(xi)
    return [alpha] * m1 + [beta] * (m2 + n2) + [alpha] * n1


def _conjugate(sig: GradingSignature, fam: KFamily, U) -> KFamily:
    if U is None:
        return fam
    Um = _as_matrix(U, sig.dim)
    try:
        Uinv = Um.constant_inverse()
    except np.linalg.LinAlgError as exc:
        raise BoundaryError("conjugator U is singular") from exc
    return KFamily(Um @ fam.A @ Uinv, Um @ fam.B @ Uinv)


def build_sp_k(sig: GradingSignature, spec: BoundarySpec) -> KFamily:
    """SP K-matrix family for ``spec``; identity when no data is given."""
    if spec.kind is not BoundaryKind.SP:
        raise BoundaryError("build_sp_k needs an SP boundary")
    d = sig.dim
    xi = gauss(spec.xi)
    if spec.blocks is not None:
        m1, m2, n2, n1 = (int(b) for b in spec.blocks)
        if min(m1, m2, n2, n1) < 0 or m1 + m2 != sig.M or n1 + n2 != sig.N:
            raise BoundaryError(f"blocks {spec.blocks} do not fit sl({sig.M}|{sig.N})")
        signs = [-1] * m1 + [1] * (m2 + n2) + [-1] * n1
        fam = KFamily(ExactMatrix.identity(d, I * xi), ExactMatrix.from_array(np.diag(signs)))
    elif spec.nilpotent is not None:
        E = _as_matrix(spec.nilpotent, d)
        if not (E @ E).is_zero():
            raise BoundaryError("nilpotent E must square to zero")
        fam = KFamily(ExactMatrix.identity(d, I * xi), E)
    elif spec.affine is not None:
        fam = KFamily(_as_matrix(spec.affine[0], d), _as_matrix(spec.affine[1], d))
    else:
        fam = KFamily.constant(ExactMatrix.identity(d))
    return _conjugate(sig, fam, spec.conjugator)


def build_snp_k(sig: GradingSignature, spec: BoundarySpec) -> ExactMatrix:
    """Constant SNP matrix ``Ktilde``; checks ``Ktilde^t = epsilon * Ktilde``."""
    if spec.kind is not BoundaryKind.SNP:
        raise BoundaryError("build_snp_k needs an SNP boundary")
    d = sig.dim
    if spec.k_diag is not None:
        k = [gauss(x) for x in spec.k_diag]
        if len(k) != d:
            raise BoundaryError(f"need {d} diagonal entries")
        if any(k[j] != k[d - 1 - j] for j in range(d)):
            raise BoundaryError("diagonal entries must be palindromic")
        K = ExactMatrix(d, {(j, j): poly(k[j]) for j in range(d)})
    elif spec.k_matrix is not None:
        K = _as_matrix(spec.k_matrix, d)
    else:
        K = ExactMatrix.identity(d)
    if not (twisted_transpose(sig, K, 0, 1) - K * spec.epsilon).is_zero():
        raise BoundaryError(f"Ktilde is not {'symmetric' if spec.epsilon == 1 else 'antisymmetric'} under ^t")
    return K


# --------------------------------------------------------------------------
# reflection equations


def sp_re_residual(sig: GradingSignature, fam: KFamily) -> ExactMatrix:
    """``R12(l1-l2) K1(l1) R21(l1+l2) K2(l2) - K2(l2) R12(l1+l2) K1(l1) R21(l1-l2)``."""
    r_minus = r_matrix(sig, L1 - L2)
    r_plus = r_matrix(sig, L1 + L2)
    k1 = embed(sig, fam.exact(L1), [0], 2)
    k2 = embed(sig, fam.exact(L2), [1], 2)
    return r_minus @ k1 @ swap_slots(sig, r_plus) @ k2 - k2 @ r_plus @ k1 @ swap_slots(sig, r_minus)


def snp_re_residual(sig: GradingSignature, K) -> ExactMatrix:
    """``R12(l1-l2) K1 R21^t1(l1+l2) K2 - K2 R12^t1(l1+l2) K1 R21(l1-l2)``
    for a constant ``K`` (an :class:`ExactMatrix` or a constant family)."""
    if isinstance(K, KFamily):
        if not K.is_constant:
            raise BoundaryError("SNP residual expects a constant matrix")
        K = K.A
    r_minus = r_matrix(sig, L1 - L2)
    r_plus = r_matrix(sig, L1 + L2)
    k1 = embed(sig, K, [0], 2)
    k2 = embed(sig, K, [1], 2)
    rt21 = twisted_transpose(sig, swap_slots(sig, r_plus), 0)
    rt12 = twisted_transpose(sig, r_plus, 0)
    return r_minus @ k1 @ rt21 @ k2 - k2 @ rt12 @ k1 @ swap_slots(sig, r_minus)


# --------------------------------------------------------------------------
# classification of SP solutions


class SPClass(str, Enum):
    DIAGONALIZABLE = "Diagonalizable"
    NILPOTENT = "Nilpotent"
    NOT_A_SOLUTION = "NotASolution"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class SPClassification:
    """Outcome of :func:`classify_sp`.

    For diagonalisable families ``signature = (#(-1), #(+1))`` are the
    eigenvalue multiplicities of the normalised ``E`` (``E^2 = 1``).  The
    representation ``K ~ i*xi + l*E`` is unique only up to
    ``(xi, E) -> (-xi, -E)``; when ``xi`` is a Gaussian rational the
    representative with ``Re xi > 0`` (or ``Re xi = 0``, ``Im xi >= 0``) is
    chosen and ``ordered`` is true.  Otherwise (or when ``xi = 0``) the
    signature is reported with ``#(-1) <= #(+1)``.  ``xi_squared`` is always
    exact.  Nilpotent families report the number of Jordan blocks of size two
    (``rank E``).
    """

    kind: SPClass
    signature: tuple | None = None
    xi: object = None
    xi_squared: object = None
    ordered: bool = False
    jordan_rank: int | None = None
    constant: bool = False
    detail: str = ""

    def to_dict(self) -> dict:
        from .exact import format_scalar

        out: dict = {"class": self.kind.value}
        if self.signature is not None:
            out["signature"] = {"minus": self.signature[0], "plus": self.signature[1], "ordered": self.ordered}
        if self.xi is not None:
            out["xi"] = format_scalar(self.xi)
        if self.xi_squared is not None:
            out["xi_squared"] = format_scalar(self.xi_squared)
        if self.jordan_rank is not None:
            out["jordan_rank"] = self.jordan_rank
        if self.constant:
            out["constant"] = True
        if self.detail:
            out["detail"] = self.detail
        return out


def family_from_samples(samples) -> KFamily:
    """Recover ``K = A + l*B`` from ``[(l, matrix), ...]`` (at least 3 points).

    The first two samples fix ``A`` and ``B`` exactly; every further sample
    must agree, otherwise :class:`BoundaryError` (K is not linear in ``l``).
    """
    pts = [(gauss(lam), m if isinstance(m, ExactMatrix) else ExactMatrix.from_array(m)) for lam, m in samples]
    if len(pts) < 3:
        raise BoundaryError("need samples at three or more distinct points")
    if len({(p.x, p.y) for p, _ in pts}) != len(pts):
        raise BoundaryError("sample points must be distinct")
    (l0, k0), (l1, k1) = pts[0], pts[1]
    B = (k1 - k0) * (1 / (l1 - l0))
    A = k0 - B * l0
    for lam, k in pts[2:]:
        if not (A + B * lam - k).is_zero():
            raise BoundaryError("K is not linear in the spectral parameter")
    return KFamily(A, B)


def _scalar_of(m: ExactMatrix):
    """``c`` when ``m == c * 1`` for a constant ``c`` (possibly 0), else ``None``."""
    c = m[(0, 0)]
    if c and not c.is_ground:
        return None
    return (c.LC if c else gauss(0)) if m == ExactMatrix.identity(m.n, c) else None


def _is_generically_invertible(fam: KFamily) -> bool:
    # det(A + l*B) has degree <= d; d+1 distinct points decide it exactly
    return any(
        (fam.A + fam.B * gauss(k)).constant_rank() == fam.dim for k in range(fam.dim + 1)
    )


def _signature_from(trace, beta, d: int):
    """Return ``|p - q|`` for ``E = B/c`` with ``c^2 = beta`` from ``tr B``."""
    ratio = trace * trace / beta
    for s in range(d, -1, -2):
        if ratio == gauss(s * s):
            return s
    return None


def classify_sp(sig: GradingSignature, family) -> SPClassification:
    """Classify an SP boundary family ``K(l) = A + l*B``.

    ``family`` is a :class:`KFamily` or a list of ``(l, matrix)`` samples at
    three or more points.  The reflection equation is checked first; a
    solution is then matched against the two canonical forms
    ``U (i xi 1 + l E) U^-1`` with ``E^2 = 1`` or ``E^2 = 0`` (up to an overall
    scalar function, which also covers constant ``K`` with ``K^2 ~ 1``).
    Everything is decided by exact arithmetic.
    """
    fam = family if isinstance(family, KFamily) else family_from_samples(family)
    if fam.dim != sig.dim:
        raise BoundaryError(f"K has dimension {fam.dim}, expected {sig.dim}")
    if not _is_generically_invertible(fam):
        raise BoundaryError("K is not invertible for generic l")
    if not sp_re_residual(sig, fam).is_zero():
        return SPClassification(SPClass.NOT_A_SOLUTION, detail="reflection-equation residual is nonzero")
    d = fam.dim
    constant = fam.is_constant
    A, B = (ExactMatrix.zeros(d), fam.A) if constant else (fam.A, fam.B)
    a = _scalar_of(A)
    if a is None:
        # non-scalar A: only l-independent directions survive (B ~ A, A^2 ~ 1)
        return _classify_nonscalar(A, B)
    B2 = B @ B
    if B2.is_zero():
        return SPClassification(
            SPClass.NILPOTENT, xi=a / I, xi_squared=-(a * a), jordan_rank=B.constant_rank(), constant=constant
        )
    beta = _scalar_of(B2)
    if beta is None:
        return SPClassification(SPClass.UNCLASSIFIED, detail="A is scalar but B^2 is not", constant=constant)
    return _diagonalizable(a, B, beta, constant)


def _diagonalizable(a, B: ExactMatrix, beta, constant: bool) -> SPClassification:
    d = B.n
    tr = B.trace().LC if B.trace() else gauss(0)
    xi_sq = -(a * a) / beta
    c = gaussian_sqrt(beta)
    if c is not None:
        if a:
            xi = a / (I * c)
            xr, xim = to_fraction_pair(xi)
            if xr < 0 or (xr == 0 and xim < 0):
                c, xi = -c, -xi
        else:
            xi = gauss(0)
        diff = tr / c  # p - q, exact
        p_minus_q = to_fraction_pair(diff)
        if p_minus_q[1] != 0 or p_minus_q[0].denominator != 1:
            return SPClassification(SPClass.UNCLASSIFIED, detail="trace of E is not an integer")
        s = int(p_minus_q[0])
        if not a and s < 0:
            s = -s
        return SPClassification(
            SPClass.DIAGONALIZABLE,
            signature=((d - s) // 2, (d + s) // 2),
            xi=xi,
            xi_squared=xi_sq,
            ordered=bool(a),
            constant=constant,
        )
    s = _signature_from(tr, beta, d)
    if s is None:
        return SPClassification(SPClass.UNCLASSIFIED, detail="trace of E is not an integer")
    return SPClassification(
        SPClass.DIAGONALIZABLE, signature=((d - s) // 2, (d + s) // 2), xi_squared=xi_sq, constant=constant
    )


def _classify_nonscalar(A: ExactMatrix, B: ExactMatrix) -> SPClassification:
    # K = A + l*B equals f(l) * (constant) only if B is a multiple of A
    key = next(iter(A.entries))
    ratio = B[key].LC / A[key].LC if B[key] else gauss(0)
    if not (B - A * ratio).is_zero():
        return SPClassification(SPClass.UNCLASSIFIED, detail="non-scalar A with B not proportional to A")
    alpha = _scalar_of(A @ A)
    if alpha is None or not alpha:
        return SPClassification(SPClass.UNCLASSIFIED, detail="constant direction with A^2 not scalar")
    return _diagonalizable(gauss(0), A, alpha, constant=True)


# --------------------------------------------------------------------------
# brute-force oracle for the SP classification
#
# The RE is invariant under K -> U K U^-1 (bosonic U) and K -> c K, so the
# constant part A can be brought to a normalised Jordan form.  For each such A
# the RE becomes a polynomial system in the (bosonic) entries of B.  We
#   * collect exact sample solutions (sympy branch solutions, plus Jordan-form
#     B when A is scalar, where B may be gauge-fixed too), and
#   * certify with a Groebner-basis radical test that every invertible
#     solution of the system lies in the classified locus.

DEFAULT_EIGEN_ALPHABET = (0, 1, -1, 2, "i")


@dataclass
class SolutionFamily:
    """All solutions ``K = A + l*B`` for one gauge-fixed constant part ``A``."""

    A: ExactMatrix
    generators: list  # the RE ideal in the entries of B (sympy expressions)
    unknowns: list  # sympy symbols, one per free entry of B
    samples: list  # KFamily instances on the solution set
    labels: list  # SPClassification per sample
    certified: bool  # every invertible solution lies in the classified locus

    def to_dict(self) -> dict:
        from .exact import format_scalar

        return {
            "A": [[format_scalar(self.A[(r, c)].LC) if self.A[(r, c)] else "0" for c in range(self.A.n)] for r in range(self.A.n)],
            "samples": len(self.samples),
            "labels": sorted({lab.kind.value for lab in self.labels}),
            "certified": self.certified,
        }


def _bilinear_re(sig: GradingSignature, X: ExactMatrix, Y: ExactMatrix) -> ExactMatrix:
    """RE residual with ``K1 -> X`` and ``K2 -> Y`` (constant matrices)."""
    r_minus = r_matrix(sig, L1 - L2)
    r_plus = r_matrix(sig, L1 + L2)
    x1 = embed(sig, X, [0], 2)
    y2 = embed(sig, Y, [1], 2)
    return r_minus @ x1 @ swap_slots(sig, r_plus) @ y2 - y2 @ r_plus @ x1 @ swap_slots(sig, r_minus)


def _bosonic_units(sig: GradingSignature) -> list:
    g = sig.grading
    return [(a, b) for a in range(sig.dim) for b in range(sig.dim) if g[a] == g[b]]


def _re_tensor(sig: GradingSignature) -> dict:
    units = _bosonic_units(sig)
    out = {}
    for u in units:
        for v in units:
            m = _bilinear_re(sig, ExactMatrix.unit(sig.dim, *u), ExactMatrix.unit(sig.dim, *v))
            if not m.is_zero():
                out[(u, v)] = m.coefficients()
    return out


def _to_sympy(z):
    import sympy

    x, y = to_fraction_pair(z)
    return sympy.Rational(x.numerator, x.denominator) + sympy.I * sympy.Rational(y.numerator, y.denominator)


def _from_sympy(v):
    import sympy

    re, im = sympy.nsimplify(v).as_real_imag()
    if not (re.is_Rational and im.is_Rational):
        return None
    return gauss((Fraction(int(re.p), int(re.q)), Fraction(int(im.p), int(im.q))))


def _re_system(sig: GradingSignature, tensor: dict, A: ExactMatrix):
    """RE equations (sympy expressions) in the unknown entries of B."""
    import sympy

    units = _bosonic_units(sig)
    syms = {u: sympy.Symbol(f"b{u[0]}{u[1]}") for u in units}
    a = {u: _to_sympy(A[u].LC) if A[u] else 0 for u in units}
    eqs: dict = {}
    for (u, v), coeffs in tensor.items():
        parts = {(0, 0): a[u] * a[v], (1, 0): syms[u] * a[v], (0, 1): a[u] * syms[v], (1, 1): syms[u] * syms[v]}
        for (p, q), val in parts.items():
            if val == 0:
                continue
            for (mp, mq), mat in coeffs.items():
                for key, c in mat.items():
                    k = (mp + p, mq + q, key)
                    eqs[k] = eqs.get(k, 0) + val * _to_sympy(c.LC)
    exprs = {sympy.expand(e) for e in eqs.values()}
    exprs.discard(0)
    return sorted(exprs, key=sympy.default_sort_key), [syms[u] for u in units], units


def _matrix_from(sig, units, values) -> ExactMatrix:
    return ExactMatrix(sig.dim, {u: poly(v) for u, v in zip(units, values) if v})


def _jordan_blocks(d: int):
    """Partitions of ``d`` (Jordan block sizes)."""
    if d == 0:
        yield ()
        return
    for first in range(d, 0, -1):
        for rest in _jordan_blocks(d - first):
            if not rest or rest[0] <= first:
                yield (first,) + rest


def _jordan_matrix(sizes, eigs) -> np.ndarray:
    d = sum(sizes)
    m = np.zeros((d, d), dtype=object)
    k = 0
    for size, e in zip(sizes, eigs):
        for j in range(size):
            m[k + j, k + j] = e
            if j + 1 < size:
                m[k + j, k + j + 1] = 1
        k += size
    return m


def gauge_fixed_constants(sig: GradingSignature, alphabet=DEFAULT_EIGEN_ALPHABET) -> list[ExactMatrix]:
    """Normalised Jordan forms for the constant part ``A``.

    Bosonic conjugations act blockwise on the graded sectors, so each sector
    gets its own Jordan form.  The overall scale is fixed by making the first
    nonzero eigenvalue 1.  Eigenvalues are drawn from ``alphabet``.
    """
    sectors = [[k for k in range(sig.dim) if sig.grading[k] == g] for g in (0, 1)]
    sectors = [s for s in sectors if s]
    letters = [gauss(complex(0, 1)) if x == "i" else gauss(x) for x in alphabet]
    per_sector = []
    for sec in sectors:
        forms = []
        for sizes in _jordan_blocks(len(sec)):
            for eigs in itertools.product(letters, repeat=len(sizes)):
                forms.append(_jordan_matrix(sizes, eigs))
        per_sector.append(forms)
    out, seen = [], set()
    for combo in itertools.product(*per_sector):
        m = np.zeros((sig.dim, sig.dim), dtype=object)
        for sec, block in zip(sectors, combo):
            for i, r in enumerate(sec):
                for j, c in enumerate(sec):
                    m[r, c] = block[i, j]
        diag = [gauss(m[k, k]) for k in range(sig.dim)]
        lead = next((x for x in diag if x), None)
        if lead is not None and lead != gauss(1):
            continue  # scale fixed by the first nonzero eigenvalue
        key = tuple(str(x) for x in m.flatten())
        if key not in seen:
            seen.add(key)
            out.append(ExactMatrix.from_array(m))
    return out


def _classified_conditions(A: ExactMatrix, B) -> list:
    """Polynomials (in the entries of B) vanishing exactly on classified K."""
    import sympy

    d = A.n
    a = _scalar_of(A)
    if a is not None:
        B2 = B * B
        beta = B2.trace() / d
        return [sympy.expand(B2[r, c] - (beta if r == c else 0)) for r in range(d) for c in range(d)]
    alpha = _scalar_of(A @ A)
    if alpha is None or not alpha:
        return [sympy.Integer(1)]
    Av = [_to_sympy(A[(r, c)].LC) if A[(r, c)] else 0 for r in range(d) for c in range(d)]
    Bv = [B[r, c] for r in range(d) for c in range(d)]
    return [sympy.expand(Av[i] * Bv[j] - Av[j] * Bv[i]) for i in range(len(Av)) for j in range(i + 1, len(Av))]


def _certify(generators, syms, conditions, A: ExactMatrix, B, rng) -> bool:
    """``V(I) subset V(conditions) U {det(A + l B) == 0 for all l}``.

    Random linear combinations ``f`` of the conditions and ``g`` of the
    determinant coefficients reduce this to one radical-membership test
    ``f*g in sqrt(I)``, i.e. ``1 in I + (1 - t f g)``; a failure of the
    inclusion survives generic combinations with probability one.
    """
    import sympy

    lam, t = sympy.Symbol("lam"), sympy.Symbol("t")
    Amat = sympy.Matrix(A.n, A.n, lambda r, c: _to_sympy(A[(r, c)].LC) if A[(r, c)] else 0)
    det = sympy.Poly(sympy.expand((Amat + lam * B).det()), lam)
    dets = [c for c in det.all_coeffs() if c != 0]
    if not dets:
        return True  # never invertible
    def combo(polys):
        return sympy.expand(sum(int(rng.integers(1, 50)) * p for p in polys))

    f, g = combo(conditions), combo(dets)
    G = sympy.groebner(list(generators) + [1 - t * f * g], *syms, t, order="grevlex", domain="QQ_I")
    return G.exprs == [1]


def brute_force_sp_solutions(
    sig: GradingSignature, alphabet=DEFAULT_EIGEN_ALPHABET, samples_per_branch: int = 3, seed: int = 0
) -> list[SolutionFamily]:
    """Independent search for SP solutions ``K = A + l*B`` (small dimension).

    For every gauge-fixed ``A`` (see :func:`gauge_fixed_constants`) the RE is
    expanded into polynomial equations in the bosonic entries of ``B``;
    solution branches are found with sympy and sampled at random small
    rationals, and the whole solution set is certified against the
    classification (see :func:`_certify`).  Only invertible samples are kept.
    """
    import sympy

    if sig.dim > 3:
        raise ValueError("brute force is meant for M + N <= 3")
    rng = np.random.default_rng(seed)
    tensor = _re_tensor(sig)
    out = []
    for A in gauge_fixed_constants(sig, alphabet):
        gens, syms, units = _re_system(sig, tensor, A)
        G = sympy.groebner(gens, *syms, order="grevlex", domain="QQ_I") if gens else None
        if G is not None and G.exprs == [1]:
            continue
        Bsym = sympy.Matrix(sig.dim, sig.dim, lambda r, c: syms[units.index((r, c))] if (r, c) in units else 0)
        if _certify(gens, syms, [sympy.Integer(1)], A, Bsym, rng):
            continue  # every solution with this A is singular
        certified = _certify(gens, syms, _classified_conditions(A, Bsym), A, Bsym, rng)
        samples = _sample_solutions(sig, A, gens, syms, units, rng, samples_per_branch)
        labels = [classify_sp(sig, s) for s in samples]
        out.append(SolutionFamily(A, gens, syms, samples, labels, certified))
    return out


def _sample_solutions(sig, A, gens, syms, units, rng, per_branch) -> list[KFamily]:
    import sympy

    candidates: list[ExactMatrix] = []
    branches = sympy.solve(gens, syms, dict=True) if gens else [{}]
    for br in branches:
        free = [s for s in syms if s not in br]
        for _ in range(per_branch):
            vals = {s: sympy.Rational(int(rng.integers(-4, 5)), int(rng.integers(1, 4))) for s in free}
            try:
                full = [sympy.simplify(br.get(s, s).subs(vals)) if s in br else vals[s] for s in syms]
            except ZeroDivisionError:
                continue
            if any(v.has(sympy.zoo, sympy.nan) for v in full):
                continue
            exact = [_from_sympy(v) for v in full]
            if any(v is None for v in exact):
                continue
            candidates.append(_matrix_from(sig, units, exact))
    if _scalar_of(A) is not None:
        # B may be gauge-fixed to a Jordan form as well
        for B in gauge_fixed_constants(sig, (1, -1, 0, 2)):
            candidates.append(B)
    out, seen = [], []
    for B in candidates:
        fam = KFamily(A, B)
        if any(B == b for b in seen) or not _is_generically_invertible(fam):
            continue
        if not sp_re_residual(sig, fam).is_zero():
            continue
        seen.append(B)
        out.append(fam)
    return out
