"""Linear algebra on Z2-graded tensor powers of C^(M+N).

Operators are stored as *ordinary* matrices acting on ``V^{(x)n}`` with the
Koszul rule ``(A (x) B)(v (x) w) = (-1)^{|B||v|} Av (x) Bw``.  The formal
super-tensor coefficients of an operator differ from its ordinary matrix
entries by the sign returned by :func:`koszul_signs`; supertraces, partial
transpositions and slot embeddings are defined on the formal coefficients and
translated back.

Every function accepts either an :class:`~openspin.exact.ExactMatrix`
(exact backend) or a dense ``numpy`` array (float backend) and returns the same
kind.  :func:`embed` can also produce ``scipy.sparse`` matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exact import ExactMatrix, poly


class BasisOrder(str, Enum):
    DISTINGUISHED = "distinguished"
    SYMMETRIC = "symmetric"


class GradingError(ValueError):
    pass


@dataclass(frozen=True)
class GradingSignature:
    """Graded space C^(M|N) with its basis ordering and crossing data.

    ``theta0`` selects the anti-diagonal matrix ``V`` of the twisted
    transposition ``A^t = V^-1 A^T V`` (``V @ V = theta0 * (-1)^F``).
    """

    M: int
    N: int
    basis: BasisOrder = BasisOrder.DISTINGUISHED
    theta0: int = 1

    def __post_init__(self):
        object.__setattr__(self, "basis", BasisOrder(self.basis))
        if self.M < 0 or self.N < 0 or self.M + self.N < 1:
            raise GradingError(f"invalid dimensions M={self.M}, N={self.N}")
        if self.theta0 not in (1, -1):
            raise GradingError("theta0 must be +1 or -1")
        if self.basis is BasisOrder.SYMMETRIC and self.N % 2:
            raise GradingError("the symmetric basis needs an even fermionic dimension")
        if self.theta0 == -1 and self.dim % 2:
            raise GradingError("theta0=-1 is forbidden for odd total dimension")

    @property
    def dim(self) -> int:
        return self.M + self.N

    @cached_property
    def grading(self) -> tuple[int, ...]:
        """Parity of each (0-based) basis index."""
        if self.basis is BasisOrder.DISTINGUISHED:
            return tuple(0 if i < self.M else 1 for i in range(self.dim))
        n = self.N // 2
        return tuple(1 if (i < n or i >= self.M + n) else 0 for i in range(self.dim))

    @cached_property
    def parity(self) -> np.ndarray:
        return np.array(self.grading, dtype=np.int64)

    @property
    def rho(self) -> Fraction:
        return Fraction(self.theta0 * (self.M - self.N), 2)

    @cached_property
    def v_signs(self) -> np.ndarray:
        """Entries of V along the anti-diagonal, ``V[k, d-1-k] = v_signs[k]``.

        Ungraded: all ones (``theta0=+1``) or ``d/2`` ones then ``d/2`` minus
        ones (``theta0=-1``).  Fermionic indices in the second half get an
        extra minus sign so that ``V @ V = theta0 * (-1)^F`` with ``(-1)^F``
        the grading operator.
        """
        d = self.dim
        base = [1] * d if self.theta0 == 1 else [1] * (d // 2) + [-1] * (d // 2)
        g = self.grading
        return np.array([-b if (g[k] and 2 * k >= d) else b for k, b in enumerate(base)], dtype=np.int64)

    @cached_property
    def grading_operator(self) -> np.ndarray:
        return np.diag(1 - 2 * self.parity)

    @cached_property
    def V(self) -> np.ndarray:
        d = self.dim
        v = np.zeros((d, d), dtype=np.int64)
        for k in range(d):
            v[k, d - 1 - k] = self.v_signs[k]
        return v

    @property
    def crossing_compatible(self) -> bool:
        """True when conjugation by ``V`` preserves the grading.

        Only then is the twisted transposition an even map, which the
        conjugate (barred) R-matrix requires.
        """
        g = self.grading
        return all(g[k] == g[self.dim - 1 - k] for k in range(self.dim))

    def label(self) -> str:
        name = f"sl({self.M})" if self.N == 0 else f"sl({self.M}|{self.N})"
        return f"{name}[{self.basis.value},theta0={self.theta0:+d}]"


# ---------------------------------------------------------------------------
# index helpers


def digits(index, d: int, n: int) -> np.ndarray:
    """Base-``d`` digits of multi-indices, most significant (slot 0) first."""
    index = np.asarray(index, dtype=np.int64)
    out = np.empty(index.shape + (n,), dtype=np.int64)
    rest = index.copy()
    for m in range(n - 1, -1, -1):
        out[..., m] = rest % d
        rest //= d
    return out


def undigits(dig: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros(dig.shape[:-1], dtype=np.int64)
    for m in range(dig.shape[-1]):
        out = out * d + dig[..., m]
    return out


def _koszul_from_digits(par_rows: np.ndarray, par_cols: np.ndarray) -> np.ndarray:
    # (-1)^{sum_m ([i_m]+[j_m]) * sum_{p<m} [j_p]}
    before = np.cumsum(par_cols, axis=-1) - par_cols
    expo = ((par_rows + par_cols) * before).sum(axis=-1)
    return 1 - 2 * (expo % 2)


def koszul_signs(sig: GradingSignature, n: int, rows, cols) -> np.ndarray:
    """Sign relating formal super-tensor coefficients and ordinary entries."""
    p = sig.parity
    return _koszul_from_digits(p[digits(rows, sig.dim, n)], p[digits(cols, sig.dim, n)])


def nslots(sig: GradingSignature, op) -> int:
    size = op.n if isinstance(op, ExactMatrix) else op.shape[0]
    if sig.dim == 1:
        raise GradingError("slot count is ambiguous for a one-dimensional space; pass it explicitly")
    n, total = 0, 1
    while total < size:
        total *= sig.dim
        n += 1
    if total != size:
        raise GradingError(f"matrix size {size} is not a power of {sig.dim}")
    return n


def _triplets(op):
    """Nonzero entries as ``(rows, cols, values)`` with values a list."""
    if isinstance(op, ExactMatrix):
        keys = list(op.entries)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        return rows, cols, [op.entries[k] for k in keys]
    if sp.issparse(op):
        coo = op.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data
    rows, cols = np.nonzero(op)
    return rows.astype(np.int64), cols.astype(np.int64), op[rows, cols]


def _assemble(size: int, rows, cols, values, signs, like, sparse: bool = False):
    """Build a matrix of the backend of ``like`` from signed triplets."""
    if isinstance(like, ExactMatrix):
        out: dict = {}
        for r, c, v, s in zip(rows.tolist(), cols.tolist(), values, signs.tolist()):
            key = (r, c)
            term = v if s == 1 else -v
            out[key] = out[key] + term if key in out else term
        return ExactMatrix(size, out)
    vals = np.asarray(values, dtype=complex) * signs
    m = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    if sparse:
        m.sum_duplicates()
        return m
    return m.toarray()


def identity_like(op, size: int):
    if isinstance(op, ExactMatrix):
        return ExactMatrix.identity(size)
    return np.eye(size, dtype=complex)


# ---------------------------------------------------------------------------
# core operations


def super_permutation(sig: GradingSignature, exact: bool = True):
    """Graded swap ``P = sum_ij (-1)^[j] E_ij (x) E_ji`` on two slots.

    As an ordinary matrix, ``P (e_k (x) e_l) = (-1)^{[k][l]} e_l (x) e_k``.
    """
    d = sig.dim
    g = sig.grading
    if exact:
        return ExactMatrix(
            d * d, {(l * d + k, k * d + l): poly(-1 if g[k] * g[l] else 1) for k in range(d) for l in range(d)}
        )
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d):
        for l in range(d):
            out[l * d + k, k * d + l] = -1 if g[k] * g[l] else 1
    return out


def formal_coefficients(sig: GradingSignature, op, n: int | None = None):
    """Coefficients of ``op`` in the super-tensor basis ``E_{i1 j1} (x) ... (x) E_{in jn}``."""
    n = nslots(sig, op) if n is None else n
    rows, cols, vals = _triplets(op)
    return _assemble(sig.dim**n, rows, cols, vals, koszul_signs(sig, n, rows, cols), op)


from_formal = formal_coefficients  # the sign map is an involution


def supertrace(sig: GradingSignature, op, slot: int, n: int | None = None):
    """Partial supertrace over ``slot`` (0-based); removes that slot."""
    n = nslots(sig, op) if n is None else n
    if not 0 <= slot < n:
        raise GradingError(f"slot {slot} out of range for {n} slots")
    d, p = sig.dim, sig.parity
    rows, cols, vals = _triplets(op)
    dr, dc = digits(rows, d, n), digits(cols, d, n)
    keep = dr[:, slot] == dc[:, slot]
    rows, cols, dr, dc = rows[keep], cols[keep], dr[keep], dc[keep]
    vals = [v for v, k in zip(vals, keep) if k] if isinstance(vals, list) else vals[keep]
    sign = _koszul_from_digits(p[dr], p[dc]) * (1 - 2 * p[dr[:, slot]])
    dr2, dc2 = np.delete(dr, slot, axis=1), np.delete(dc, slot, axis=1)
    sign = sign * _koszul_from_digits(p[dr2], p[dc2])
    size = d ** (n - 1)
    if n == 1:
        return _assemble(1, np.zeros_like(rows), np.zeros_like(cols), vals, sign, op)
    return _assemble(size, undigits(dr2, d), undigits(dc2, d), vals, sign, op)


def supertrace_full(sig: GradingSignature, op):
    """Full supertrace as a scalar (polynomial for the exact backend)."""
    n = nslots(sig, op)
    for _ in range(n):
        op = supertrace(sig, op, 0)
    if isinstance(op, ExactMatrix):
        return op[(0, 0)]
    return op[0, 0]


def twisted_transpose(sig: GradingSignature, op, slot: int, n: int | None = None):
    """Partial twisted transposition on ``slot``.

    On the slot's tensor factor ``E_ab -> (-1)^{[b]([a]+[b])} V^-1 E_ba V``,
    applied to the formal super-tensor coefficients so that
    ``(x (x) y)^{t_1} = x^t (x) y``.  Without fermions this is the ordinary
    partial transpose conjugated by ``V``.
    """
    if not sig.crossing_compatible:
        raise GradingError(f"{sig.label()}: grading is not symmetric under the crossing matrix")
    n = nslots(sig, op) if n is None else n
    if not 0 <= slot < n:
        raise GradingError(f"slot {slot} out of range for {n} slots")
    d, p, v = sig.dim, sig.parity, sig.v_signs
    rows, cols, vals = _triplets(op)
    dr, dc = digits(rows, d, n), digits(cols, d, n)
    sign = _koszul_from_digits(p[dr], p[dc])
    a, b = dr[:, slot].copy(), dc[:, slot].copy()
    # V^-1 = theta0 (-1)^F V, and V^-1 E_ba V = v_{bbar} v_a (-1)^{[bbar]} theta0 E_{bbar abar}
    sign = sign * sig.theta0 * v[d - 1 - b] * v[a] * (1 - 2 * p[d - 1 - b])
    sign = sign * (1 - 2 * ((p[b] * (p[a] + p[b])) % 2))
    dr[:, slot] = d - 1 - b
    dc[:, slot] = d - 1 - a
    sign = sign * _koszul_from_digits(p[dr], p[dc])
    return _assemble(d**n, undigits(dr, d), undigits(dc, d), vals, sign, op)


def twisted_transpose_matrix(sig: GradingSignature, a: np.ndarray) -> np.ndarray:
    """Dense reference ``sigma * V^-1 A^T V`` for one-slot matrices."""
    p = sig.parity
    s = 1 - 2 * ((p[None, :] * (p[:, None] + p[None, :])) % 2)  # indexed [a, b]
    V = sig.V.astype(complex)
    return np.linalg.inv(V) @ (s * a).T @ V


def embed(sig: GradingSignature, op, targets, total: int, sparse: bool = False):
    """Place a ``k``-slot operator on ``targets`` of a ``total``-slot space.

    ``targets[m]`` is the slot receiving the ``m``-th tensor factor of ``op``;
    the order of ``targets`` need not be increasing (``R_21`` is
    ``embed(R, [1, 0], 2)``).  Untouched slots carry the identity.
    """
    targets = list(targets)
    k = len(targets)
    if len(set(targets)) != k:
        raise GradingError(f"slot collision in {targets}")
    if any(t < 0 or t >= total for t in targets):
        raise GradingError(f"target slots {targets} out of range for {total} slots")
    if sig.dim > 1 and nslots(sig, op) != k:
        raise GradingError("operator slot count does not match targets")
    d, p = sig.dim, sig.parity
    rows, cols, vals = _triplets(op)
    dr, dc = digits(rows, d, k), digits(cols, d, k)
    base_sign = _koszul_from_digits(p[dr], p[dc])
    par = (p[dr] + p[dc]) % 2
    # Koszul sign of reordering the factors into slot order
    for m in range(k):
        for mm in range(m + 1, k):
            if targets[m] > targets[mm]:
                base_sign = base_sign * (1 - 2 * (par[:, m] * par[:, mm]))
    others = [s for s in range(total) if s not in targets]
    n_other = len(others)
    env = digits(np.arange(d**n_other), d, n_other) if n_other else np.zeros((1, 0), dtype=np.int64)
    nnz, ne = len(rows), env.shape[0]
    big_r = np.empty((nnz, ne, total), dtype=np.int64)
    big_c = np.empty((nnz, ne, total), dtype=np.int64)
    for m, t in enumerate(targets):
        big_r[:, :, t] = dr[:, m][:, None]
        big_c[:, :, t] = dc[:, m][:, None]
    for m, s in enumerate(others):
        big_r[:, :, s] = env[None, :, m]
        big_c[:, :, s] = env[None, :, m]
    sign = base_sign[:, None] * _koszul_from_digits(p[big_r], p[big_c])
    R = undigits(big_r, d).ravel()
    C = undigits(big_c, d).ravel()
    if isinstance(vals, list):
        values = [v for v in vals for _ in range(ne)]
    else:
        values = np.repeat(np.asarray(vals), ne)
    return _assemble(d**total, R, C, values, sign.ravel(), op, sparse=sparse)


def graded_tensor(sig: GradingSignature, a, b):
    """Graded tensor product of two one-slot operators, built from formal units."""
    d, g = sig.dim, sig.grading
    if isinstance(a, ExactMatrix):
        out: dict = {}
        for (i, j), x in a.items():
            for (k, l), y in b.items():
                s = -1 if ((g[k] + g[l]) * g[j]) % 2 else 1
                key = (i * d + k, j * d + l)
                out[key] = out.get(key, 0) + s * x * y
        return ExactMatrix(d * d, out)
    out = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            for k in range(d):
                for l in range(d):
                    s = -1 if ((g[k] + g[l]) * g[j]) % 2 else 1
                    out[i * d + k, j * d + l] = s * a[i, j] * b[k, l]
    return out


def swap_slots(sig: GradingSignature, op):
    """Conjugate a two-slot operator by the graded permutation (``X_12 -> X_21``)."""
    P = super_permutation(sig, exact=isinstance(op, ExactMatrix))
    return P @ op @ P


def is_even(sig: GradingSignature, op) -> bool:
    rows, cols, _ = _triplets(op)
    n = nslots(sig, op)
    p = sig.parity
    return bool(np.all((p[digits(rows, sig.dim, n)].sum(-1) + p[digits(cols, sig.dim, n)].sum(-1)) % 2 == 0))
