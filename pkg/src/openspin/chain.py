"""Monodromy and transfer matrices of closed and open chains, plus the
exact-diagonalization oracle.

Slot 0 is the auxiliary space; quantum sites occupy slots ``1..sites`` in the
order of the site subscripts.  Every R-factor has the form ``c*1 + i*X`` with
``X`` a signed permutation (``P``) or its twisted partial transpose (``Q``),
so the float backend keeps those embedded operators sparse and only the
accumulated monodromy dense.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla

from .exact import I, L1, L2, ExactMatrix, gauss, poly
from .graded import GradingError, GradingSignature, embed, super_permutation, supertrace, twisted_transpose
from .reflection import BoundaryKind, BoundarySpec, KFamily, build_snp_k, build_sp_k

DEFAULT_DIMENSION_CAP = 4096


class ChainMode(str, Enum):
    CLOSED = "closed"
    OPEN_SP = "open-sp"
    OPEN_SNP = "open-snp"


class KPlusChoice(str, Enum):
    """Candidates for the left boundary when none is given explicitly."""

    IDENTITY = "identity"
    VTV = "VtV"
    CROSSED = "crossed"


# Pseudo-vacuum calibration (see tests/test_chain.py): the identity reproduces
# the closed-form pseudo-vacuum eigenvalue for every mode and boundary tested.
DEFAULT_K_PLUS = KPlusChoice.IDENTITY


class DimensionCapError(ValueError):
    """Hilbert space larger than the configured cap."""


@dataclass(frozen=True)
class ChainSpec:
    sig: GradingSignature
    sites: int
    mode: ChainMode = ChainMode.OPEN_SP
    boundary_minus: BoundarySpec | None = None
    boundary_plus: BoundarySpec | None = None
    k_plus_choice: KPlusChoice = DEFAULT_K_PLUS
    dimension_cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        object.__setattr__(self, "mode", ChainMode(self.mode))
        object.__setattr__(self, "k_plus_choice", KPlusChoice(self.k_plus_choice))
        if self.sites < 1:
            raise ValueError("need at least one site")
        if self.mode is ChainMode.OPEN_SNP:
            if self.sites % 2:
                raise ValueError("SNP chains need an even number of sites")
            if not self.sig.crossing_compatible:
                raise GradingError(f"{self.sig.label()} cannot host an SNP chain (use the symmetric basis)")
        kind = BoundaryKind.SNP if self.mode is ChainMode.OPEN_SNP else BoundaryKind.SP
        for b in (self.boundary_minus, self.boundary_plus):
            if b is not None and self.mode is not ChainMode.CLOSED and b.kind is not kind:
                raise ValueError(f"{b.kind.value} boundary given for a {self.mode.value} chain")
        if self.hilbert_dim > self.dimension_cap:
            raise DimensionCapError(f"Hilbert dimension {self.hilbert_dim} exceeds cap {self.dimension_cap}")

    @property
    def hilbert_dim(self) -> int:
        return self.sig.dim**self.sites

    @property
    def is_open(self) -> bool:
        return self.mode is not ChainMode.CLOSED

    @property
    def double_row_length(self) -> int:
        """``L`` in the pseudo-vacuum formulas (half the sites for SNP)."""
        return self.sites // 2 if self.mode is ChainMode.OPEN_SNP else self.sites

    # boundaries ---------------------------------------------------------
    @cached_property
    def k_minus(self) -> KFamily:
        b = self.boundary_minus
        if self.mode is ChainMode.OPEN_SNP:
            return KFamily.constant(build_snp_k(self.sig, b or BoundarySpec.identity("SNP")))
        return build_sp_k(self.sig, b or BoundarySpec.identity("SP"))

    def k_plus_exact(self, lam=L1) -> ExactMatrix:
        sig = self.sig
        if self.boundary_plus is not None:
            if self.mode is ChainMode.OPEN_SNP:
                return build_snp_k(sig, self.boundary_plus)
            return build_sp_k(sig, self.boundary_plus).exact(lam)
        d = sig.dim
        if self.k_plus_choice is KPlusChoice.IDENTITY:
            return ExactMatrix.identity(d)
        if self.k_plus_choice is KPlusChoice.VTV:
            V = ExactMatrix.from_array(sig.V)
            return V.transpose() @ V
        shifted = -poly(lam) - I * gauss(sig.rho)
        return twisted_transpose(sig, self.k_minus.exact(shifted), 0, 1)

    def k_plus_at(self, lam: complex) -> np.ndarray:
        if self.boundary_plus is None and self.k_plus_choice is KPlusChoice.CROSSED:
            shifted = -complex(lam) - 1j * float(self.sig.rho)
            return twisted_transpose(self.sig, self.k_minus.at(shifted), 0, 1)
        if self.boundary_plus is not None and self.mode is ChainMode.OPEN_SP:
            return build_sp_k(self.sig, self.boundary_plus).at(lam)
        return self.k_plus_exact().to_numpy()

    def describe(self) -> dict:
        return {
            "M": self.sig.M,
            "N": self.sig.N,
            "basis": self.sig.basis.value,
            "theta0": self.sig.theta0,
            "sites": self.sites,
            "mode": self.mode.value,
            "boundary_minus": (self.boundary_minus or BoundarySpec.identity(self._kind)).to_dict(),
            "boundary_plus": (self.boundary_plus.to_dict() if self.boundary_plus else {"default": self.k_plus_choice.value}),
        }

    @property
    def _kind(self) -> str:
        return "SNP" if self.mode is ChainMode.OPEN_SNP else "SP"


# --------------------------------------------------------------------------
# factor bookkeeping


def _conjugated_site(chain: ChainSpec, site: int) -> bool:
    """SNP chains carry conjugate spaces on odd sites (1, 3, ...)."""
    return chain.mode is ChainMode.OPEN_SNP and site % 2 == 1


def _factor_layout(chain: ChainSpec):
    """``(row, hat_row)``: lists of ``(site, conjugated)`` in product order."""
    L = chain.sites
    row = [(s, _conjugated_site(chain, s)) for s in range(L, 0, -1)]
    if chain.mode is ChainMode.OPEN_SNP:
        # hat monodromy: R_1a Rbar_2a R_3a ... Rbar_{2L}a
        hat = [(s, s % 2 == 0) for s in range(1, L + 1)]
    else:
        hat = [(s, False) for s in range(1, L + 1)]
    return row, hat


class _Operators:
    """Sparse embedded ``P_{a s}`` and ``Q_{a s}`` for one chain."""

    def __init__(self, sig: GradingSignature, sites: int, mode: ChainMode):
        self.rho = float(sig.rho)
        self.n = sites + 1
        self.size = sig.dim**self.n
        Pf = super_permutation(sig, exact=False)
        Qf = twisted_transpose(sig, Pf, 0) if mode is ChainMode.OPEN_SNP else None
        self.P = {s: embed(sig, Pf, [0, s], self.n, sparse=True) for s in range(1, self.n)}
        self.Q = {}
        if Qf is not None:
            self.Q = {s: embed(sig, Qf, [0, s], self.n, sparse=True) for s in range(1, self.n)}

    def factor(self, site: int, conjugated: bool, lam: complex):
        """``(c, X)`` with the factor equal to ``c*1 + i*X``."""
        if conjugated:
            return -lam - 1j * self.rho, self.Q[site]
        return lam, self.P[site]


def _apply_left(c, X, M):
    return c * M + 1j * (X @ M)


@lru_cache(maxsize=32)
def _ops_for(sig: GradingSignature, sites: int, mode: ChainMode) -> _Operators:
    return _Operators(sig, sites, mode)


def _ops(chain: ChainSpec) -> _Operators:
    return _ops_for(chain.sig, chain.sites, chain.mode)


def _embed_aux(chain: ChainSpec, k: np.ndarray) -> np.ndarray:
    """``K_a`` on the full space (aux slot is the most significant digit)."""
    return np.kron(k, np.eye(chain.hilbert_dim))


# --------------------------------------------------------------------------
# float backend


def monodromy(chain: ChainSpec, lam: complex) -> np.ndarray:
    """Single-row monodromy ``T_a(lam)``; descending site order."""
    ops = _ops(chain)
    row, _ = _factor_layout(chain)
    M = np.eye(ops.size, dtype=complex)
    for site, conj in reversed(row):
        c, X = ops.factor(site, conj, lam)
        M = _apply_left(c, X, M)
    return M


def hat_monodromy(chain: ChainSpec, lam: complex) -> np.ndarray:
    """``That_a(lam) = R_1a ... R_La`` (alternating with Rbar in SNP mode)."""
    ops = _ops(chain)
    _, hat = _factor_layout(chain)
    M = np.eye(ops.size, dtype=complex)
    for site, conj in reversed(hat):
        c, X = ops.factor(site, conj, lam)
        M = _apply_left(c, X, M)
    return M


def aux_supertrace(chain: ChainSpec, M) -> np.ndarray:
    """Partial supertrace over the auxiliary slot 0 of a dense operator."""
    sig = chain.sig
    d, D = sig.dim, chain.hilbert_dim
    q = _quantum_parity(chain)
    flip = (q[:, None] + q[None, :]) % 2
    out = np.zeros((D, D), dtype=complex)
    for k in range(d):
        block = M[k * D : (k + 1) * D, k * D : (k + 1) * D]
        s = -1 if sig.parity[k] else 1
        out += s * np.where(flip & sig.parity[k], -block, block)
    return out


def _quantum_parity(chain: ChainSpec) -> np.ndarray:
    d, n = chain.sig.dim, chain.sites
    idx = np.arange(d**n)
    total = np.zeros(d**n, dtype=np.int64)
    for _ in range(n):
        total += chain.sig.parity[idx % d]
        idx //= d
    return total % 2


def double_row(chain: ChainSpec, lam: complex) -> np.ndarray:
    """``K+_a T_a K-_a That_a`` (or ``T_a`` for closed chains)."""
    lam = complex(lam)
    T = monodromy(chain, lam)
    if not chain.is_open:
        return T
    Kp = _embed_aux(chain, chain.k_plus_at(lam))
    Km = _embed_aux(chain, chain.k_minus.at(lam))
    return Kp @ T @ Km @ hat_monodromy(chain, lam)


def transfer(chain: ChainSpec, lam: complex) -> np.ndarray:
    """Transfer matrix on the quantum slots (float backend)."""
    return aux_supertrace(chain, double_row(chain, lam))


def commutator_norm(chain: ChainSpec, lam1: complex, lam2: complex) -> float:
    a, b = transfer(chain, lam1), transfer(chain, lam2)
    return float(np.abs(a @ b - b @ a).max())


def transfer_derivative(chain: ChainSpec, lam: complex = 0.0, h: float = 1e-4) -> np.ndarray:
    """Central five-point derivative of the (polynomial) transfer matrix."""
    lam = complex(lam)
    f = lambda x: transfer(chain, lam + x)
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


def hamiltonian(chain: ChainSpec, exact: bool = False, normalized: bool = True):
    """``-1/2 dt/dl`` at ``l=0``; ``normalized=False`` returns ``dt/dl`` itself."""
    if exact:
        dt = transfer_exact(chain).diff(L1).subs(l1=0)
        return dt * gauss(Fraction(-1, 2)) if normalized else dt
    dt = transfer_derivative(chain, 0.0)
    return -0.5 * dt if normalized else dt


def pseudo_vacuum(chain: ChainSpec) -> np.ndarray:
    """``e_1 (x) ... (x) e_1`` on the quantum sites."""
    v = np.zeros(chain.hilbert_dim, dtype=complex)
    v[0] = 1.0
    return v


def vacuum_eigenvalue(chain: ChainSpec, lam: complex) -> tuple[complex, float]:
    """``(<w|t|w>, ||t w - <w|t|w> w|| / ||t w||)`` at ``lam``."""
    t = transfer(chain, lam)
    col = t[:, 0]
    ev = col[0]
    rest = col.copy()
    rest[0] = 0
    scale = np.linalg.norm(col) or 1.0
    return complex(ev), float(np.linalg.norm(rest) / scale)


# --------------------------------------------------------------------------
# exact backend (desk scale)


def _exact_factor(chain: ChainSpec, site: int, conj: bool, lam, hat: bool) -> ExactMatrix:
    sig = chain.sig
    n = chain.sites + 1
    P = super_permutation(sig)
    if conj:
        arg = -poly(lam) - I * gauss(sig.rho)
        two = ExactMatrix.identity(sig.dim**2, arg) + twisted_transpose(sig, P, 0) * I
    else:
        two = ExactMatrix.identity(sig.dim**2, lam) + P * I
    targets = [site, 0] if hat else [0, site]
    return embed(sig, two, targets, n)


def monodromy_exact(chain: ChainSpec, lam=L1) -> ExactMatrix:
    row, _ = _factor_layout(chain)
    out = None
    for site, conj in row:
        f = _exact_factor(chain, site, conj, lam, hat=False)
        out = f if out is None else out @ f
    return out


def hat_monodromy_exact(chain: ChainSpec, lam=L1) -> ExactMatrix:
    _, hat = _factor_layout(chain)
    out = None
    for site, conj in hat:
        f = _exact_factor(chain, site, conj, lam, hat=True)
        out = f if out is None else out @ f
    return out


def transfer_exact(chain: ChainSpec, lam=L1) -> ExactMatrix:
    """Exact transfer matrix with polynomial entries in ``lam`` (default ``l1``)."""
    sig, n = chain.sig, chain.sites + 1
    T = monodromy_exact(chain, lam)
    if chain.is_open:
        Kp = embed(sig, chain.k_plus_exact(lam), [0], n)
        Km = embed(sig, chain.k_minus.exact(lam), [0], n)
        T = Kp @ T @ Km @ hat_monodromy_exact(chain, lam)
    return supertrace(sig, T, 0, n)


def commutes_exactly(chain: ChainSpec) -> bool:
    """``[t(l1), t(l2)] == 0`` as a polynomial identity."""
    a = transfer_exact(chain, L1)
    b = a.subs(l1=L2)
    return (a @ b - b @ a).is_zero()


# --------------------------------------------------------------------------
# exact-diagonalization oracle


@dataclass
class SpectralSample:
    lam: complex
    matrix: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class SpectralCurves:
    """Joint eigenvalue curves: ``values[c, s]`` is curve ``c`` at sample ``s``."""

    lambdas: np.ndarray
    values: np.ndarray
    vectors: np.ndarray

    @property
    def count(self) -> int:
        return self.values.shape[0]


def _canonical_order(vals: np.ndarray, digits: int = 9) -> np.ndarray:
    return np.lexsort((np.round(vals.imag, digits), np.round(vals.real, digits)))


def _eigvals(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(m)
    except np.linalg.LinAlgError:
        T, _ = sla.schur(m, output="complex")
        return np.diag(T)


def exact_spectrum(chain: ChainSpec, lambdas) -> list[SpectralSample]:
    out = []
    for lam in lambdas:
        t = transfer(chain, complex(lam))
        ev = _eigvals(t)
        out.append(SpectralSample(complex(lam), t, ev[_canonical_order(ev)]))
    return out


def joint_basis(mats: list[np.ndarray], seed: int = 0) -> np.ndarray:
    """Common eigenbasis of a commuting family via a random combination."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=len(mats)) + 1j * rng.normal(size=len(mats))
    combo = sum(c * m for c, m in zip(w, mats))
    _, vecs = np.linalg.eig(combo)
    return vecs


def spectral_curves(chain: ChainSpec, lambdas, seed: int = 0, overlap: float = 0.9) -> SpectralCurves:
    """Eigenvalue curves of the commuting family ``t(lam)`` over ``lambdas``.

    A generic combination of the sampled transfer matrices (plus one extra
    generic point) is diagonalized once; the resulting common eigenvectors
    label the curves, and each curve value is the Rayleigh quotient
    ``<v|t|v> / <v|v>`` with the left eigenvector.  A curve is accepted only
    if ``t v`` stays aligned with ``v`` (overlap above ``overlap``).
    """
    lambdas = np.asarray([complex(x) for x in lambdas])
    rng = np.random.default_rng(seed)
    extra = complex(rng.normal() + 0.37, rng.normal() - 0.21)
    mats = [transfer(chain, lam) for lam in lambdas]
    basis = joint_basis(mats + [transfer(chain, extra)], seed)
    try:
        left = np.linalg.inv(basis)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("transfer family is not jointly diagonalizable") from exc
    D = basis.shape[1]
    values = np.empty((D, len(lambdas)), dtype=complex)
    for s, m in enumerate(mats):
        values[:, s] = np.einsum("ij,ji->i", left, m @ basis)
        tv = m @ basis
        cos = np.abs(np.einsum("ij,ij->j", basis.conj(), tv)) / (
            np.linalg.norm(basis, axis=0) * np.maximum(np.linalg.norm(tv, axis=0), 1e-300)
        )
        bad = (np.linalg.norm(tv, axis=0) > 1e-12 * np.abs(m).max()) & (cos < overlap)
        if bad.any():
            raise np.linalg.LinAlgError("eigenvector continuation failed (overlap below threshold)")
    order = np.lexsort(tuple(np.round(values[:, s].imag, 8) for s in reversed(range(values.shape[1])))
                       + tuple(np.round(values[:, s].real, 8) for s in reversed(range(values.shape[1]))))
    return SpectralCurves(lambdas, values[order], basis[:, order])
