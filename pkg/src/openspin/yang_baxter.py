"""Rational R-matrices ``R(l) = l*1 + i*P`` and their exact identities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sympy.polys.rings import PolyElement

from .exact import I, L1, L2, RING, ExactMatrix, gauss, poly
from .graded import GradingSignature, embed, super_permutation, swap_slots, twisted_transpose


def _shift_rho(sig: GradingSignature):
    return I * gauss(sig.rho)


def r_matrix(sig: GradingSignature, lam=L1):
    """``R(lam) = lam*1 + i*P`` on two slots.

    ``lam`` may be a polynomial of ``RING`` (exact, symbolic by default), an
    exact scalar, or a Python/numpy complex number (float backend).
    """
    d2 = sig.dim**2
    if isinstance(lam, (complex, float, np.number)) and not isinstance(lam, bool):
        return complex(lam) * np.eye(d2, dtype=complex) + 1j * super_permutation(sig, exact=False)
    return ExactMatrix.identity(d2, lam) + super_permutation(sig) * I


def rbar_matrix(sig: GradingSignature, lam=L1, slot: int = 0):
    """Conjugate R-matrix ``Rbar(lam) = R^{t_1}(-lam - i*rho)``.

    ``slot=1`` builds ``R^{t_2}`` instead; the two agree whenever the grading
    is compatible with the crossing matrix ``V``.
    """
    if isinstance(lam, (complex, float, np.number)):
        arg = -complex(lam) - 1j * float(sig.rho)
    else:
        arg = -poly(lam) - _shift_rho(sig)
    return twisted_transpose(sig, r_matrix(sig, arg), slot)


def ybe_residual(sig: GradingSignature) -> ExactMatrix:
    """``R12(l1-l2) R13(l1) R23(l2) - R23(l2) R13(l1) R12(l1-l2)``, exactly."""
    r12 = embed(sig, r_matrix(sig, L1 - L2), [0, 1], 3)
    r13 = embed(sig, r_matrix(sig, L1), [0, 2], 3)
    r23 = embed(sig, r_matrix(sig, L2), [1, 2], 3)
    return r12 @ r13 @ r23 - r23 @ r13 @ r12


def ybe_residual_sampled(sig: GradingSignature, points: int = 5, seed: int = 0) -> float:
    """Float YBE check at random complex points; returns the max residual."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        u, v = rng.normal(size=2) + 1j * rng.normal(size=2)
        r12 = embed(sig, r_matrix(sig, u - v), [0, 1], 3)
        r13 = embed(sig, r_matrix(sig, u), [0, 2], 3)
        r23 = embed(sig, r_matrix(sig, v), [1, 2], 3)
        worst = max(worst, float(np.abs(r12 @ r13 @ r23 - r23 @ r13 @ r12).max()))
    return worst


def unitarity_residual(sig: GradingSignature) -> ExactMatrix:
    """``R12(l) R21(-l) + (l^2 + 1) 1``, zero as an exact identity."""
    r = r_matrix(sig, L1)
    r21 = swap_slots(sig, r_matrix(sig, -L1))
    return r @ r21 + ExactMatrix.identity(r.n, L1**2 + 1)


def rbar_consistency_residual(sig: GradingSignature) -> ExactMatrix:
    """``R^{t_1}(-l - i rho) - R^{t_2}(-l - i rho)``."""
    return rbar_matrix(sig, L1, slot=0) - rbar_matrix(sig, L1, slot=1)


@dataclass
class CrossingReport:
    holds: bool
    scalar: PolyElement | None
    shift: object
    residual_norm: float
    detail: str = ""
    scalar_text: str = field(default="")


def _scalar_multiple(m: ExactMatrix):
    """Return ``c`` when ``m == c * 1`` exactly, else ``None``."""
    diag = m[(0, 0)]
    if m == ExactMatrix.identity(m.n, diag):
        return diag
    return None


def _nonscalar_part(m: ExactMatrix) -> ExactMatrix:
    return m - ExactMatrix.identity(m.n, m[(0, 0)])


def _discover_shift(sig: GradingSignature, a: ExactMatrix):
    """Constant ``s`` making ``a @ R^{t_1}(l + s)`` scalar, or ``None``.

    ``R^{t_1}(l + s) = R^{t_1}(l) + s*1`` so the product is affine in ``s``.
    """
    x = _nonscalar_part(a @ twisted_transpose(sig, r_matrix(sig, L1), 0))
    y = _nonscalar_part(a)
    for key, yv in y.items():
        xv = x[key]
        q, r = (-xv).div(yv)
        if r or not q.is_ground:
            return None
        s = q.LC if q else gauss(0)
        return s if (x + y * s).is_zero() else None
    return gauss(0) if x.is_zero() else None


def crossing_unitarity_check(sig: GradingSignature, shift=None) -> CrossingReport:
    """Crossing unitarity of the conjugate R-matrix.

    Looks for a constant shift ``s`` such that
    ``R^{t_1}(-l - i rho) R^{t_1}(l + s)`` is a scalar multiple of the
    identity and records that scalar.  ``shift`` forces a particular value.
    """
    a = twisted_transpose(sig, r_matrix(sig, -L1 - _shift_rho(sig)), 0)
    if shift is None:
        shift = _discover_shift(sig, a)
        if shift is None:
            return CrossingReport(False, None, None, float("nan"), "no constant shift makes the product scalar")
    shift = gauss(shift)
    prod = a @ twisted_transpose(sig, r_matrix(sig, L1 + shift), 0)
    c = _scalar_multiple(prod)
    if c is None:
        return CrossingReport(False, None, shift, _nonscalar_part(prod).max_abs_coefficient(), "product is not scalar")
    return CrossingReport(True, c, shift, 0.0, scalar_text=str(c.as_expr()))


def unitarity_scalar(sig: GradingSignature):
    """Scalar ``c(l)`` of ``R12(l) R21(-l) = c(l) 1`` (expected ``-(l^2+1)``)."""
    prod = r_matrix(sig, L1) @ swap_slots(sig, r_matrix(sig, -L1))
    return _scalar_multiple(prod)


def is_zero_polynomial_matrix(m: ExactMatrix) -> bool:
    return m.is_zero()


__all__ = [
    "r_matrix",
    "rbar_matrix",
    "ybe_residual",
    "ybe_residual_sampled",
    "unitarity_residual",
    "rbar_consistency_residual",
    "crossing_unitarity_check",
    "CrossingReport",
    "unitarity_scalar",
    "RING",
]
