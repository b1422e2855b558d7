"""Exact scalars, polynomials and rational functions over the Gaussian rationals.

Scalars are elements of ``QQ_I`` (arbitrary precision rationals for the real
and imaginary part).  Polynomials live in the sparse ring ``QQ_I[l1, l2]``;
``l1`` plays the role of the spectral parameter in univariate contexts and
``l2`` is the second spectral parameter of two-point identities.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator

import numpy as np
from sympy.polys.domains import QQ_I
from sympy.polys.rings import PolyElement, ring

RING, L1, L2 = ring("l1,l2", QQ_I)
ZERO = RING.zero
ONE = RING.one
I = QQ_I(0, 1)

ExactScalar = type(I)


def gauss(value) -> ExactScalar:
    """Coerce ints, fractions, ``"p/q"`` strings, complex numbers with
    rational parts and ``(re, im)`` pairs to an exact Gaussian rational."""
    if isinstance(value, ExactScalar):
        return value
    if isinstance(value, tuple):
        re, im = value
        return QQ_I(_rational(re), _rational(im))
    if isinstance(value, complex):
        return QQ_I(_rational(value.real), _rational(value.imag))
    return QQ_I(_rational(value), 0)


def _rational(value):
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, float):
        if not value.is_integer():
            value = Fraction(value)
        else:
            value = int(value)
    if isinstance(value, Fraction):
        return QQ_I.dom(value.numerator, value.denominator)
    if isinstance(value, (int, Rational)):
        return QQ_I.dom(int(value.numerator), int(value.denominator))
    return QQ_I.dom.convert(value)


def _rational_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    num, den = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None


def to_fraction_pair(z) -> tuple[Fraction, Fraction]:
    z = gauss(z)
    return (Fraction(int(z.x.numerator), int(z.x.denominator)), Fraction(int(z.y.numerator), int(z.y.denominator)))


def gaussian_sqrt(z) -> ExactScalar | None:
    """A square root of ``z`` inside the Gaussian rationals, or ``None``.

    The root returned has positive real part (positive imaginary part when
    the real part vanishes).
    """
    x, y = to_fraction_pair(z)
    r = _rational_sqrt(x * x + y * y)
    if r is None:
        return None
    re = _rational_sqrt((r + x) / 2)
    im = _rational_sqrt((r - x) / 2)
    if re is None or im is None:
        return None
    if y < 0:
        im = -im
    root = gauss((re, im))
    if re < 0 or (re == 0 and im < 0):
        root = -root
    return root


def poly(value) -> PolyElement:
    """Coerce a scalar or polynomial to an element of ``RING``."""
    if isinstance(value, PolyElement):
        if value.ring is RING:
            return value
        raise TypeError("polynomial from a foreign ring")
    return RING.ground_new(gauss(value))


def to_complex(value) -> complex:
    z = gauss(value)
    return complex(float(z.x), float(z.y))


def format_scalar(value) -> str:
    z = gauss(value)
    re, im = Fraction(int(z.x.numerator), int(z.x.denominator)), Fraction(
        int(z.y.numerator), int(z.y.denominator)
    )
    if im == 0:
        return str(re)
    if re == 0:
        return f"{im}*I"
    return f"{re}{'+' if im > 0 else '-'}{abs(im)}*I"


def scalar_parts(value) -> tuple[str, str]:
    """``("p/q", "p/q")`` real and imaginary parts for serialization."""
    z = gauss(value)
    return (
        str(Fraction(int(z.x.numerator), int(z.x.denominator))),
        str(Fraction(int(z.y.numerator), int(z.y.denominator))),
    )


def poly_eval(p: PolyElement, l1=0, l2=0) -> complex:
    """Floating-point evaluation of an exact polynomial."""
    total = 0j
    for (a, b), c in p.terms():
        total += complex(float(c.x), float(c.y)) * (l1**a) * (l2**b)
    return total


def poly_subs(p: PolyElement, l1=None, l2=None) -> PolyElement:
    """Exact substitution of polynomials (or scalars) for ``l1``/``l2``."""
    if l1 is not None and l2 is not None:
        # simultaneous substitution
        return p.compose([(L1, poly(l1)), (L2, poly(l2))])
    if l1 is not None:
        return p.compose(L1, poly(l1))
    if l2 is not None:
        return p.compose(L2, poly(l2))
    return p


class RationalFunction:
    """Reduced ratio of polynomials in ``l1`` with a monic denominator.

    Equality is structural because the representation is canonical.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=1):
        num, den = poly(num), poly(den)
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            self.num, self.den = ZERO, ONE
            return
        _, num, den = num.cofactors(den)
        lc = den.LC
        self.num = num.quo_ground(lc)
        self.den = den.quo_ground(lc)

    @classmethod
    def lam(cls) -> "RationalFunction":
        return cls(L1)

    @staticmethod
    def _coerce(other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        return RationalFunction(other)

    def __add__(self, other):
        o = self._coerce(other)
        return RationalFunction(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if not o.num:
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFunction(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return RationalFunction(self.den**-k, self.num**-k)
        return RationalFunction(self.num**k, self.den**k)

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        if self.den == ONE:
            return f"RationalFunction({self.num})"
        return f"RationalFunction(({self.num}) / ({self.den}))"

    def is_zero(self) -> bool:
        return not self.num

    def is_polynomial(self) -> bool:
        return self.den == ONE

    def compose_affine(self, scale, shift) -> "RationalFunction":
        """``f(scale * lam + shift)``."""
        arg = poly(scale) * L1 + poly(shift)
        return RationalFunction(self.num.compose(L1, arg), self.den.compose(L1, arg))

    def derivative(self) -> "RationalFunction":
        return RationalFunction(
            self.num.diff(L1) * self.den - self.num * self.den.diff(L1), self.den**2
        )

    def __call__(self, lam):
        """Evaluate at an exact scalar (exact result) or a complex number."""
        if isinstance(lam, (complex, float, np.complexfloating, np.floating)):
            d = poly_eval(self.den, complex(lam))
            if d == 0:
                raise ZeroDivisionError(f"pole at {lam}")
            return poly_eval(self.num, complex(lam)) / d
        z = gauss(lam)
        d = self.den(z, QQ_I.zero)
        if not d:
            raise ZeroDivisionError(f"pole at {format_scalar(z)}")
        return self.num(z, QQ_I.zero) / d


class ExactMatrix:
    """Sparse square matrix with entries in ``RING``.

    Immutable by convention: every operation returns a new matrix.
    """

    __slots__ = ("n", "entries")

    def __init__(self, n: int, entries: dict | None = None):
        self.n = n
        self.entries = {k: v for k, v in (entries or {}).items() if v}

    # construction -----------------------------------------------------
    @classmethod
    def identity(cls, n: int, scale=1) -> "ExactMatrix":
        s = poly(scale)
        return cls(n, {(k, k): s for k in range(n)})

    @classmethod
    def zeros(cls, n: int) -> "ExactMatrix":
        return cls(n)

    @classmethod
    def from_array(cls, arr) -> "ExactMatrix":
        """From a nested list / numpy array of exact-coercible scalars."""
        arr = np.asarray(arr, dtype=object)
        n = arr.shape[0]
        if arr.shape != (n, n):
            raise ValueError("square matrix expected")
        return cls(n, {(r, c): poly(arr[r, c]) for r in range(n) for c in range(n) if arr[r, c] != 0})

    @classmethod
    def unit(cls, n: int, r: int, c: int, value=1) -> "ExactMatrix":
        return cls(n, {(r, c): poly(value)})

    # algebra ------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, ExactMatrix):
            raise TypeError(f"expected ExactMatrix, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError(f"dimension mismatch {self.n} vs {other.n}")

    def __add__(self, other):
        self._check(other)
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, ZERO) + v
        return ExactMatrix(self.n, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return ExactMatrix(self.n, {k: -v for k, v in self.entries.items()})

    def __mul__(self, scalar):
        if isinstance(scalar, ExactMatrix):
            raise TypeError("use @ for matrix products")
        s = poly(scalar)
        return ExactMatrix(self.n, {k: v * s for k, v in self.entries.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        rows: dict[int, list] = {}
        for (r, c), v in other.entries.items():
            rows.setdefault(r, []).append((c, v))
        out: dict = {}
        for (r, k), a in self.entries.items():
            for c, b in rows.get(k, ()):
                key = (r, c)
                out[key] = out.get(key, ZERO) + a * b
        return ExactMatrix(self.n, out)

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.n == other.n and (self - other).is_zero()

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.entries

    def __getitem__(self, key) -> PolyElement:
        return self.entries.get(key, ZERO)

    def items(self) -> Iterator:
        return iter(self.entries.items())

    def transpose(self) -> "ExactMatrix":
        return ExactMatrix(self.n, {(c, r): v for (r, c), v in self.entries.items()})

    def map(self, fn) -> "ExactMatrix":
        return ExactMatrix(self.n, {k: fn(v) for k, v in self.entries.items()})

    def diff(self, var=L1) -> "ExactMatrix":
        return self.map(lambda p: p.diff(var))

    def subs(self, l1=None, l2=None) -> "ExactMatrix":
        return self.map(lambda p: poly_subs(p, l1, l2))

    def trace(self) -> PolyElement:
        return sum((v for (r, c), v in self.entries.items() if r == c), ZERO)

    def degree(self, var=L1) -> int:
        idx = RING.gens.index(var)
        return max((max((m[idx] for m in p.monoms()), default=0) for p in self.entries.values()), default=0)

    def is_constant(self) -> bool:
        return all(p.is_ground for p in self.entries.values())

    def to_numpy(self, l1=0, l2=0) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=complex)
        for (r, c), p in self.entries.items():
            out[r, c] = poly_eval(p, l1, l2)
        return out

    def coefficients(self) -> dict:
        """``{(a, b): ExactMatrix}`` constant coefficient of ``l1**a l2**b``."""
        out: dict = {}
        for key, p in self.entries.items():
            for m, c in p.terms():
                out.setdefault(m, {})[key] = RING.ground_new(c)
        return {m: ExactMatrix(self.n, e) for m, e in sorted(out.items())}

    def max_abs_coefficient(self) -> float:
        best = 0.0
        for p in self.entries.values():
            for c in p.coeffs():
                best = max(best, abs(complex(float(c.x), float(c.y))))
        return best

    def constant_inverse(self) -> "ExactMatrix":
        """Exact inverse of a constant matrix (Gauss-Jordan over QQ_I)."""
        if not self.is_constant():
            raise ValueError("inverse only for constant matrices")
        n = self.n
        a = [[QQ_I.convert(self[(r, c)].LC) if self[(r, c)] else QQ_I.zero for c in range(n)] for r in range(n)]
        inv = [[QQ_I.one if r == c else QQ_I.zero for c in range(n)] for r in range(n)]
        for col in range(n):
            piv = next((r for r in range(col, n) if a[r][col]), None)
            if piv is None:
                raise np.linalg.LinAlgError("singular matrix")
            a[col], a[piv] = a[piv], a[col]
            inv[col], inv[piv] = inv[piv], inv[col]
            p = a[col][col]
            a[col] = [x / p for x in a[col]]
            inv[col] = [x / p for x in inv[col]]
            for r in range(n):
                if r != col and a[r][col]:
                    f = a[r][col]
                    a[r] = [x - f * y for x, y in zip(a[r], a[col])]
                    inv[r] = [x - f * y for x, y in zip(inv[r], inv[col])]
        return ExactMatrix.from_array([[inv[r][c] for c in range(n)] for r in range(n)])

    def constant_rank(self) -> int:
        """Exact rank of a constant matrix."""
        if not self.is_constant():
            raise ValueError("rank only for constant matrices")
        n = self.n
        a = [[QQ_I.convert(self[(r, c)].LC) if self[(r, c)] else QQ_I.zero for c in range(n)] for r in range(n)]
        rank = 0
        for col in range(n):
            piv = next((r for r in range(rank, n) if a[r][col]), None)
            if piv is None:
                continue
            a[rank], a[piv] = a[piv], a[rank]
            for r in range(n):
                if r != rank and a[r][col]:
                    f = a[r][col] / a[rank][col]
                    a[r] = [x - f * y for x, y in zip(a[r], a[rank])]
            rank += 1
        return rank

    def __repr__(self):
        return f"ExactMatrix(n={self.n}, nnz={len(self.entries)})"


def exact_product(mats: Iterable[ExactMatrix]) -> ExactMatrix:
    it = iter(mats)
    out = next(it)
    for m in it:
        out = out @ m
    return out
