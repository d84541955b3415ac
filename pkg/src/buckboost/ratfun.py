"""Real-coefficient polynomials and rational transfer functions in s.

Coefficients are stored in ascending powers of s everywhere in this package:
``Polynomial((a0, a1, a2))`` is ``a0 + a1*s + a2*s**2``.

Nothing here cancels poles against zeros behind the caller's back. A boost
plant's right-half-plane zero must stay visible even if a compensator root
lands on top of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DegreeOverflowError, NoRootsError, PoleHitError

MAX_DEGREE = 16


def _normalize(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    if not c:
        raise ValueError("polynomial needs at least one coefficient")
    if not all(math.isfinite(x) for x in c):
        raise ValueError(f"non-finite polynomial coefficient in {c!r}")
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float]):
        c = _normalize(coeffs)
        if len(c) - 1 > MAX_DEGREE:
            raise DegreeOverflowError(f"degree {len(c) - 1} exceeds supported maximum {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: float = 1.0) -> "Polynomial":
        c = npoly.polyfromroots(roots) * lead
        return cls(np.real(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def lead(self) -> float:
        return self.coeffs[-1]

    def low_order_zeros(self) -> int:
        """Multiplicity of the root at s = 0."""
        if self.is_zero:
            return 0
        k = 0
        while self.coeffs[k] == 0.0:
            k += 1
        return k

    def __call__(self, s):
        return npoly.polyval(s, self.coeffs)

    def __mul__(self, other: "Polynomial | float") -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(npoly.polymul(self.coeffs, other.coeffs))
        return Polynomial(np.asarray(self.coeffs) * float(other))

    __rmul__ = __mul__

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polyadd(self.coeffs, other.coeffs))

    def __neg__(self) -> "Polynomial":
        return self * -1.0

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def deriv(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial((0.0,))
        return Polynomial(npoly.polyder(self.coeffs))

    def roots(self) -> np.ndarray:
        return poly_roots(self)

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)!r})"


def poly_roots(p: Polynomial) -> np.ndarray:
    """All complex roots of ``p``, sorted by real part then imaginary part.

    Companion-matrix eigenvalues, each polished by a few Newton steps on the
    original coefficients. A polish step is kept only if it lowers the
    residual, so near-multiple roots (where Newton stalls) keep their
    eigenvalue estimate, which is good to roughly 1e-6 relative.
    """
    if p.degree < 1:
        raise NoRootsError(f"degree-{p.degree} polynomial has no roots")
    c = np.asarray(p.coeffs)
    k = p.low_order_zeros()
    roots = [0j] * k
    core = c[k:]
    if len(core) > 1:
        est = npoly.polyroots(core).astype(complex)
        dcore = npoly.polyder(core)
        for r in est:
            roots.append(_polish(core, dcore, r))
    out = np.array(roots, dtype=complex)
    return out[np.lexsort((out.imag, out.real))]


def _polish(c, dc, r, iters=4):
    res = abs(npoly.polyval(r, c))
    for _ in range(iters):
        d = npoly.polyval(r, dc)
        if d == 0 or res == 0:
            break
        cand = r - npoly.polyval(r, c) / d
        cres = abs(npoly.polyval(cand, c))
        if not cres < res:
            break
        r, res = cand, cres
    if abs(r.imag) <= 1e-14 * abs(r):
        r = complex(r.real, 0.0)
    return r


@dataclass(frozen=True)
class RationalTransferFunction:
    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if not isinstance(self.num, Polynomial):
            object.__setattr__(self, "num", Polynomial(self.num))
        if not isinstance(self.den, Polynomial):
            object.__setattr__(self, "den", Polynomial(self.den))
        if self.den.is_zero:
            raise ZeroDivisionError("denominator is identically zero")

    @classmethod
    def constant(cls, k: float) -> "RationalTransferFunction":
        return cls(Polynomial((k,)), Polynomial((1.0,)))

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def eval_jw(self, omega: float) -> complex:
        return eval_jw(self, omega)

    def freqresp(self, omega) -> np.ndarray:
        """Vectorized evaluation on the imaginary axis; no pole-hit checks."""
        s = 1j * np.asarray(omega, dtype=float)
        return self.num(s) / self.den(s)

    def poles(self) -> np.ndarray:
        return poly_roots(self.den) if self.den.degree else np.array([], dtype=complex)

    def zeros(self) -> np.ndarray:
        return poly_roots(self.num) if self.num.degree else np.array([], dtype=complex)

    def dc_gain(self) -> float:
        return dc_gain(self)

    def cancel_origin(self) -> "RationalTransferFunction":
        """Cancel common factors of s only. Other pole/zero pairs are left alone."""
        k = min(self.num.low_order_zeros(), self.den.low_order_zeros())
        if k == 0:
            return self
        return RationalTransferFunction(Polynomial(self.num.coeffs[k:]), Polynomial(self.den.coeffs[k:]))

    def __mul__(self, other):
        if isinstance(other, RationalTransferFunction):
            return series(self, other)
        return scale(float(other), self)

    __rmul__ = __mul__


TF = RationalTransferFunction


def eval_jw(tf: RationalTransferFunction, omega: float) -> complex:
    s = 1j * float(omega)
    d = tf.den(s)
    mag = sum(abs(c) * abs(omega) ** i for i, c in enumerate(tf.den.coeffs))
    if d == 0 or abs(d) <= 1e-14 * mag:
        raise PoleHitError(omega)
    return complex(tf.num(s) / d)


def _check_degree(tf: RationalTransferFunction) -> RationalTransferFunction:
    if max(tf.num.degree, tf.den.degree) > MAX_DEGREE:
        raise DegreeOverflowError(f"composition reaches degree {max(tf.num.degree, tf.den.degree)}")
    return tf


def series(*tfs: RationalTransferFunction) -> RationalTransferFunction:
    num = Polynomial((1.0,))
    den = Polynomial((1.0,))
    for tf in tfs:
        if len(num.coeffs) + len(tf.num.coeffs) - 2 > MAX_DEGREE or len(den.coeffs) + len(tf.den.coeffs) - 2 > MAX_DEGREE:
            raise DegreeOverflowError("series composition exceeds the supported degree")
        num = num * tf.num
        den = den * tf.den
    return _check_degree(RationalTransferFunction(num, den))


def unity_feedback(tf: RationalTransferFunction) -> RationalTransferFunction:
    """T/(1+T) as num/(den+num)."""
    return _check_degree(RationalTransferFunction(tf.num, tf.den + tf.num))


def scale(k: float, tf: RationalTransferFunction) -> RationalTransferFunction:
    return RationalTransferFunction(tf.num * k, tf.den)


def compose(kind: str, *tfs, k: float | None = None) -> RationalTransferFunction:
    if kind == "series":
        return series(*tfs)
    if kind == "unity_feedback":
        if len(tfs) != 1:
            raise TypeError("unity_feedback takes exactly one transfer function")
        return unity_feedback(tfs[0])
    if kind == "scale":
        if k is None:
            k, *tfs = tfs
        if len(tfs) != 1:
            raise TypeError("scale takes a gain and one transfer function")
        return scale(float(k), tfs[0])
    raise ValueError(f"unknown composition kind {kind!r}")


def dc_gain(tf: RationalTransferFunction) -> float:
    """Limit of ``tf`` as s -> 0, after cancelling shared powers of s.

    Returns a signed ``math.inf`` when a pole at the origin survives.
    """
    if tf.num.is_zero:
        return 0.0
    kn = tf.num.low_order_zeros()
    kd = tf.den.low_order_zeros()
    if kn > kd:
        return 0.0
    ratio = tf.num.coeffs[kn] / tf.den.coeffs[kd]
    if kn < kd:
        return math.copysign(math.inf, ratio)
    return ratio
