"""Polynomials in z, discrete transfer functions and their simulation.

Coefficients are always stored in descending powers of z, so ``[1, -0.5]``
is ``z - 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ZERO_TOL = 1e-15
BOUNDARY_TOL = 1e-9


def _strip(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(coeffs) > ZERO_TOL)
    if nz.size == 0:
        return np.zeros(1)
    return coeffs[nz[0]:]


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Real polynomial, coefficients in descending powers of z.

    Leading coefficients with magnitude below ``ZERO_TOL`` are stripped on
    construction; the zero polynomial is ``[0]``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial needs a non-empty 1-D coefficient sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c = _strip(c)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, z):
        return np.polyval(self.coeffs, z)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __mul__(self, other):
        return poly_mul(self, as_poly(other))

    __rmul__ = __mul__

    def __add__(self, other):
        return poly_add(self, as_poly(other))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return poly_add(self, -as_poly(other))

    def monic(self) -> Polynomial:
        if self.is_zero:
            raise ValueError("zero polynomial cannot be normalized")
        return Polynomial(self.coeffs / self.coeffs[0])

    def tolist(self) -> list[float]:
        return [float(c) for c in self.coeffs]

    def __repr__(self):
        return f"Polynomial({self.tolist()!r})"


def as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial(p)


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return Polynomial(np.convolve(p.coeffs, q.coeffs))


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    a, b = p.coeffs, q.coeffs
    n = max(a.size, b.size)
    out = np.zeros(n)
    out[n - a.size:] += a
    out[n - b.size:] += b
    return Polynomial(out)


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Rational function ``num(z) / den(z)`` with sample time ``ts``.

    The denominator is normalized to be monic.  Only proper functions are
    accepted.
    """

    num: Polynomial
    den: Polynomial
    ts: float

    def __post_init__(self):
        num, den = as_poly(self.num), as_poly(self.den)
        if den.is_zero:
            raise ValueError("denominator is the zero polynomial")
        if not self.ts > 0:
            raise ValueError(f"sample time must be positive, got {self.ts!r}")
        lead = den.coeffs[0]
        num = Polynomial(num.coeffs / lead)
        den = Polynomial(den.coeffs / lead)
        if not num.is_zero and num.degree > den.degree:
            raise ValueError(
                f"improper transfer function: deg(num)={num.degree} > deg(den)={den.degree}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "ts", float(self.ts))

    @classmethod
    def gain(cls, k: float, ts: float) -> TransferFunction:
        return cls(Polynomial([k]), Polynomial([1.0]), ts)

    @property
    def order(self) -> int:
        return self.den.degree

    @property
    def strictly_proper(self) -> bool:
        return self.num.is_zero or self.num.degree < self.den.degree

    def __call__(self, z):
        return self.num(z) / self.den(z)

    def dc_gain(self) -> float:
        return float(self.num(1.0) / self.den(1.0))

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den and self.ts == other.ts

    def __hash__(self):
        return hash((self.num, self.den, self.ts))

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()}, ts={self.ts})"


def _check_ts(*tfs: TransferFunction) -> None:
    ts = {tf.ts for tf in tfs}
    if len(ts) > 1:
        raise ValueError(f"sample-time mismatch: {sorted(ts)}")


def tf_series(g1: TransferFunction, g2: TransferFunction) -> TransferFunction:
    """Cascade ``g1`` then ``g2``.  No pole-zero cancellation is attempted."""
    _check_ts(g1, g2)
    return TransferFunction(g1.num * g2.num, g1.den * g2.den, g1.ts)


def tf_feedback(g: TransferFunction, c: TransferFunction) -> TransferFunction:
    """Unity negative-feedback closed loop ``G C / (1 + G C)``."""
    _check_ts(g, c)
    open_num = g.num * c.num
    return TransferFunction(open_num, g.den * c.den + open_num, g.ts)


class LtiSimState:
    """Direct Form I realization of a proper transfer function.

    Zero initial conditions; the history buffers have length ``deg(den)``.
    """

    def __init__(self, tf: TransferFunction):
        self.tf = tf
        n = tf.order
        b = np.zeros(n + 1)
        b[n + 1 - tf.num.coeffs.size:] = tf.num.coeffs
        self._b0 = float(b[0])
        self._b = [float(x) for x in b[1:]]
        self._a = [float(x) for x in tf.den.coeffs[1:]]
        self.u_hist = [0.0] * n
        self.y_hist = [0.0] * n

    def peek(self) -> float:
        """Output contribution of past samples only (excludes the feedthrough)."""
        acc = 0.0
        for bi, ui in zip(self._b, self.u_hist):
            acc += bi * ui
        for ai, yi in zip(self._a, self.y_hist):
            acc -= ai * yi
        return acc

    def step(self, u_k: float) -> float:
        y_k = self._b0 * u_k + self.peek()
        if self.u_hist:
            self.u_hist.insert(0, u_k)
            self.u_hist.pop()
            self.y_hist.insert(0, y_k)
            self.y_hist.pop()
        return y_k


def lti_step(state: LtiSimState, u_k: float) -> float:
    return state.step(u_k)


def lsim(tf: TransferFunction, u) -> np.ndarray:
    """Simulate ``tf`` from rest over the whole input sequence."""
    state = LtiSimState(tf)
    return np.array([state.step(float(x)) for x in np.asarray(u, dtype=float)])


# -- unit-circle stability ---------------------------------------------------

def _jury_batch(c: np.ndarray) -> np.ndarray:
    """Strict Jury test on rows of ``c`` (descending coefficients, common degree).

    Each stage of the Jury table is the pair of 2x2-determinant rows; here a
    stage is kept as the reduced polynomial ``a0*p(z) - an*z^n*p(1/z)``, whose
    leading coefficient must stay larger in magnitude than the trailing one.
    Rows are rescaled at every stage, which leaves the inequalities intact.
    """
    c = np.array(c, dtype=float, copy=True)
    m, width = c.shape
    n = width - 1
    ok = np.ones(m, dtype=bool)
    # sign-normalize so the leading coefficient is positive
    c *= np.sign(c[:, :1])
    # necessary conditions of the Jury table
    ok &= c.sum(axis=1) > 0
    alt = (-1.0) ** np.arange(n, -1, -1)
    ok &= ((-1.0) ** n) * (c * alt).sum(axis=1) > 0
    for deg in range(n, 0, -1):
        a0 = c[:, 0]
        an = c[:, deg]
        ok &= np.abs(an) < np.abs(a0)
        reduced = a0[:, None] * c[:, :deg] - an[:, None] * c[:, deg:0:-1]
        scale = np.max(np.abs(reduced), axis=1)
        scale[scale == 0] = 1.0
        c = reduced / scale[:, None]
        bad = ~np.isfinite(c).all(axis=1)
        ok &= ~bad
        c[bad] = 1.0
    return ok


def is_stable(p, tol: float = BOUNDARY_TOL) -> bool:
    """True iff every root of ``p`` lies strictly inside the unit circle.

    Roots within ``tol`` of the circle count as unstable: the test runs on
    ``p((1 - tol) w)``, whose roots are the originals scaled by ``1/(1 - tol)``.
    """
    p = as_poly(p)
    if p.degree < 1:
        raise ValueError("stability of a degree-0 polynomial is undefined")
    return bool(is_stable_batch(p.coeffs[None, :], tol)[0])


def is_stable_batch(coeffs, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorized :func:`is_stable` over rows of equal-degree polynomials."""
    c = np.atleast_2d(np.asarray(coeffs, dtype=float))
    n = c.shape[1] - 1
    if n < 1:
        raise ValueError("stability of a degree-0 polynomial is undefined")
    lead = c[:, 0]
    out = np.zeros(c.shape[0], dtype=bool)
    valid = np.abs(lead) > ZERO_TOL
    if valid.any():
        shrink = (1.0 - tol) ** np.arange(n, -1, -1)
        out[valid] = _jury_batch(c[valid] * shrink)
    return out


def polynomial_roots(p) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix."""
    p = as_poly(p)
    if p.degree < 1:
        raise ValueError("degree-0 polynomial has no roots")
    c = p.coeffs / p.coeffs[0]
    n = p.degree
    companion = np.zeros((n, n))
    companion[0, :] = -c[1:]
    companion[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(companion).astype(complex)


def max_root_modulus(p) -> float:
    return float(np.max(np.abs(polynomial_roots(p))))
