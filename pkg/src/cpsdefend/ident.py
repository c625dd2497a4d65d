"""ARX identification: regressors, batch and recursive least squares.

The model is ``A(q) y(k) = B(q) u(k)`` with

    A(q) = 1 + a1 q^-1 + ... + al q^-l
    B(q) =     b1 q^-1 + ... + bm q^-m

and the parameter vector is stacked as ``[a1..al, b1..bm]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .lti import Polynomial, TransferFunction, lsim

MAX_CONDITION = 1e12


class IdentificationError(RuntimeError):
    """Regressor is rank deficient or too ill-conditioned to solve."""


@dataclass(frozen=True)
class ArxOrders:
    l: int
    m: int

    def __post_init__(self):
        if int(self.l) < 1 or int(self.m) < 1:
            raise ValueError(f"ARX orders must be >= 1, got l={self.l}, m={self.m}")

    @property
    def n_params(self) -> int:
        return self.l + self.m

    @property
    def lag(self) -> int:
        return max(self.l, self.m)


@dataclass(frozen=True)
class ArxTheta:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).ravel())
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).ravel())

    @property
    def orders(self) -> ArxOrders:
        return ArxOrders(self.a.size, self.b.size)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    @classmethod
    def from_vector(cls, vec, orders: ArxOrders) -> ArxTheta:
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != orders.n_params:
            raise ValueError(f"expected {orders.n_params} parameters, got {vec.size}")
        return cls(vec[:orders.l], vec[orders.l:])


def regressor_row(u, y, k: int, orders: ArxOrders) -> np.ndarray:
    """``[-y(k-1) .. -y(k-l), u(k-1) .. u(k-m)]``."""
    past_y = [-y[k - i] for i in range(1, orders.l + 1)]
    past_u = [u[k - i] for i in range(1, orders.m + 1)]
    return np.array(past_y + past_u, dtype=float)


def build_regressor(u, y, orders: ArxOrders):
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise ValueError(f"u and y lengths differ ({u.size} vs {y.size})")
    lag = orders.lag
    if u.size <= lag:
        raise ValueError(f"need more than {lag} samples to form a regressor row, got {u.size}")
    n_rows = u.size - lag
    X = np.empty((n_rows, orders.n_params))
    for i in range(1, orders.l + 1):
        X[:, i - 1] = -y[lag - i:u.size - i]
    for i in range(1, orders.m + 1):
        X[:, orders.l + i - 1] = u[lag - i:u.size - i]
    return X, y[lag:].copy()


def _condition(X: np.ndarray) -> float:
    # condition of the column-equilibrated normal matrix
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        return np.inf
    s = np.linalg.svd(X / norms, compute_uv=False)
    if s[-1] == 0:
        return np.inf
    return float((s[0] / s[-1]) ** 2)


def batch_ls(X, yv, orders: ArxOrders | None = None):
    """Least-squares ``theta`` minimizing ``||X theta - yv||`` via QR.

    Returns an :class:`ArxTheta` when ``orders`` is given, otherwise the raw
    parameter vector.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    yv = np.asarray(yv, dtype=float).ravel()
    if X.shape[0] != yv.size:
        raise ValueError("X and yv row counts differ")
    if X.shape[0] < X.shape[1]:
        raise IdentificationError(f"underdetermined: {X.shape[0]} rows for {X.shape[1]} parameters")
    cond = _condition(X)
    if not cond < MAX_CONDITION:
        raise IdentificationError(f"regressor ill-conditioned (normal-matrix condition {cond:.3g})")
    q, r = np.linalg.qr(X)
    theta = solve_triangular(r, q.T @ yv)
    if orders is None:
        return theta
    return ArxTheta.from_vector(theta, orders)


def theta_to_tf(theta: ArxTheta, ts: float) -> TransferFunction:
    """Transfer function whose difference equation is the ARX predictor."""
    n = max(theta.a.size, theta.b.size)
    den = np.zeros(n + 1)
    den[0] = 1.0
    den[1:theta.a.size + 1] = theta.a
    num = np.zeros(n + 1)
    num[1:theta.b.size + 1] = theta.b
    return TransferFunction(Polynomial(num), Polynomial(den), ts)


def prediction_errors(theta: ArxTheta, u, y) -> np.ndarray:
    """``A(q) y - B(q) u`` for every sample with a full history."""
    X, yv = build_regressor(u, y, theta.orders)
    return yv - X @ theta.vector


# -- recursive least squares -------------------------------------------------

@dataclass
class RlsState:
    """Exponentially weighted RLS in covariance form."""

    orders: ArxOrders
    theta: np.ndarray
    P: np.ndarray
    lam: float
    count: int = 0

    @property
    def arx_theta(self) -> ArxTheta:
        return ArxTheta.from_vector(self.theta, self.orders)

    def update(self, phi, y_k: float) -> float:
        phi = np.asarray(phi, dtype=float)
        err = float(y_k - phi @ self.theta)
        Pphi = self.P @ phi
        gain = Pphi / (self.lam + phi @ Pphi)
        self.theta = self.theta + gain * err
        P = (self.P - np.outer(gain, Pphi)) / self.lam
        self.P = 0.5 * (P + P.T)
        self.count += 1
        return err


def _check_rls_args(lam: float, p0: float) -> None:
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"forgetting factor must lie in (0, 1], got {lam!r}")
    if not p0 > 0:
        raise ValueError(f"initial covariance scale must be positive, got {p0!r}")


def rls_init(orders: ArxOrders, lam: float = 1.0, p0: float = 1e6) -> RlsState:
    _check_rls_args(lam, p0)
    d = orders.n_params
    return RlsState(orders, np.zeros(d), p0 * np.eye(d), float(lam))


def rls_update(state: RlsState, phi, y_k: float):
    """One RLS step; returns ``(state, a_priori_error)``."""
    if len(phi) != state.orders.n_params:
        raise ValueError(f"regressor length {len(phi)} != {state.orders.n_params}")
    err = state.update(phi, y_k)
    return state, err


@dataclass
class SqrtRlsState:
    """Same weighted least-squares recursion, carried as a QR factor.

    Keeps upper-triangular ``R`` with ``R^T R = P^-1`` and ``z = R theta``;
    every update re-triangularizes ``[sqrt(lam) [R z]; [phi^T y]]``.  This
    stays accurate on the nearly collinear regressors that closed-loop data
    produce, where the covariance form loses positive definiteness.
    """

    orders: ArxOrders
    R: np.ndarray
    z: np.ndarray
    lam: float
    theta: np.ndarray = field(default=None)
    count: int = 0

    def __post_init__(self):
        if self.theta is None:
            self.theta = np.zeros(self.orders.n_params)

    @property
    def arx_theta(self) -> ArxTheta:
        return ArxTheta.from_vector(self.theta, self.orders)

    @property
    def P(self) -> np.ndarray:
        r_inv = solve_triangular(self.R, np.eye(self.R.shape[0]))
        return r_inv @ r_inv.T

    def update(self, phi, y_k: float) -> float:
        phi = np.asarray(phi, dtype=float)
        d = phi.size
        err = float(y_k - phi @ self.theta)
        s = np.sqrt(self.lam)
        stacked = np.empty((d + 1, d + 1))
        stacked[:d, :d] = s * self.R
        stacked[:d, d] = s * self.z
        stacked[d, :d] = phi
        stacked[d, d] = y_k
        r = np.linalg.qr(stacked, mode="r")
        self.R = r[:d, :d]
        self.z = r[:d, d]
        self.theta = solve_triangular(self.R, self.z)
        self.count += 1
        return err


def sqrt_rls_init(orders: ArxOrders, lam: float = 1.0, p0: float = 1e6) -> SqrtRlsState:
    _check_rls_args(lam, p0)
    d = orders.n_params
    return SqrtRlsState(orders, np.eye(d) / np.sqrt(p0), np.zeros(d), float(lam))


# -- estimator API -----------------------------------------------------------

def _signals(X, y):
    u = check_array(X, ensure_2d=False, dtype=float)
    if u.ndim == 2:
        if u.shape[1] != 1:
            raise ValueError(f"ARX models are single-input; got {u.shape[1]} columns")
        u = u[:, 0]
    if y is None:
        return u, None
    y = check_array(y, ensure_2d=False, dtype=float).ravel()
    check_consistent_length(u, y)
    return u, y


class ArxRegressor(RegressorMixin, BaseEstimator):
    """Batch ARX fit.

    ``X`` is the input signal (1-D, or a single column), ``y`` the output.
    ``predict`` simulates the fitted model from rest on a new input.
    """

    def __init__(self, na=2, nb=2, ts=1.0):
        self.na = na
        self.nb = nb
        self.ts = ts

    def fit(self, X, y):
        u, y = _signals(X, y)
        orders = ArxOrders(self.na, self.nb)
        Xr, yv = build_regressor(u, y, orders)
        self.theta_ = batch_ls(Xr, yv, orders)
        self.coef_ = self.theta_.vector
        self.n_features_in_ = 1
        return self

    def to_tf(self) -> TransferFunction:
        check_is_fitted(self, "theta_")
        return theta_to_tf(self.theta_, self.ts)

    def predict(self, X):
        check_is_fitted(self, "theta_")
        u, _ = _signals(X, None)
        return lsim(self.to_tf(), u)

    def predict_one_step(self, X, y):
        """One-step-ahead predictions ``y_hat(k|k-1)`` for samples past the lag."""
        check_is_fitted(self, "theta_")
        u, y = _signals(X, y)
        Xr, _ = build_regressor(u, y, self.theta_.orders)
        return Xr @ self.coef_


class RecursiveArx(BaseEstimator):
    """Online ARX estimator.

    ``method="covariance"`` is textbook RLS; ``method="qr"`` propagates the
    square-root information factor instead and is the better choice on
    closed-loop data.
    """

    def __init__(self, na=2, nb=2, forgetting=1.0, p0=1e8, method="qr", ts=1.0):
        self.na = na
        self.nb = nb
        self.forgetting = forgetting
        self.p0 = p0
        self.method = method
        self.ts = ts

    def _reset(self):
        orders = ArxOrders(self.na, self.nb)
        if self.method == "covariance":
            self.state_ = rls_init(orders, self.forgetting, self.p0)
        elif self.method == "qr":
            self.state_ = sqrt_rls_init(orders, self.forgetting, self.p0)
        else:
            raise ValueError(f"unknown RLS method {self.method!r}")
        self.errors_ = []
        self._u_hist = []
        self._y_hist = []
        self.n_features_in_ = 1

    def update(self, phi, y_k: float) -> float:
        """Feed one regressor row; returns the a-priori prediction error."""
        if not hasattr(self, "state_"):
            self._reset()
        err = self.state_.update(phi, y_k)
        self.errors_.append(err)
        return err

    def partial_fit(self, X, y):
        """Feed a chunk of signal; history carries over between calls."""
        if not hasattr(self, "state_"):
            self._reset()
        u, y = _signals(X, y)
        orders = self.state_.orders
        lag = orders.lag
        for uk, yk in zip(u, y):
            if len(self._y_hist) >= lag:
                phi = np.array(
                    [-self._y_hist[-i] for i in range(1, orders.l + 1)]
                    + [self._u_hist[-i] for i in range(1, orders.m + 1)]
                )
                self.update(phi, yk)
            self._u_hist.append(float(uk))
            self._y_hist.append(float(yk))
            del self._u_hist[:-lag], self._y_hist[:-lag]
        return self

    def fit(self, X, y):
        self._reset()
        return self.partial_fit(X, y)

    @property
    def theta_(self) -> ArxTheta:
        check_is_fitted(self, "state_")
        return self.state_.arx_theta

    @property
    def coef_(self) -> np.ndarray:
        return self.theta_.vector

    @property
    def covariance_(self) -> np.ndarray:
        check_is_fitted(self, "state_")
        return self.state_.P

    def to_tf(self) -> TransferFunction:
        return theta_to_tf(self.theta_, self.ts)

    def predict(self, X):
        u, _ = _signals(X, None)
        return lsim(self.to_tf(), u)
