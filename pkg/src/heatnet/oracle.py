"""Reference solutions ``u(T, x) = E[phi(x + T mu + S W_T)]``.

Ridge initial conditions ``phi(x) = g(w.x + b)`` reduce to one-dimensional
Gaussian expectations ``E g(m + sigma Z)`` with ``m = w.x + T w.mu + b`` and
``sigma^2 = 2 T w^T A w``. Those are computed by Gauss-Hermite quadrature for
small ``sigma``; for large ``sigma`` sigmoid-type profiles are split into a
piecewise-linear asymptote (closed form under a Gaussian) plus an
exponentially decaying remainder integrated by Gauss-Legendre on each side of
the kink. Both routes carry a node-doubling error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit, ndtr, roots_hermite, roots_legendre

from . import rng
from .ann import SOFTPLUS, LOGISTIC
from .flow import FlowSpec

GH_NODES = 200
TENSOR_NODES = 40
GL_NODES = 200
SIGMA_SWITCH = 3.0
ERROR_TOL = 1e-9
_TAIL = 45.0  # exp(-45) < 3e-20
_CHECK_POINTS = 257


class UnsupportedError(ValueError):
    """The oracle has no reference solution for this (initial condition, flow) pair."""


class OracleAccuracyError(RuntimeError):
    """The node-doubling error estimate exceeded the tolerance."""


@lru_cache(maxsize=None)
def _hermite(n: int):
    x, w = roots_hermite(n)
    return x * np.sqrt(2.0), w / np.sqrt(np.pi)


@lru_cache(maxsize=None)
def _legendre_halves(n: int):
    x, w = roots_legendre(n)
    pos = 0.5 * _TAIL * (x + 1.0)
    return pos, 0.5 * _TAIL * w


def _gh(f, m, sigma, nodes):
    z, w = _hermite(nodes)
    return (f(m[:, None] + sigma * z[None, :]) * w).sum(axis=1)


def _split_gl(rem_neg, rem_pos, m, sigma, nodes):
    """``int rem(x) N(x; m, sigma^2) dx`` with the kink of ``rem`` at 0."""
    t, w = _legendre_halves(nodes)
    c = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    mm = m[:, None]
    right = (rem_pos(t) * w)[None, :] * np.exp(-0.5 * ((t[None, :] - mm) / sigma) ** 2)
    left = (rem_neg(-t) * w)[None, :] * np.exp(-0.5 * ((-t[None, :] - mm) / sigma) ** 2)
    return c * (right.sum(axis=1) + left.sum(axis=1))


def _relu_mean(m, sigma):
    r = m / sigma
    return m * ndtr(r) + sigma * np.exp(-0.5 * r * r) / np.sqrt(2.0 * np.pi)


# decaying remainders: softplus - relu, logistic - heaviside
def _sp_rem(x):
    return np.log1p(np.exp(-np.abs(x)))


def _lg_rem_pos(x):
    return -expit(-x)


def _lg_rem_neg(x):
    return expit(x)


def _softplus_mean(m, sigma, nodes):
    return _relu_mean(m, sigma) + _split_gl(_sp_rem, _sp_rem, m, sigma, nodes)


def _logistic_mean(m, sigma, nodes):
    return ndtr(m / sigma) + _split_gl(_lg_rem_neg, _lg_rem_pos, m, sigma, nodes)


def _logistic_prime_mean(m, sigma, nodes):
    f = LOGISTIC.derivative
    return _split_gl(f, f, m, sigma, nodes)


@dataclass(frozen=True)
class RidgeProfile:
    """A named scalar profile ``g`` with derivatives and Gaussian-smoothing routes.

    ``wide_mean``/``wide_slope`` (if set) compute ``E g(m + sigma Z)`` and
    ``E g'(m + sigma Z)`` for ``sigma > SIGMA_SWITCH``; ``closed_mean``/
    ``closed_slope`` are exact formulas used for every ``sigma``.
    """

    name: str
    g: Callable = field(repr=False)
    dg: Callable = field(repr=False)
    max_slope: float
    max_curvature: float
    growth: tuple  # (c, gamma) with |g(t)| <= c (1 + |t|^gamma)
    wide_mean: Callable | None = field(default=None, repr=False)
    wide_slope: Callable | None = field(default=None, repr=False)
    closed_mean: Callable | None = field(default=None, repr=False)
    closed_slope: Callable | None = field(default=None, repr=False)


def _gauss_expect(f, wide, closed, m, sigma, nodes, check=True):
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if closed is not None:
        return closed(m, sigma), 0.0
    if sigma == 0.0:
        return f(m), 0.0
    if sigma <= SIGMA_SWITCH or wide is None:
        route = lambda mm, k: _gh(f, mm, sigma, k)
    else:
        route = lambda mm, k: wide(mm, sigma, k)
    val = route(m, nodes)
    err = 0.0
    if check:
        # error estimate on up to _CHECK_POINTS values spanning the range of m
        if m.size > _CHECK_POINTS:
            idx = np.unique(np.linspace(0, m.size - 1, _CHECK_POINTS).astype(int))
            order = np.argsort(m)
            sub = order[idx]
        else:
            sub = np.arange(m.size)
        err = float(np.max(np.abs(route(m[sub], 2 * nodes) - val[sub])))
        if err > ERROR_TOL:
            raise OracleAccuracyError(
                f"quadrature error estimate {err:.2e} exceeds {ERROR_TOL:.0e} (sigma={sigma:.3g})"
            )
    return val, err


def _tanh_mean(m, sigma, nodes):
    return 2.0 * _logistic_mean(2.0 * m, 2.0 * sigma, nodes) - 1.0


def _tanh_slope(m, sigma, nodes):
    return 4.0 * _logistic_prime_mean(2.0 * m, 2.0 * sigma, nodes)


PROFILES = {
    p.name: p
    for p in (
        RidgeProfile("softplus", SOFTPLUS.value, SOFTPLUS.derivative, 1.0, 0.25, (1.0, 1.0),
                     wide_mean=_softplus_mean, wide_slope=_logistic_mean),
        RidgeProfile("logistic", LOGISTIC.value, LOGISTIC.derivative, 0.25, LOGISTIC.max_curvature,
                     (1.0, 0.0), wide_mean=_logistic_mean, wide_slope=_logistic_prime_mean),
        RidgeProfile("tanh", np.tanh, lambda t: 1.0 - np.tanh(t) ** 2, 1.0, 4.0 / (3.0 * np.sqrt(3.0)),
                     (1.0, 0.0), wide_mean=_tanh_mean, wide_slope=_tanh_slope),
        RidgeProfile("sin", np.sin, np.cos, 1.0, 1.0, (1.0, 0.0),
                     closed_mean=lambda m, s: np.sin(m) * np.exp(-0.5 * s * s),
                     closed_slope=lambda m, s: np.cos(m) * np.exp(-0.5 * s * s)),
        RidgeProfile("cos", np.cos, lambda t: -np.sin(t), 1.0, 1.0, (1.0, 0.0),
                     closed_mean=lambda m, s: np.cos(m) * np.exp(-0.5 * s * s),
                     closed_slope=lambda m, s: -np.sin(m) * np.exp(-0.5 * s * s)),
        RidgeProfile("square", np.square, lambda t: 2.0 * t, np.inf, 2.0, (1.0, 2.0),
                     closed_mean=lambda m, s: m * m + s * s,
                     closed_slope=lambda m, s: 2.0 * m),
        RidgeProfile("identity", lambda t: np.asarray(t, dtype=float), np.ones_like, 1.0, 0.0, (1.0, 1.0),
                     closed_mean=lambda m, s: m.copy(),
                     closed_slope=lambda m, s: np.ones_like(m)),
    )
}


def gaussian_mean(profile: str | RidgeProfile, m, sigma: float, nodes: int = GH_NODES,
                  check: bool = True):
    """``E g(m + sigma Z)`` for a named profile, with its error estimate."""
    p = PROFILES[profile] if isinstance(profile, str) else profile
    return _gauss_expect(p.g, p.wide_mean, p.closed_mean, m, float(sigma), nodes, check)


def gaussian_slope(profile: str | RidgeProfile, m, sigma: float, nodes: int = GH_NODES,
                   check: bool = True):
    """``E g'(m + sigma Z)``, with its error estimate."""
    p = PROFILES[profile] if isinstance(profile, str) else profile
    return _gauss_expect(p.dg, p.wide_slope, p.closed_slope, m, float(sigma), nodes, check)


# ---------------------------------------------------------------------------
# initial conditions


def _vec(w) -> np.ndarray:
    w = np.array(w, dtype=float).reshape(-1)
    w.setflags(write=False)
    return w


def _envelope(c: float, gamma: float, scale: float, shift: float) -> float:
    # |g(s t + b)| <= c (1 + (|b| + s|x|)^gamma) <= C (1 + |x|^gamma)
    k = max(1.0, 2.0 ** (gamma - 1.0))
    return c * max(1.0 + k * abs(shift) ** gamma, k * scale**gamma)


@dataclass(frozen=True, eq=False)
class RidgeSoftplus:
    """``phi(x) = ln(1 + exp(w.x - K)) + K``."""

    w: np.ndarray
    K: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", _vec(self.w))
        object.__setattr__(self, "K", float(self.K))

    @classmethod
    def ones(cls, d: int, K: float = 0.0) -> "RidgeSoftplus":
        return cls(np.ones(d), K)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def ridge(self):
        return PROFILES["softplus"], self.w, -self.K, self.K

    def __call__(self, X):
        return SOFTPLUS.value(np.asarray(X, dtype=float) @ self.w - self.K) + self.K

    @property
    def growth(self) -> tuple:
        return max(np.log(2.0) + 2.0 * abs(self.K), float(np.linalg.norm(self.w))), 1.0


@dataclass(frozen=True, eq=False)
class Ridge:
    """``phi(x) = g(w.x + b)`` for a named profile ``g``."""

    profile: str
    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown ridge profile {self.profile!r}; expected one of {sorted(PROFILES)}")
        object.__setattr__(self, "w", _vec(self.w))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def ridge(self):
        return PROFILES[self.profile], self.w, self.b, 0.0

    def __call__(self, X):
        return PROFILES[self.profile].g(np.asarray(X, dtype=float) @ self.w + self.b)

    @property
    def growth(self) -> tuple:
        c, gamma = PROFILES[self.profile].growth
        return _envelope(c, gamma, float(np.linalg.norm(self.w)), self.b), gamma


@dataclass(frozen=True, eq=False)
class Linear:
    """``phi(x) = w.x + b``."""

    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", _vec(self.w))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def __call__(self, X):
        return np.asarray(X, dtype=float) @ self.w + self.b

    @property
    def growth(self) -> tuple:
        return max(abs(self.b), float(np.linalg.norm(self.w))), 1.0


@dataclass(frozen=True, eq=False)
class SquaredNorm:
    """``phi(x) = ||x||^2 + c0``; ``dim`` may be left open."""

    c0: float = 0.0
    dim: int | None = None

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return np.sum(X * X, axis=-1) + self.c0

    @property
    def growth(self) -> tuple:
        return max(1.0, abs(self.c0)), 2.0


InitialCondition = RidgeSoftplus | Ridge | Linear | SquaredNorm


def check_growth(ic, probes) -> list:
    """Probe points where ``|phi(x)| > c (1 + ||x||^gamma)``; empty when the envelope holds."""
    X = np.atleast_2d(np.asarray(probes, dtype=float))
    c, gamma = ic.growth
    lhs = np.abs(ic(X))
    rhs = c * (1.0 + np.linalg.norm(X, axis=1) ** gamma)
    return [int(i) for i in np.flatnonzero(lhs > rhs * (1.0 + 1e-12))]


def check_supported(ic, spec: FlowSpec) -> None:
    d = getattr(ic, "dim", None)
    if d is not None and d != spec.dim:
        raise UnsupportedError(f"initial condition has dimension {d}, flow has {spec.dim}")
    if isinstance(ic, SquaredNorm) and not spec.is_heat:
        raise UnsupportedError("SquaredNorm has a closed form only for the heat equation (A = I, mu = 0)")
    if not isinstance(ic, (RidgeSoftplus, Ridge, Linear, SquaredNorm)):
        raise UnsupportedError(f"no reference solution for {type(ic).__name__}")


def _points(x):
    X = np.asarray(x, dtype=float)
    return (X[None, :], True) if X.ndim == 1 else (X, False)


def _ridge_params(ic, spec: FlowSpec):
    profile, w, shift, offset = ic.ridge()
    sigma = float(np.sqrt(max(0.0, 2.0 * spec.T * (w @ spec.A @ w))))
    drift = spec.T * float(w @ spec.mu) + shift
    return profile, w, drift, offset, sigma


def exact_solution(ic, spec: FlowSpec, x, nodes: int = GH_NODES, return_error: bool = False):
    """``u(T, x)`` for one point or a batch of points."""
    check_supported(ic, spec)
    X, single = _points(x)
    err = 0.0
    if isinstance(ic, Linear):
        val = (X + spec.T * spec.mu) @ ic.w + ic.b
    elif isinstance(ic, SquaredNorm):
        val = np.sum(X * X, axis=1) + 2.0 * spec.dim * spec.T + ic.c0
    else:
        profile, w, drift, offset, sigma = _ridge_params(ic, spec)
        val, err = gaussian_mean(profile, X @ w + drift, sigma, nodes)
        val = val + offset
    out = float(val[0]) if single else val
    return (out, err) if return_error else out


def exact_gradient(ic, spec: FlowSpec, x, nodes: int = GH_NODES):
    """``grad_x u(T, x)``; shape ``(d,)`` or ``(m, d)``."""
    check_supported(ic, spec)
    X, single = _points(x)
    if isinstance(ic, Linear):
        G = np.broadcast_to(ic.w, X.shape).copy()
    elif isinstance(ic, SquaredNorm):
        G = 2.0 * X
    else:
        profile, w, drift, _, sigma = _ridge_params(ic, spec)
        slope, _ = gaussian_slope(profile, X @ w + drift, sigma, nodes)
        G = slope[:, None] * w[None, :]
    return G[0] if single else G


def lipschitz_bound(ic, spec: FlowSpec, domain=None) -> float:
    """Upper bound on ``||grad u(T, .)||`` (over ``[a, b]^d`` when needed)."""
    if isinstance(ic, Linear):
        return float(np.linalg.norm(ic.w))
    if isinstance(ic, SquaredNorm):
        if domain is None:
            return np.inf
        a, b = domain
        return 2.0 * max(abs(a), abs(b)) * np.sqrt(spec.dim)
    profile, w, *_ = ic.ridge()
    return float(np.linalg.norm(w) * profile.max_slope)


def hessian_bound(ic, spec: FlowSpec) -> float:
    """Upper bound on the spectral norm of ``Hess_x u(T, .)``."""
    if isinstance(ic, Linear):
        return 0.0
    if isinstance(ic, SquaredNorm):
        return 2.0
    profile, w, *_ = ic.ridge()
    return float((w @ w) * profile.max_curvature)


def kernel_convolution(phi, T: float, x, nodes: int = TENSOR_NODES) -> float:
    """Heat-kernel convolution ``(4 pi T)^(-d/2) int phi(y) exp(-|x-y|^2 / 4T) dy``.

    Tensor-product Gauss-Hermite after ``y = x + 2 sqrt(T) u``; ``phi`` maps an
    ``(m, d)`` array to ``(m,)``. Limited to ``d <= 4``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.shape[0]
    if d > 4:
        raise UnsupportedError(
            f"tensor quadrature is limited to d <= 4 (got d={d}); use exact_solution or mc_reference"
        )
    if not T > 0:
        raise ValueError("T must be positive")
    u, w = roots_hermite(nodes)
    grids = np.meshgrid(*([u] * d), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1)
    Wt = np.ones(U.shape[0])
    for g in np.meshgrid(*([w] * d), indexing="ij"):
        Wt = Wt * g.ravel()
    Y = x[None, :] + 2.0 * np.sqrt(T) * U
    vals = np.asarray(phi(Y), dtype=float)
    return float(np.sum(Wt * vals) / np.pi ** (d / 2.0))


def mc_reference(ic, spec: FlowSpec, x, n: int, seed: int, stream: int = 0,
                 chunk: int = 1 << 20) -> tuple[float, float]:
    """Plain Monte Carlo mean of ``phi(x + T mu + S W_T)`` and its standard error."""
    if n < 2:
        raise ValueError("mc_reference needs n >= 2")
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.shape[0]
    ref = None
    total = 0.0
    total_sq = 0.0
    for start in range(0, n, chunk):
        count = min(chunk, n - start)
        z = rng.standard_normals(seed, stream, start, count, d)
        vals = np.asarray(ic(x + spec.T * spec.mu + np.sqrt(spec.T) * (z @ spec.S.T)), dtype=float)
        if ref is None:
            ref = float(vals[0])
        dev = vals - ref
        total += float(dev.sum())
        total_sq += float((dev * dev).sum())
    mean_dev = total / n
    var = max(0.0, (total_sq - n * mean_dev * mean_dev) / (n - 1))
    return ref + mean_dev, float(np.sqrt(var / n))


# ---------------------------------------------------------------------------
# serialization of initial conditions (for metadata sidecars)


def ic_to_dict(ic) -> dict:
    if isinstance(ic, RidgeSoftplus):
        return {"kind": "softplus-ridge", "w": ic.w.tolist(), "K": ic.K}
    if isinstance(ic, Ridge):
        return {"kind": "ridge", "profile": ic.profile, "w": ic.w.tolist(), "b": ic.b}
    if isinstance(ic, Linear):
        return {"kind": "linear", "w": ic.w.tolist(), "b": ic.b}
    if isinstance(ic, SquaredNorm):
        return {"kind": "squared-norm", "c0": ic.c0, "dim": ic.dim}
    raise UnsupportedError(f"cannot serialize {type(ic).__name__}")


def ic_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "softplus-ridge":
        return RidgeSoftplus(data["w"], data.get("K", 0.0))
    if kind == "ridge":
        return Ridge(data["profile"], data["w"], data.get("b", 0.0))
    if kind == "linear":
        return Linear(data["w"], data.get("b", 0.0))
    if kind == "squared-norm":
        return SquaredNorm(data.get("c0", 0.0), data.get("dim"))
    raise UnsupportedError(f"unknown initial condition kind {kind!r}")
