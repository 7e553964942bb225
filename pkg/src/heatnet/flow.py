"""Constant-coefficient diffusions and their affine flow samples.

For ``dX = mu dt + S dW`` with constant ``mu`` and ``S = sqrt(2A)`` the time-T
flow is ``X_T^x = x + T mu + S W_T``: the identity plus a Gaussian shift, so
each sample is an exact affine map of the starting point and no time
stepping is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng

PSD_TOL = 1e-10
SYM_TOL = 1e-12

# stream ids reserved for the moment checks
_GAUSS_STREAM = 0x6A55
_APRIORI_STREAM = 0x6A56
_CONTRACT_STREAM = 0x6A57


class NotPSDError(ValueError):
    pass


def _sqrt_psd(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    if vals.min(initial=0.0) < -PSD_TOL:
        raise NotPSDError(f"matrix has eigenvalue {vals.min():.3e} < -{PSD_TOL}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True, eq=False)
class FlowSpec:
    """Drift ``mu``, PDE diffusion matrix ``A`` and horizon ``T``.

    The generator is ``A : Hess + mu . grad``; the SDE diffusion matrix is
    ``S = sqrt(2A)``.
    """

    mu: np.ndarray
    A: np.ndarray
    T: float
    S: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        A = np.atleast_2d(np.array(self.A, dtype=float))
        d = mu.shape[0]
        if A.shape != (d, d):
            raise ValueError(f"A has shape {A.shape}, expected ({d}, {d})")
        if not np.all(np.abs(A - A.T) <= SYM_TOL * max(1.0, np.abs(A).max(initial=0.0))):
            raise ValueError("A is not symmetric")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        A = 0.5 * (A + A.T)
        S = _sqrt_psd(2.0 * A)
        for arr in (mu, A, S):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "S", S)

    @classmethod
    def heat(cls, d: int, T: float) -> "FlowSpec":
        """The heat equation ``u_t = Laplace u`` (A = I, mu = 0)."""
        return cls(np.zeros(d), np.eye(d), T)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def is_heat(self) -> bool:
        return not self.mu.any() and np.array_equal(self.A, np.eye(self.dim))

    @property
    def is_frozen(self) -> bool:
        return not self.mu.any() and not self.A.any()


@dataclass(frozen=True, eq=False)
class AffineSample:
    """One realization ``x -> W x + B`` of the time-T flow."""

    W: np.ndarray
    B: np.ndarray

    @property
    def Wmat(self) -> np.ndarray:
        return self.W

    @property
    def Bvec(self) -> np.ndarray:
        return self.B

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.W.T + self.B


def sample_shifts(spec: FlowSpec, n: int, seed: int, stream: int = 0,
                  workers: int = 1) -> np.ndarray:
    """The shifts ``T mu + S W_T`` of ``n`` flow samples, shape ``(n, d)``."""
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    z = rng.standard_normals(seed, stream, 0, n, spec.dim, workers=workers)
    return spec.T * spec.mu + np.sqrt(spec.T) * (z @ spec.S.T)


def sample_affine_flows(spec: FlowSpec, n: int, seed: int, stream: int = 0,
                        workers: int = 1) -> list[AffineSample]:
    shifts = sample_shifts(spec, n, seed, stream, workers)
    eye = np.eye(spec.dim)
    eye.setflags(write=False)
    return [AffineSample(eye, b) for b in shifts]


@dataclass(frozen=True)
class MomentCheck:
    empirical: float
    bound: float
    ok: bool
    stderr_rel: float = 0.0


def _lp_check(norms: np.ndarray, p: float, bound: float) -> MomentCheck:
    powers = norms**p
    m = float(powers.mean())
    emp = m ** (1.0 / p)
    se_rel = 0.0
    if m > 0 and len(powers) > 1:
        se_rel = float(powers.std(ddof=1) / np.sqrt(len(powers)) / (p * m))
    return MomentCheck(emp, float(bound), emp <= bound * (1.0 + 3.0 * se_rel), se_rel)


def gaussian_moment_check(A, t: float, p: float, n: int, seed: int) -> MomentCheck:
    """``(E||A W_t||^p)^(1/p)`` against ``sqrt(max(1, p-1) tr(A^T A) t)``."""
    if not t > 0 or p < 1:
        raise ValueError("need t > 0 and p >= 1")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    z = rng.standard_normals(seed, _GAUSS_STREAM, 0, n, A.shape[1])
    norms = np.linalg.norm(np.sqrt(t) * z @ A.T, axis=1)
    bound = np.sqrt(max(1.0, p - 1.0) * np.trace(A.T @ A) * t)
    return _lp_check(norms, p, bound)


def apriori_moment_check(spec: FlowSpec, x, p: float, n: int, seed: int) -> MomentCheck:
    """``(E||X_T^x||^p)^(1/p)`` against ``||x|| + ||mu|| T + sqrt(max(1,p-1) tr(S^T S) T)``.

    With constant drift the linear-growth constants are ``C = ||mu||`` and
    ``c = 0``, so the exponential factor is 1.
    """
    if p < 1:
        raise ValueError("need p >= 1")
    x = np.asarray(x, dtype=float)
    X = x + sample_shifts(spec, n, seed, _APRIORI_STREAM)
    T = spec.T
    bound = (np.linalg.norm(x) + np.linalg.norm(spec.mu) * T
             + np.sqrt(max(1.0, p - 1.0) * np.trace(spec.S.T @ spec.S) * T))
    return _lp_check(np.linalg.norm(X, axis=1), p, bound)


def contraction_check(spec: FlowSpec, x, y, p: float, n: int, seed: int) -> MomentCheck:
    """``(E||X_T^x - X_T^y||^p)^(1/p)`` with common noise against ``||x - y||``.

    Constant drift has Lipschitz constant 0, so the bound is ``||x - y||`` and
    the noise cancels; the check is exact up to rounding.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    B = sample_shifts(spec, n, seed, _CONTRACT_STREAM)
    diff = np.linalg.norm((x + B) - (y + B), axis=1)
    powers = diff**p
    emp = float(powers.mean() ** (1.0 / p))
    bound = float(np.linalg.norm(x - y))
    return MomentCheck(emp, bound, emp <= bound + 1e-12 * max(1.0, bound))
