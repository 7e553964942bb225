"""Analytic inequalities with empirical checks.

Each check returns a :class:`BoundReport`; ``ok`` means
``lower <= lhs <= rhs * (1 + slack)`` where ``lower`` is only used by
two-sided checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from . import rng

SOBOLEV_CONST = 8.0 * math.sqrt(math.e)
SOBOLEV_GRID = {1: 2048, 2: 512, 3: 128}

# Lanczos approximation, g = 7, 9 terms
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    ok: bool
    context: str
    slack: float = 0.0
    lower: float | None = None

    def as_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v)
                for k, v in asdict(self).items()}


def _report(lhs, rhs, context, slack=0.0, lower=None) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    ok = lhs <= rhs * (1.0 + slack)
    if lower is not None:
        lower = float(lower)
        ok = ok and lower <= lhs
    return BoundReport(lhs, rhs, bool(ok), context, float(slack), lower)


def log_gamma(x: float) -> float:
    """``ln Gamma(x)`` for ``x > 0`` via the Lanczos series (reflection below 1/2)."""
    if x <= 0:
        raise ValueError(f"log_gamma needs x > 0, got {x}")
    if x < 0.5:
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS[0]
    for i, c in enumerate(_LANCZOS[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(acc)


def gamma(x: float) -> float:
    return math.exp(log_gamma(x))


def gamma_sandwich(x: float) -> BoundReport:
    """Stirling's two-sided bound ``s(x) <= Gamma(x) <= s(x) e^(1/(12x))``, ``s(x) = sqrt(2pi/x)(x/e)^x``."""
    if x <= 0:
        raise ValueError(f"gamma_sandwich needs x > 0, got {x}")
    log_s = 0.5 * math.log(2.0 * math.pi / x) + x * (math.log(x) - 1.0)
    lg = log_gamma(x)
    # compare in the log domain; exp() would overflow for large x
    return _report(lg - log_s, 1.0 / (12.0 * x), f"gamma_sandwich x={x:.6g}", lower=0.0)


def ball_volume(d: int) -> tuple[float, float]:
    """Volume of the unit ball in R^d and the bound ``(d pi)^(-1/2) (2 pi e / d)^(d/2)``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    log_exact = 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d + 1.0)
    log_bound = -0.5 * math.log(d * math.pi) + 0.5 * d * math.log(2.0 * math.pi * math.e / d)
    return math.exp(log_exact), math.exp(log_bound)


def ball_volume_report(d: int) -> BoundReport:
    log_exact = 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d + 1.0)
    log_bound = -0.5 * math.log(d * math.pi) + 0.5 * d * math.log(2.0 * math.pi * math.e / d)
    return _report(log_exact - log_bound, 0.0, f"ball_volume d={d} (log exact - log bound <= 0)")


def kahane_bound(p: float) -> float:
    """Upper bound ``sqrt(max(1, p - 1))`` on the p-Kahane-Khintchine constant."""
    if p < 1:
        raise ValueError(f"kahane_bound needs p >= 1, got {p}")
    return math.sqrt(max(1.0, p - 1.0))


# ---------------------------------------------------------------------------
# Monte Carlo L^p error


def mc_lp_bound_check(sampler: Callable, mean, p: float, n: int, outer: int, seed: int,
                      central_moment: float | None = None, name: str = "dist") -> BoundReport:
    """``(E||E X - mean_n||^p)^(1/p) <= 2 K_p (E||X - EX||^p)^(1/p) / sqrt(n)``.

    ``sampler(gen, size)`` returns an ``(size, d)`` array. The left side is
    estimated with ``outer`` independent replicates; the central moment is
    estimated from a separate sample of 200000 draws unless given.
    """
    if p < 2:
        raise ValueError("the Monte Carlo L^p bound needs p >= 2")
    gen = rng.generator(seed, 0x4C50)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    devs = np.empty(outer)
    for j in range(outer):
        X = np.asarray(sampler(gen, n), dtype=float).reshape(n, -1)
        devs[j] = np.linalg.norm(X.mean(axis=0) - mean) ** p
    m = float(devs.mean())
    lhs = m ** (1.0 / p)
    se_rel = float(devs.std(ddof=1) / np.sqrt(outer) / (p * m)) if m > 0 else 0.0
    if central_moment is None:
        Y = np.asarray(sampler(rng.generator(seed, 0x4C51), 200_000), dtype=float).reshape(200_000, -1)
        central_moment = float(np.mean(np.linalg.norm(Y - mean, axis=1) ** p) ** (1.0 / p))
    rhs = 2.0 * kahane_bound(p) * central_moment / math.sqrt(n)
    return _report(lhs, rhs, f"mc_lp {name} p={p} n={n}", slack=3.0 * se_rel)


def _gaussian3(gen, size):
    return gen.standard_normal((size, 3))


def _uniform2(gen, size):
    return gen.random((size, 2))


def _exponential2(gen, size):
    return gen.exponential(1.0, (size, 2))


def _deterministic(gen, size):
    return np.ones((size, 2))


MC_DISTRIBUTIONS = {
    # name: (sampler, mean)
    "gaussian3": (_gaussian3, np.zeros(3)),
    "uniform2": (_uniform2, np.full(2, 0.5)),
    "exponential2": (_exponential2, np.ones(2)),
    "deterministic": (_deterministic, np.ones(2)),
}


# ---------------------------------------------------------------------------
# Sobolev embedding on the unit cube


def _trapezoid_weights(res: int) -> np.ndarray:
    w = np.full(res + 1, 1.0 / res)
    w[0] = w[-1] = 0.5 / res
    return w


def sobolev_sup_check(f: Callable, grad: Callable, d: int, grid_res: int | None = None,
                      name: str = "field") -> BoundReport:
    """``sup|f| <= 8 sqrt(e) (int |f|^q + ||grad f||^q)^(1/q)`` on ``(0,1)^d``, ``q = max(2, d^2)``.

    ``f`` maps ``(m, d)`` points to ``(m,)``; ``grad`` to ``(m, d)``. The sup is
    taken over the trapezoidal grid; 1% slack absorbs quadrature error.
    """
    if d not in SOBOLEV_GRID:
        raise ValueError(f"sobolev_sup_check supports d in {{1, 2, 3}}, got {d}")
    res = grid_res or SOBOLEV_GRID[d]
    q = max(2, d * d)
    axis = np.linspace(0.0, 1.0, res + 1)
    w1 = _trapezoid_weights(res)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(X.shape[0])
    for g in np.meshgrid(*([w1] * d), indexing="ij"):
        W = W * g.ravel()
    vals = np.asarray(f(X), dtype=float)
    gnorm = np.linalg.norm(np.asarray(grad(X), dtype=float).reshape(X.shape[0], d), axis=1)
    integral = float(np.sum(W * (np.abs(vals) ** q + gnorm**q)))
    rhs = SOBOLEV_CONST * integral ** (1.0 / q)
    return _report(np.max(np.abs(vals)), rhs, f"sobolev {name} d={d} q={q}", slack=0.01)


def random_trig_field(gen: np.random.Generator, d: int, terms: int = 4, max_freq: int = 3):
    """Random low-order trigonometric polynomial ``sum a_k cos(2 pi k.x + t_k)`` and its gradient."""
    K = gen.integers(-max_freq, max_freq + 1, size=(terms, d)).astype(float)
    amp = gen.normal(size=terms)
    phase = gen.uniform(0.0, 2.0 * np.pi, size=terms)
    const = gen.normal()

    def f(X):
        return const + np.cos(2.0 * np.pi * X @ K.T + phase) @ amp

    def grad(X):
        s = -np.sin(2.0 * np.pi * X @ K.T + phase) * amp
        return 2.0 * np.pi * s @ K

    return f, grad


# ---------------------------------------------------------------------------
# uniform Monte Carlo error of random fields


@dataclass(frozen=True)
class SinField:
    """``xi(x) = sin(sum(x) + Z)``, ``Z ~ N(0, s^2)``, sampled on ``[a, b]^d``.

    ``E xi(x) = sin(sum x) e^(-s^2/2)`` and the moment terms of the bound are
    computed by Gauss-Hermite quadrature in ``Z``.
    """

    d: int = 1
    s: float = 1.0

    def sample(self, gen, n, grid):
        Z = gen.normal(0.0, self.s, size=n)
        return np.sin(grid.sum(axis=1)[None, :] + Z[:, None])

    def mean(self, grid):
        return np.sin(grid.sum(axis=1)) * math.exp(-0.5 * self.s**2)

    def moment_term(self, q, a, b, grid):
        z, w = np.polynomial.hermite.hermgauss(80)
        z = z * math.sqrt(2.0) * self.s
        w = w / math.sqrt(math.pi)
        t = grid.sum(axis=1)[:, None] + z[None, :]
        val = (np.abs(np.sin(t)) ** q @ w) ** (1.0 / q)
        # ||grad xi|| = sqrt(d) |cos(.)|
        der = math.sqrt(self.d) * (np.abs(np.cos(t)) ** q @ w) ** (1.0 / q)
        return float(np.max(val + (b - a) * der))


@dataclass(frozen=True)
class ConstantField:
    value: float = 1.0
    d: int = 1

    def sample(self, gen, n, grid):
        return np.full((n, grid.shape[0]), self.value)

    def mean(self, grid):
        return np.full(grid.shape[0], self.value)

    def moment_term(self, q, a, b, grid):
        return abs(self.value)


def mc_sobolev_uniform_check(field, p: float, n: int, outer: int, seed: int,
                             a: float = 0.0, b: float = 1.0, grid_res: int = 256) -> BoundReport:
    """``(E sup|E xi - mean_n xi|^p)^(1/p) <= 4 K zeta / sqrt(n) * sup[moments]``.

    ``zeta = 8 sqrt(e)`` is valid when ``max(2, p) >= max(2, d^2)``; ``K`` is the
    Kahane-Khintchine bound for ``max(2, p)``. The sup is taken over a tensor
    grid; slack is three standard errors plus 2%.
    """
    d = field.d
    if d not in (1, 2):
        raise ValueError("mc_sobolev_uniform_check supports d in {1, 2}")
    q = max(2.0, p)
    if q < max(2, d * d):
        raise ValueError(f"the 8 sqrt(e) Sobolev constant needs max(2, p) >= {d * d} for d={d}")
    res = grid_res if d == 1 else max(8, int(round(grid_res ** 0.5)))
    axis = np.linspace(a, b, res + 1)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([axis] * d), indexing="ij")], axis=1)
    gen = rng.generator(seed, 0x5B16)
    target = field.mean(grid)
    sups = np.empty(outer)
    for j in range(outer):
        vals = field.sample(gen, n, grid)
        sups[j] = np.max(np.abs(vals.mean(axis=0) - target)) ** p
    m = float(sups.mean())
    lhs = m ** (1.0 / p)
    se_rel = float(sups.std(ddof=1) / np.sqrt(outer) / (p * m)) if m > 0 else 0.0
    factor = 4.0 * kahane_bound(q) * SOBOLEV_CONST * field.moment_term(q, a, b, grid)
    rhs = factor / math.sqrt(n)
    return _report(lhs, rhs, f"mc_sobolev d={d} p={p} n={n}", slack=3.0 * se_rel + 0.02)
