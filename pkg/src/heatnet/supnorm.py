"""Sup-norm error estimates of ``u(T, .) - R(psi)`` on a cube ``[a, b]^d``.

Three methods:

``tensor_grid``
    uniform grid; ``certified = grid_sup + h sqrt(d) (Lip_u + Lip_psi) / 2``
    with ``Lip_psi`` the largest gradient norm of psi seen on the grid.
``taylor_grid``
    uniform grid with a second-order certificate: every point of the cube is
    within ``r = h sqrt(d) / 2`` of a node, so
    ``|e(y)| <= |e(x)| + r ||grad e(x)|| + H r^2 / 2`` where ``H`` is a global
    Hessian bound for ``u`` plus one for ``psi``. Rigorous, and far cheaper
    than the first-order padding because ``grad e`` is small.
``low_discrepancy``
    scrambled Sobol points plus coordinate-search refinement from the worst
    points; yields a lower bound on the sup only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import oracle
from .ann import Network, gradient, hessian_bound, realize
from .flow import FlowSpec

METHODS = ("tensor_grid", "taylor_grid", "low_discrepancy")
METHOD_ALIASES = {"grid": "tensor_grid", "taylor": "taylor_grid", "sobol": "low_discrepancy"}
_MAX_GRID_DIM = {"tensor_grid": 3, "taylor_grid": 4}
_CHUNK_ELEMS = 1 << 22


@dataclass
class SupEstimate:
    grid_sup: float
    certified_sup: float | None
    points_used: int
    method: str
    resolution: int
    details: dict = field(default_factory=dict)

    @property
    def is_lower_bound(self) -> bool:
        return self.certified_sup is None

    @property
    def score(self) -> float:
        """The quantity to compare against a target accuracy."""
        return self.grid_sup if self.certified_sup is None else self.certified_sup

    def as_dict(self) -> dict:
        return {
            "grid_sup": self.grid_sup,
            "certified_sup": self.certified_sup,
            "points_used": self.points_used,
            "method": self.method,
            "resolution": self.resolution,
            "sup_is_lower_bound": self.is_lower_bound,
            **self.details,
        }


def normalize_method(method: str, d: int) -> str:
    if method == "auto":
        return "taylor_grid" if d <= 3 else "low_discrepancy"
    method = METHOD_ALIASES.get(method, method)
    if method not in METHODS:
        raise ValueError(f"unknown sup method {method!r}; expected one of {METHODS}")
    return method


def grid_points(a: float, b: float, d: int, resolution: int) -> np.ndarray:
    axis = np.linspace(a, b, resolution + 1)
    return np.stack([g.ravel() for g in np.meshgrid(*([axis] * d), indexing="ij")], axis=1)


def _chunks(net: Network, m: int):
    width = max(W.shape[0] for W, _ in net.layers)
    step = max(1, _CHUNK_ELEMS // width)
    for s in range(0, m, step):
        yield slice(s, min(m, s + step))


def _errors(psi, ic, spec, X, with_grad):
    err = np.empty(X.shape[0])
    gpsi = np.zeros(X.shape[0]) if with_grad else None
    gerr = np.zeros(X.shape[0]) if with_grad else None
    for sl in _chunks(psi, X.shape[0]):
        Xc = X[sl]
        err[sl] = oracle.exact_solution(ic, spec, Xc) - realize(psi, Xc)[:, 0]
        if with_grad:
            gp = gradient(psi, Xc)
            gpsi[sl] = np.linalg.norm(gp, axis=1)
            gerr[sl] = np.linalg.norm(oracle.exact_gradient(ic, spec, Xc) - gp, axis=1)
    return err, gpsi, gerr


def taylor_resolution(ic, psi: Network, spec: FlowSpec, domain, target: float,
                      minimum: int = 8) -> int:
    """Smallest grid resolution whose curvature padding ``H r^2 / 2`` is at most ``target``."""
    a, b = domain
    d = spec.dim
    H = oracle.hessian_bound(ic, spec) + hessian_bound(psi)
    if H <= 0:
        return minimum
    r = np.sqrt(2.0 * target / H)
    return max(minimum, int(np.ceil((b - a) * np.sqrt(d) / (2.0 * r))))


def sup_error(psi: Network, ic, spec: FlowSpec, domain, d: int | None = None,
              method: str = "tensor_grid", resolution: int = 32, seed: int = 0,
              refinements: int = 100) -> SupEstimate:
    """Estimate ``sup_{[a,b]^d} |u(T, x) - R(psi)(x)|``."""
    oracle.check_supported(ic, spec)
    a, b = map(float, domain)
    d = spec.dim if d is None else d
    if psi.input_dim != d or spec.dim != d:
        raise ValueError(f"dimension mismatch: psi {psi.input_dim}, flow {spec.dim}, d {d}")
    method = normalize_method(method, d)
    if method == "low_discrepancy":
        return _sobol_sup(psi, ic, spec, a, b, d, resolution, seed, refinements)
    if d > _MAX_GRID_DIM[method]:
        raise ValueError(f"{method} supports d <= {_MAX_GRID_DIM[method]}; use low_discrepancy")
    X = grid_points(a, b, d, resolution)
    h = (b - a) / resolution
    radius = 0.5 * h * np.sqrt(d)
    err, gpsi, gerr = _errors(psi, ic, spec, X, with_grad=True)
    abs_err = np.abs(err)
    grid_sup = float(abs_err.max())
    if method == "tensor_grid":
        lip_u = oracle.lipschitz_bound(ic, spec, (a, b))
        lip_psi = float(gpsi.max())
        padding = radius * (lip_u + lip_psi)
        details = {"lip_u": lip_u, "lip_psi": lip_psi, "padding": float(padding)}
        certified = grid_sup + padding
    else:
        H = oracle.hessian_bound(ic, spec) + hessian_bound(psi)
        curvature = 0.5 * H * radius**2
        certified = float(np.max(abs_err + radius * gerr)) + curvature
        details = {"hessian_bound": H, "curvature_padding": float(curvature),
                   "padding": float(certified - grid_sup)}
    return SupEstimate(grid_sup, float(certified), X.shape[0], method, resolution, details)


def _sobol_sup(psi, ic, spec, a, b, d, resolution, seed, refinements) -> SupEstimate:
    m = max(1, int(np.ceil(np.log2(max(2, resolution)))))
    pts = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seed)).random_base2(m)
    X = a + (b - a) * pts
    err = np.abs(_errors(psi, ic, spec, X, with_grad=False)[0])
    k = min(refinements, X.shape[0])
    worst = np.argsort(err)[::-1][:k]
    P = X[worst].copy()
    best = err[worst].copy()
    step = (b - a) / X.shape[0] ** (1.0 / d)
    evals = X.shape[0]
    for _ in range(6):
        for j in range(d):
            for sign in (1.0, -1.0):
                Q = P.copy()
                Q[:, j] = np.clip(Q[:, j] + sign * step, a, b)
                val = np.abs(_errors(psi, ic, spec, Q, with_grad=False)[0])
                evals += k
                better = val > best
                P[better] = Q[better]
                best[better] = val[better]
        step *= 0.5
    grid_sup = float(max(err.max(), best.max()))
    return SupEstimate(grid_sup, None, evals, "low_discrepancy", X.shape[0],
                       {"refined_points": int(k)})
