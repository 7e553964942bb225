"""Monte Carlo construction of averaging networks for Kolmogorov equations.

Given a network ``phi`` approximating the initial condition, ``psi`` is the
averaging network of ``n`` affine flow samples. The theoretical constants and
sample counts are evaluated in arbitrary precision with mpmath; they are far
too large to build, so construction uses an empirical ``n`` (fixed or found
by doubling) and best-of-R restarts.
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import oracle
from .ann import Counts, Network, counters
from .calculus import average_ensemble, ensemble_counts
from .flow import FlowSpec, sample_shifts
from .supnorm import SupEstimate, normalize_method, sup_error, taylor_resolution

INFEASIBLE = "infeasible at this scale"
N_CAP = 1 << 16
_BASE_DPS = 60


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class GrowthConstants:
    """Growth and cost exponents of an initial-condition network family.

    ``|R phi(x)| <= c d^z (1 + ||x||^zz)``, ``||grad R phi(x)|| <= c d^w (1 + ||x||^ww)``,
    ``|phi(x) - R phi_eps(x)| <= eps c d^v (1 + ||x||^vv)``,
    ``sqrt(tr A) <= c d^beta``, ``||mu|| <= c d^alpha`` and
    ``P(phi_eps) <= c d^p_count eps^-q_count``.
    """

    c: float
    v: float = 0.0
    vv: float = 0.0
    w: float = 0.0
    ww: float = 0.0
    z: float = 0.0
    zz: float = 0.0
    alpha: float = 0.0
    beta: float = 0.5
    p_count: float = 0.0
    q_count: float = 0.0

    def __post_init__(self):
        if not self.c >= 0.5:
            raise ValueError(f"c must be at least 1/2, got {self.c}")
        for name in ("v", "vv", "w", "ww", "z", "zz", "beta", "p_count", "q_count"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")


def softplus_heat_constants(c_K: float = 1.0, p_K: float = 0.0) -> GrowthConstants:
    """Constants for the softplus-ridge family under the heat equation.

    ``phi_d(x) = ln(1 + exp(sum x_i - K_d)) + K_d`` with ``|K_d| <= c_K d^p_K``
    is represented exactly by one hidden neuron (``P = d + 3 <= 4 d``), with
    ``|phi_d(x)| <= 2 max(1, 2c_K) d^max(p_K, 1/2) (1 + ||x||)`` and gradient
    norm at most ``sqrt(d)``. Exact representation makes ``v = vv = 0``.
    """
    if p_K < 0:
        raise ValueError("p_K must be non-negative")
    z = max(p_K, 0.5)
    return GrowthConstants(c=max(4.0, 4.0 * c_K), v=0.0, vv=0.0, w=0.5, ww=0.0,
                           z=z, zz=1.0, alpha=0.0, beta=0.5, p_count=1.0, q_count=0.0)


@dataclass(frozen=True)
class TheoreticalConstants:
    """Closed-form constants, as mpmath numbers.

    ``Csample`` multiplies ``d^pexp eps^-2`` in the sample count, ``Cbold`` is
    ``(Csample + 1)(1 + r^2)`` and enters the cost bounds, ``Ccal`` scales the
    inner accuracy and ``pfrak`` is its d-exponent.
    """

    Ccal: mpmath.mpf
    Cbold: mpmath.mpf
    pexp: mpmath.mpf
    pfrak: mpmath.mpf
    Csample: mpmath.mpf
    inputs: tuple | None = field(default=None, repr=False, compare=False)

    def as_floats(self) -> dict:
        return {k: to_float(getattr(self, k)) for k in ("Ccal", "Cbold", "Csample", "pexp", "pfrak")}

    def as_strings(self, digits: int = 17) -> dict:
        return {k: mpmath.nstr(getattr(self, k), digits)
                for k in ("Ccal", "Cbold", "Csample", "pexp", "pfrak")}


def to_float(x):
    """``float(x)``, or the INFEASIBLE marker when ``x`` does not fit a double."""
    if not mpmath.isfinite(x) or abs(x) > sys.float_info.max:
        return INFEASIBLE
    return float(x)


def _constants(gc: GrowthConstants, T, a, b, r, dps: int) -> TheoreticalConstants:
    with mpmath.workdps(dps):
        mpf, sqrt = mpmath.mpf, mpmath.sqrt
        c, T, a, b, r = map(mpf, (gc.c, T, a, b, r))
        z, zz, w, ww = map(mpf, (gc.z, gc.zz, gc.w, gc.ww))
        v, vv, alpha, beta = map(mpf, (gc.v, gc.vv, gc.alpha, gc.beta))
        Csample = 4 * (7 * c + T + sqrt(zz) + sqrt(ww) + abs(a) + abs(b)) ** (10 + 8 * (zz + ww))
        Cbold = (Csample + 1) * (1 + r**2)
        Ccal = (5 * c + T + sqrt(vv) + abs(a) + abs(b)) ** (-4 * vv - 1) / 2
        m = max(alpha, beta + 1)
        pexp = 2 + max(2 * z + 2 * zz * m, 2 * w + 1 + 2 * ww * m)
        pfrak = v + vv * max(alpha, beta, mpf(0.5))
        return TheoreticalConstants(+Ccal, +Cbold, +pexp, +pfrak, +Csample,
                                    inputs=(gc, float(T), float(a), float(b), float(r)))


def theoretical_constants(gc: GrowthConstants, T: float, a: float, b: float, r: float,
                          dps: int = _BASE_DPS) -> TheoreticalConstants:
    if not b > a:
        raise ValueError(f"need b > a, got [{a}, {b}]")
    if not (T > 0 and r > 0):
        raise ValueError("need T > 0 and r > 0")
    return _constants(gc, T, a, b, r, dps)


def _digits(x) -> int:
    return int(mpmath.floor(mpmath.log10(abs(x)))) + 1 if x != 0 else 1


def _exact_int(fn, rounding=mpmath.ceil, dps: int = _BASE_DPS) -> int:
    """``rounding(fn())`` for a real ``fn()`` evaluated at enough precision to be exact.

    ``fn`` must evaluate from float inputs under the current mpmath
    precision. A value within rounding of an integer is taken to be that
    integer.
    """
    for _ in range(6):
        with mpmath.workdps(dps):
            val = fn()
            need = _digits(val) + 30
            if need > dps:
                dps = need + 10
                continue
            nearest = mpmath.nint(val)
            if abs(val - nearest) <= mpmath.mpf(10) ** (_digits(val) - dps + 10):
                return int(nearest)
            return int(rounding(val))
    raise ArithmeticError("could not settle the rounding")


def theoretical_sample_count(tc: TheoreticalConstants, d: int, eps: float) -> int:
    """``ceil(Csample d^pexp eps^-2)`` as an exact Python integer."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if tc.inputs is not None and not eps <= tc.inputs[4]:
        raise ValueError(f"eps must lie in (0, r], got {eps} > r = {tc.inputs[4]}")

    def value():
        k = _constants(*tc.inputs, dps=mpmath.mp.dps) if tc.inputs is not None else tc
        return k.Csample * mpmath.mpf(d) ** k.pexp / mpmath.mpf(eps) ** 2

    return _exact_int(value)


def inner_accuracy(tc: TheoreticalConstants, gc: GrowthConstants, d: int, eps: float) -> float:
    """``eps c^-1 d^-pfrak Ccal``: accuracy required of the initial-condition network."""
    with mpmath.workdps(_BASE_DPS):
        val = mpmath.mpf(eps) / mpmath.mpf(gc.c) * mpmath.mpf(d) ** (-tc.pfrak) * tc.Ccal
        return float(val)


def cost_bounds(tc: TheoreticalConstants, gc: GrowthConstants, d: int, eps: float) -> dict:
    """Upper bounds on ``P``, ``Pnz`` and ``N`` of the averaging network (mpmath)."""
    with mpmath.workdps(max(_BASE_DPS, mpmath.mp.dps)):
        mpf = mpmath.mpf
        c, q, p = mpf(gc.c), mpf(gc.q_count), mpf(gc.p_count)
        d, eps = mpf(d), mpf(eps)
        common = c * c**q * tc.Ccal ** (-q) * d ** (p + tc.pfrak * q)
        return {
            "P": tc.Cbold**2 * common * d ** (2 * tc.pexp) * eps ** (-(q + 4)),
            "Pnz": tc.Cbold * common * d**tc.pexp * eps ** (-(q + 2)),
            "N": tc.Cbold * common * d**tc.pexp * eps ** (-(q + 2)),
        }


def cost_bound_floor(tc: TheoreticalConstants, gc: GrowthConstants, d: int, eps: float,
                     which: str = "P") -> int:
    """``floor`` of a cost bound, exact; an integer count is within the bound iff it is at most this."""
    if tc.inputs is None:
        return int(mpmath.floor(cost_bounds(tc, gc, d, eps)[which]))

    def value():
        k = _constants(*tc.inputs, dps=mpmath.mp.dps)
        return cost_bounds(k, gc, d, eps)[which]

    return _exact_int(value, mpmath.floor)


def cost_exponents(tc: TheoreticalConstants, gc: GrowthConstants) -> dict:
    """d- and eps-exponents of the bound on ``P``."""
    return {"d": float(gc.p_count + 2 * tc.pexp + tc.pfrak * gc.q_count),
            "eps": -float(gc.q_count + 4)}


def theoretical_counts(tc, gc, shape, d: int, eps: float) -> dict:
    """Exact integer counts of the averaging network at the theoretical sample count."""
    n = theoretical_sample_count(tc, d, eps)
    P, N, L = ensemble_counts(shape, n)
    return {"n": n, "P": P, "N": N, "L": L}


# ---------------------------------------------------------------------------
# construction


def initial_network(ic: oracle.RidgeSoftplus) -> Network:
    """The exact one-neuron softplus network of a softplus ridge ``ln(1+exp(w.x-K))+K``."""
    if not isinstance(ic, oracle.RidgeSoftplus):
        raise TypeError("initial_network needs a RidgeSoftplus initial condition")
    return Network(((ic.w[None, :], np.array([-ic.K])),
                    (np.ones((1, 1)), np.array([ic.K]))), "softplus")


@dataclass
class BuiltApproximation:
    psi: Network
    n_used: int
    n_theoretical: int | None
    seed: int
    restart_index: int
    restarts: int
    counts: Counts
    grid_sup_error: float
    certified: bool
    eps: float
    domain: tuple
    T: float
    sup: SupEstimate
    ic: object = None
    history: list = field(default_factory=list)

    @property
    def certified_sup(self) -> float | None:
        return self.sup.certified_sup

    def metadata(self) -> dict:
        return {
            "n_used": self.n_used,
            "n_theoretical": None if self.n_theoretical is None else str(self.n_theoretical),
            "seed": self.seed,
            "restarts": self.restarts,
            "restart_index": self.restart_index,
            "counts": self.counts.as_dict(),
            "grid_sup_error": self.grid_sup_error,
            "certified_sup": self.sup.certified_sup,
            "certified": self.certified,
            "sup_method": self.sup.method,
            "sup_resolution": self.sup.resolution,
            "sup_is_lower_bound": self.sup.is_lower_bound,
            "domain": [float(self.domain[0]), float(self.domain[1])],
            "eps": self.eps,
            "T": self.T,
            "dim": self.psi.input_dim,
            "ic": None if self.ic is None else oracle.ic_to_dict(self.ic),
            "history": self.history,
        }


def _resolution(method, ic, psi, spec, domain, eps, resolution):
    if resolution is not None:
        return resolution
    if method == "taylor_grid":
        return taylor_resolution(ic, psi, spec, domain, eps / 10.0)
    if method == "tensor_grid":
        return 64
    return 1 << 14


def build(ic, phi: Network, spec: FlowSpec, domain, eps: float, n: int, seed: int,
          restarts: int = 8, method: str = "auto", resolution: int | None = None,
          workers: int = 1, n_theoretical: int | None = None) -> BuiltApproximation:
    """Best of ``restarts`` averaging networks with ``n`` flow samples each.

    Restart ``r`` draws its samples from stream ``(seed, r)``. The winner has
    the smallest error score (the certified sup when the method gives one,
    otherwise the grid sup); ties go to the lowest restart index.
    ``certified`` is ``score <= eps``.
    """
    oracle.check_supported(ic, spec)
    if phi.input_dim != spec.dim:
        raise ValueError(f"phi has input dimension {phi.input_dim}, flow has {spec.dim}")
    if n < 1 or restarts < 1:
        raise ValueError("need n >= 1 and restarts >= 1")
    method = normalize_method(method, spec.dim)
    eye = np.broadcast_to(np.eye(spec.dim), (n, spec.dim, spec.dim))

    def attempt(r):
        shifts = sample_shifts(spec, n, seed, stream=r)
        psi = average_ensemble(phi, (eye, shifts))
        res = _resolution(method, ic, psi, spec, domain, eps, resolution)
        est = sup_error(psi, ic, spec, domain, method=method, resolution=res, seed=seed)
        return psi, est

    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(attempt, range(restarts)))
    else:
        results = [attempt(r) for r in range(restarts)]
    best = min(range(restarts), key=lambda r: (results[r][1].score, r))
    psi, est = results[best]
    return BuiltApproximation(
        psi=psi, n_used=n, n_theoretical=n_theoretical, seed=seed, restart_index=best,
        restarts=restarts, counts=counters(psi), grid_sup_error=est.grid_sup,
        certified=bool(est.score <= eps), eps=float(eps), domain=(float(domain[0]), float(domain[1])),
        T=spec.T, sup=est, ic=ic,
        history=[{"n": n, "restart_scores": [res[1].score for res in results]}],
    )


def build_empirical(ic, phi: Network, spec: FlowSpec, domain, eps: float, seed: int,
                    restarts: int = 8, n_start: int = 16, n_cap: int = N_CAP,
                    method: str = "auto", resolution: int | None = None, workers: int = 1,
                    n_theoretical: int | None = None) -> BuiltApproximation:
    """Double ``n`` from ``n_start`` until the build certifies or ``n_cap`` is reached.

    Returns the first certified build, or the build at ``n_cap`` otherwise.
    """
    if n_start < 1 or n_cap < n_start:
        raise ValueError("need 1 <= n_start <= n_cap")
    history = []
    n = n_start
    while True:
        out = build(ic, phi, spec, domain, eps, n, seed, restarts, method, resolution,
                    workers, n_theoretical)
        history.append({"n": n, "score": out.sup.score, "certified": out.certified})
        if out.certified or n >= n_cap:
            out.history = history
            return out
        n = min(2 * n, n_cap)
