"""Fixed-seed property suites across all modules, and the inequality battery."""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import ann, bounds, builder, calculus, flow, oracle, rng
from .bounds import BoundReport


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    ok: bool
    detail: str = ""


def _moment_report(m: flow.MomentCheck, context: str) -> BoundReport:
    return BoundReport(m.empirical, m.bound, m.ok, context, slack=3.0 * m.stderr_rel)


# ---------------------------------------------------------------------------
# inequality battery


def inequality_battery(seed: int = 0) -> list[BoundReport]:
    """Every inequality check at its default sweep; all reports should be ok."""
    out: list[BoundReport] = []
    for x in np.geomspace(0.1, 100.0, 500):
        out.append(bounds.gamma_sandwich(float(x)))
    for d in range(1, 21):
        out.append(bounds.ball_volume_report(d))
    for name in ("gaussian3", "uniform2", "exponential2"):
        sampler, mean = bounds.MC_DISTRIBUTIONS[name]
        for p in (2, 4):
            out.append(bounds.mc_lp_bound_check(sampler, mean, p, n=50, outer=2000,
                                                seed=seed, name=name))
    sampler, mean = bounds.MC_DISTRIBUTIONS["deterministic"]
    out.append(bounds.mc_lp_bound_check(sampler, mean, 2, n=50, outer=50, seed=seed,
                                        name="deterministic"))
    gen = rng.generator(seed, 0x50B0)
    for d in (1, 2, 3):
        for k in range(50):
            f, g = bounds.random_trig_field(gen, d)
            out.append(bounds.sobolev_sup_check(f, g, d, name=f"trig{k}"))
    A_gen = rng.generator(seed, 0x6A50)
    for dim in (1, 2, 3):
        A = A_gen.normal(size=(dim, dim))
        for t in (0.5, 2.0):
            for p in (1.0, 2.0, 4.0):
                m = flow.gaussian_moment_check(A, t, p, n=20_000, seed=seed)
                out.append(_moment_report(m, f"gaussian_moment dim={dim} t={t} p={p}"))
    specs = {
        "heat2": flow.FlowSpec.heat(2, 1.0),
        "drift3": flow.FlowSpec([0.5, -1.0, 0.2], np.diag([0.3, 1.0, 0.0]), 2.0),
    }
    for label, spec in specs.items():
        x = np.linspace(-1.0, 1.0, spec.dim)
        for p in (2.0, 4.0):
            m = flow.apriori_moment_check(spec, x, p, n=20_000, seed=seed)
            out.append(_moment_report(m, f"apriori {label} p={p}"))
            m = flow.contraction_check(spec, x, x[::-1] + 0.5, p, n=2_000, seed=seed)
            out.append(BoundReport(m.empirical, m.bound, m.ok, f"contraction {label} p={p}"))
    for n in (50, 200, 800):
        out.append(bounds.mc_sobolev_uniform_check(bounds.SinField(1, 1.0), p=2, n=n,
                                                   outer=500, seed=seed))
    out.append(bounds.mc_sobolev_uniform_check(bounds.ConstantField(), p=2, n=50,
                                               outer=20, seed=seed))
    return out


# ---------------------------------------------------------------------------
# per-module suites


def _random_net(gen, shape, activation):
    layers = [(gen.normal(size=(shape[k], shape[k - 1])) / math.sqrt(shape[k - 1]),
               gen.normal(size=shape[k])) for k in range(1, len(shape))]
    return ann.Network(tuple(layers), activation)


def _fd_gradient(net, x, h=1e-5):
    e = np.eye(x.shape[0])
    return np.array([(ann.realize(net, x + h * e[i])[0] - ann.realize(net, x - h * e[i])[0]) / (2 * h)
                     for i in range(x.shape[0])])


def suite_ann(seed: int = 0) -> list[Check]:
    out = []
    gen = rng.generator(seed, 0xA001)
    t = np.linspace(-8.0, 8.0, 161)
    for name in sorted(ann.ACTIVATIONS):
        act = ann.get_activation(name)
        h = 1e-5
        fd = (act.value(t + h) - act.value(t - h)) / (2 * h)
        err = float(np.max(np.abs(fd - act.derivative(t))))
        out.append(Check("ann", f"{name} derivative", err <= 1e-8, f"max err {err:.2e}"))
        fd2 = (act.derivative(t + h) - act.derivative(t - h)) / (2 * h)
        err2 = float(np.max(np.abs(fd2 - act.second_derivative(t))))
        out.append(Check("ann", f"{name} second derivative", err2 <= 1e-8, f"max err {err2:.2e}"))
    for k in range(10):
        shape = [int(v) for v in gen.integers(1, 5, size=int(gen.integers(3, 5)))]
        shape[-1] = 1
        net = _random_net(gen, shape, ("softplus", "logistic")[k % 2])
        x = gen.normal(size=shape[0])
        g, fd = ann.gradient(net, x), _fd_gradient(net, x)
        rel = float(np.linalg.norm(g - fd) / max(1e-12, np.linalg.norm(fd)))
        out.append(Check("ann", f"gradient net{k}", rel <= 1e-6, f"rel err {rel:.2e}"))
        again = ann.from_json(ann.to_json(net))
        same = all(np.array_equal(W, V) and np.array_equal(B, C)
                   for (W, B), (V, C) in zip(net.layers, again.layers))
        out.append(Check("ann", f"json roundtrip net{k}", same))
    return out


def suite_calculus(seed: int = 0) -> list[Check]:
    out = []
    gen = rng.generator(seed, 0xA002)
    for k in range(5):
        shape = [int(v) for v in gen.integers(1, 4, size=int(gen.integers(3, 5)))]
        shape[-1] = 1
        net = _random_net(gen, shape, "softplus")
        n, e = int(gen.integers(1, 6)), int(gen.integers(1, 4))
        maps = [(gen.normal(size=(shape[0], e)), gen.normal(size=shape[0])) for _ in range(n)]
        psi = calculus.average_ensemble(net, maps)
        X = gen.normal(size=(20, e))
        ref = np.mean([ann.realize(net, X @ G.T + D)[:, 0] for G, D in maps], axis=0)
        err = float(np.max(np.abs(ann.realize(psi, X)[:, 0] - ref) / np.maximum(1.0, np.abs(ref))))
        out.append(Check("calculus", f"average exactness cfg{k}", err <= 1e-12, f"rel err {err:.2e}"))
        c = ann.counters(psi)
        P, N, L = calculus.ensemble_counts(shape, n, e)
        out.append(Check("calculus", f"count identities cfg{k}", (c.P, c.N, c.L) == (P, N, L)))
    return out


def suite_flow(seed: int = 0) -> list[Check]:
    spec = flow.FlowSpec.heat(2, 0.5)
    out = []
    for p in (2.0, 3.0):
        m = flow.apriori_moment_check(spec, [0.3, -0.2], p, n=20_000, seed=seed)
        out.append(Check("flow", f"apriori p={p}", m.ok, f"{m.empirical:.4f} <= {m.bound:.4f}"))
    m = flow.contraction_check(spec, [0.3, -0.2], [1.0, 1.0], 2.0, n=1000, seed=seed)
    out.append(Check("flow", "contraction", m.ok, f"{m.empirical:.6f} <= {m.bound:.6f}"))
    a = flow.sample_shifts(spec, 300, seed, 3)
    b = np.concatenate([flow.sample_shifts(spec, 300, seed, 3)[:100],
                        flow.sample_shifts(spec, 300, seed, 3)[100:]])
    out.append(Check("flow", "stream determinism", np.array_equal(a, b)))
    return out


def suite_oracle(seed: int = 0) -> list[Check]:
    out = []
    gen = rng.generator(seed, 0xA004)
    spec = flow.FlowSpec([0.4, -0.3], [[1.0, 0.2], [0.2, 0.5]], 0.7)
    lin = oracle.Linear([1.5, -2.0], 0.3)
    X = gen.normal(size=(10, 2))
    err = float(np.max(np.abs(oracle.exact_solution(lin, spec, X) - lin(X + spec.T * spec.mu))))
    out.append(Check("oracle", "linear transport", err <= 1e-12, f"err {err:.2e}"))
    heat = flow.FlowSpec.heat(3, 0.8)
    sq = oracle.SquaredNorm()
    X = gen.normal(size=(10, 3))
    err = float(np.max(np.abs(oracle.exact_solution(sq, heat, X) - (np.sum(X**2, axis=1) + 6 * 0.8))))
    out.append(Check("oracle", "squared norm", err <= 1e-10, f"err {err:.2e}"))
    ic = oracle.RidgeSoftplus.ones(2, 0.5)
    h2 = flow.FlowSpec.heat(2, 1.0)
    x = np.array([0.3, 0.6])
    gh = float(oracle.exact_solution(ic, h2, x))
    tk = oracle.kernel_convolution(ic, 1.0, x)
    out.append(Check("oracle", "quadrature vs tensor kernel", abs(gh - tk) <= 1e-8,
                     f"diff {abs(gh - tk):.2e}"))
    mc, se = oracle.mc_reference(ic, h2, x, 200_000, seed)
    out.append(Check("oracle", "quadrature vs Monte Carlo", abs(gh - mc) <= 4 * se + 1e-12,
                     f"diff {abs(gh - mc):.2e}, stderr {se:.2e}"))
    return out


def suite_builder(seed: int = 0) -> list[Check]:
    out = []
    gc = builder.softplus_heat_constants()
    tc = builder.theoretical_constants(gc, 1.0, 0.0, 1.0, 1.0)
    out.append(Check("builder", "pexp = 5 + 2z", float(tc.pexp) == 5.0 + 2.0 * gc.z))
    out.append(Check("builder", "Ccal <= 1", tc.Ccal <= 1))
    ok = True
    for d in range(1, 6):
        for eps in (1.0, 0.5, 0.25):
            n = builder.theoretical_sample_count(tc, d, eps)
            P = calculus.ensemble_counts((d, 1, 1), n)[0]
            ok &= P <= builder.cost_bound_floor(tc, gc, d, eps)
    out.append(Check("builder", "count bound conformance", ok))
    ic = oracle.RidgeSoftplus.ones(1)
    phi = builder.initial_network(ic)
    frozen = flow.FlowSpec([0.0], [[0.0]], 1.0)
    b = builder.build(ic, phi, frozen, (0.0, 1.0), 0.01, n=1, seed=seed, restarts=1,
                      method="tensor_grid", resolution=16)
    out.append(Check("builder", "frozen dynamics exact", b.grid_sup_error <= 1e-12,
                     f"grid_sup {b.grid_sup_error:.2e}"))
    return out


def suite_bounds(seed: int = 0) -> list[Check]:
    out = [Check("bounds", r.context, r.ok, f"lhs {r.lhs:.6g} rhs {r.rhs:.6g}")
           for r in inequality_battery(seed)]
    for x, want in ((1.0, 1.0), (0.5, math.sqrt(math.pi))):
        err = abs(bounds.gamma(x) - want) / want
        out.append(Check("bounds", f"gamma({x})", err <= 1e-12, f"rel err {err:.2e}"))
    return out


SUITES = {
    "ann": suite_ann,
    "calculus": suite_calculus,
    "flow": suite_flow,
    "oracle": suite_oracle,
    "builder": suite_builder,
    "bounds": suite_bounds,
}


def run_property_suites(names=None, seed: int = 0, stream=None) -> int:
    """Run the named suites (all when ``names`` is None); 0 iff every check passes."""
    stream = sys.stdout if stream is None else stream
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"unknown suites: {unknown}", file=stream)
        return 2
    total = failed = 0
    for name in names:
        t0 = time.perf_counter()
        checks = SUITES[name](seed)
        bad = [c for c in checks if not c.ok]
        total += len(checks)
        failed += len(bad)
        print(f"[{name}] {len(checks) - len(bad)}/{len(checks)} ok "
              f"({time.perf_counter() - t0:.1f} s)", file=stream)
        for c in bad:
            print(f"  FAIL {c.name}: {c.detail}", file=stream)
    print(f"{total} checks, {failed} failed", file=stream)
    return 0 if failed == 0 else 1
