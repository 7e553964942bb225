"""``heatnet`` command line.

Every option can also be set through an environment variable named
``HEATNET_<OPTION>`` (upper case, dashes as underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import mpmath

from . import ann, builder, calculus, oracle, suites, sweep
from .flow import FlowSpec
from .supnorm import sup_error

ENV_PREFIX = "HEATNET_"


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _growth(args) -> builder.GrowthConstants:
    c_K = args.c_K if args.c_K is not None else max(1.0, abs(args.K))
    return builder.softplus_heat_constants(c_K, args.p_K)


def cmd_build(args) -> int:
    a, b = args.domain
    if args.ic != "softplus-ridge":
        raise SystemExit(f"unsupported --ic {args.ic!r}")
    ic = oracle.RidgeSoftplus.ones(args.dim, args.K)
    phi = builder.initial_network(ic)
    spec = FlowSpec.heat(args.dim, args.time)
    gc = _growth(args)
    n_theo = None
    if args.eps <= args.r:
        tc = builder.theoretical_constants(gc, args.time, a, b, args.r)
        n_theo = builder.theoretical_sample_count(tc, args.dim, args.eps)
    common = dict(method=args.method, resolution=args.resolution, workers=args.workers,
                  n_theoretical=n_theo)
    if args.samples:
        out = builder.build(ic, phi, spec, (a, b), args.eps, args.samples, args.seed,
                            args.restarts, **common)
    else:
        out = builder.build_empirical(ic, phi, spec, (a, b), args.eps, args.seed, args.restarts,
                                      n_cap=args.n_cap, **common)
    ann.save(out.psi, args.out)
    meta_path = args.meta or os.path.splitext(args.out)[0] + ".meta.json"
    _write(meta_path, _dump(out.metadata()))
    label = "certified" if out.certified else "NOT certified"
    bound = "" if not out.sup.is_lower_bound else " (lower bound on the sup)"
    print(f"n_used={out.n_used} restart={out.restart_index} grid_sup={out.grid_sup_error:.6g} "
          f"certified_sup={out.certified_sup}{bound} -> {label} at eps={args.eps}")
    if n_theo is not None:
        print(f"theoretical n = {n_theo} (not buildable at desk scale)")
    print(f"wrote {args.out} and {meta_path}")
    return 0


def cmd_eval_sup(args) -> int:
    psi = ann.load(args.net)
    with open(args.meta) as fh:
        meta = json.load(fh)
    ic = oracle.ic_from_dict(meta["ic"])
    spec = FlowSpec.heat(psi.input_dim, meta["T"])
    est = sup_error(psi, ic, spec, tuple(meta["domain"]), method=args.method,
                    resolution=args.resolution, seed=args.seed)
    sys.stdout.write(_dump(est.as_dict()))
    return 0


def cmd_sweep(args) -> int:
    overrides = {} if args.workers is None else {"workers": args.workers}
    if args.config:
        cfg = sweep.SweepConfig.load(args.config)
    else:
        cfg = sweep.SweepConfig.from_mapping({})
    for k, v in overrides.items():
        setattr(cfg, k, v)
    result = sweep.run_sweep(cfg)
    if args.out:
        csv_path, json_path = sweep.write_outputs(result, args.out)
        print(f"wrote {csv_path} and {json_path}")
    else:
        sys.stdout.write(sweep.to_csv(result))
    for note in result["notes"]:
        print(f"note: {note}")
    if result["slopes"]["vs_inv_eps"] or result["slopes"]["vs_d"]:
        print(f"slopes: {json.dumps(result['slopes'], sort_keys=True)}")
    if result.get("bounds_respected") is False:
        return 1
    return 0


def cmd_verify_bounds(args) -> int:
    reports = suites.inequality_battery(args.seed)
    bad = [r for r in reports if not r.ok]
    for r in bad:
        print(f"FAIL {r.context}: lhs={r.lhs!r} rhs={r.rhs!r}")
    print(f"{len(reports)} bound checks, {len(bad)} failed")
    if args.json:
        _write(args.json, _dump([r.as_dict() for r in reports]))
    return 0 if not bad else 1


def cmd_constants(args) -> int:
    a, b = args.domain
    gc = _growth(args)
    tc = builder.theoretical_constants(gc, args.time, a, b, args.r)
    doc = {
        "growth": {k: getattr(gc, k) for k in gc.__dataclass_fields__},
        "constants": tc.as_strings(),
        "dim": args.dim,
        "eps": args.eps,
    }
    if args.eps <= args.r:
        n = builder.theoretical_sample_count(tc, args.dim, args.eps)
        shape = (args.dim, 1, 1)
        doc["n_theoretical"] = str(n)
        doc["inner_accuracy"] = builder.inner_accuracy(tc, gc, args.dim, args.eps)
        doc["P_theoretical"] = str(calculus.ensemble_counts(shape, n)[0])
        doc["P_bound"] = mpmath.nstr(builder.cost_bounds(tc, gc, args.dim, args.eps)["P"], 17)
        doc["exponents"] = builder.cost_exponents(tc, gc)
    else:
        doc["n_theoretical"] = None
        doc["note"] = f"eps={args.eps} exceeds r={args.r}; no sample count"
    sys.stdout.write(_dump(doc))
    return 0


def cmd_check(args) -> int:
    return suites.run_property_suites(args.suite)


def _common_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--domain", type=float, nargs=2, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--K", type=float, default=0.0)
    p.add_argument("--c-K", dest="c_K", type=float, default=None,
                   help="growth constant of K_d (default max(1, |K|))")
    p.add_argument("--p-K", dest="p_K", type=float, default=0.0)
    p.add_argument("--r", type=float, default=1.0, help="largest admissible accuracy")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build an averaging network")
    _common_model(p)
    p.add_argument("--samples", type=int, default=None, help="fixed n; omit for doubling search")
    p.add_argument("--n-cap", dest="n_cap", type=int, default=builder.N_CAP)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ic", default="softplus-ridge")
    p.add_argument("--method", default="auto", help="auto|grid|taylor|sobol")
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="net.json")
    p.add_argument("--meta", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval-sup", help="estimate the sup error of a saved network")
    p.add_argument("--net", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--method", default="grid", help="grid|taylor|sobol")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval_sup)

    p = sub.add_parser("sweep", help="run a dimension/accuracy sweep")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-bounds", help="run the inequality battery")
    p.add_argument("--json", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("constants", help="print theoretical constants and sample counts")
    _common_model(p)
    p.add_argument("--print", action="store_true", help="print the constants (default)")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("check", help="run the property suites")
    p.add_argument("--suite", action="append", default=None, choices=sorted(suites.SUITES))
    p.set_defaults(func=cmd_check)
    return parser


def _env_value(action: argparse.Action, raw: str):
    conv = action.type or (lambda s: s)
    if action.nargs not in (None, "?"):
        return [conv(t) for t in raw.replace(",", " ").split()]
    if action.const is True and action.nargs == 0:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return conv(raw)


def apply_env(parser: argparse.ArgumentParser, argv: list[str], env=None) -> None:
    """Set subcommand defaults from ``HEATNET_*`` variables."""
    env = os.environ if env is None else env
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmd = next((t for t in argv if t in sub.choices), None)
    if cmd is None:
        return
    sp = sub.choices[cmd]
    for action in sp._actions:
        if action.dest in ("help", "func") or not action.option_strings:
            continue
        key = ENV_PREFIX + action.dest.upper()
        if key in env:
            sp.set_defaults(**{action.dest: _env_value(action, env[key])})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = make_parser()
    apply_env(parser, argv)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
