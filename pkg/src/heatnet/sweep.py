"""Dimension and accuracy sweeps for the softplus-ridge heat benchmark."""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import builder, oracle
from .calculus import ensemble_counts, ensemble_pnz_bound
from .flow import FlowSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COLUMNS = ("d", "eps", "seed", "mode", "n_used", "P", "Pnz", "N", "L",
           "grid_sup", "certified_sup", "certified", "ms", "P_bound")
ENV_PREFIX = "HEATNET_"


@dataclass
class SweepConfig:
    dims: list = field(default_factory=lambda: [1])
    eps: list = field(default_factory=lambda: [0.1])
    seeds: list = field(default_factory=lambda: [0])
    mode: str = "empirical"
    T: float = 1.0
    a: float = 0.0
    b: float = 1.0
    K: float = 0.0
    c_K: float = 1.0
    p_K: float = 0.0
    r: float = 1.0
    restarts: int = 8
    n_start: int = 16
    n_cap: int = builder.N_CAP
    method: str = "auto"
    resolution: int | None = None
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.mode not in ("empirical", "theoretical"):
            raise ValueError(f"mode must be 'empirical' or 'theoretical', got {self.mode!r}")
        for name in ("dims", "eps", "seeds"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)):
                setattr(self, name, [val])
        self.dims = [int(d) for d in self.dims]
        self.eps = [float(e) for e in self.eps]
        self.seeds = [int(s) for s in self.seeds]

    @classmethod
    def from_mapping(cls, data: dict, env: dict | None = None) -> "SweepConfig":
        """Build from a flat mapping; ``HEATNET_<KEY>`` entries of ``env`` override keys."""
        known = {f.name for f in fields(cls)}
        by_lower = {k.lower(): k for k in known}
        data = dict(data)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key, raw in (env if env is not None else os.environ).items():
            if key.startswith(ENV_PREFIX):
                name = by_lower.get(key[len(ENV_PREFIX):].lower())
                if name is not None:
                    data[name] = parse_value(raw)
        return cls(**data)

    @classmethod
    def load(cls, path, env: dict | None = None) -> "SweepConfig":
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh), env)


def parse_value(raw: str):
    """Parse an override string as a TOML value, falling back to the bare string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def _cell(cfg: SweepConfig, d: int, eps: float, seed: int) -> dict:
    gc = builder.softplus_heat_constants(cfg.c_K, cfg.p_K)
    tc = builder.theoretical_constants(gc, cfg.T, cfg.a, cfg.b, cfg.r)
    ic = oracle.RidgeSoftplus.ones(d, cfg.K)
    phi = builder.initial_network(ic)
    p_bound = builder.cost_bound_floor(tc, gc, d, eps)
    row = {"d": d, "eps": eps, "seed": seed, "mode": cfg.mode, "P_bound": p_bound, "ms": ""}
    if cfg.mode == "theoretical":
        n = builder.theoretical_sample_count(tc, d, eps)
        P, N, L = ensemble_counts(phi.shape, n)
        row.update(n_used=n, P=P, Pnz=ensemble_pnz_bound(phi.shape, n), N=N, L=L,
                   grid_sup="", certified_sup="", certified="")
        return row
    spec = FlowSpec.heat(d, cfg.T)
    t0 = time.perf_counter()
    out = builder.build_empirical(ic, phi, spec, (cfg.a, cfg.b), eps, seed, cfg.restarts,
                                  cfg.n_start, cfg.n_cap, cfg.method, cfg.resolution)
    ms = (time.perf_counter() - t0) * 1e3
    c = out.counts
    row.update(n_used=out.n_used, P=c.P, Pnz=c.Pnz, N=c.N, L=c.L, grid_sup=out.grid_sup_error,
               certified_sup="" if out.certified_sup is None else out.certified_sup,
               certified=out.certified)
    if cfg.timing:
        row["ms"] = round(ms, 1)
    return row


def fit_slope(x, y) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; None with fewer than two distinct x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(np.unique(x)) < 2:
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def slopes(rows: list[dict]) -> dict:
    """Log-log slopes of n_used against 1/eps (per d) and against d (per eps)."""
    out = {"vs_inv_eps": {}, "vs_d": {}}
    emp = [r for r in rows if r["mode"] == "empirical"]
    for d in sorted({r["d"] for r in emp}):
        sel = [r for r in emp if r["d"] == d]
        s = fit_slope([1.0 / r["eps"] for r in sel], [r["n_used"] for r in sel])
        if s is not None:
            out["vs_inv_eps"][str(d)] = s
    for e in sorted({r["eps"] for r in emp}):
        sel = [r for r in emp if r["eps"] == e]
        s = fit_slope([r["d"] for r in sel], [r["n_used"] for r in sel])
        if s is not None:
            out["vs_d"][repr(e)] = s
    return out


def run_sweep(cfg: SweepConfig) -> dict:
    cells = [(d, e, s) for d in cfg.dims for e in cfg.eps for s in cfg.seeds]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(lambda c: _cell(cfg, *c), cells))
    else:
        rows = [_cell(cfg, *c) for c in cells]
    rows.sort(key=lambda r: (r["d"], r["eps"], r["seed"]))
    result = {"rows": rows, "slopes": slopes(rows), "notes": []}
    if cfg.mode == "theoretical":
        result["notes"].append("theoretical sample counts are exact integers; "
                               "networks of this size are not materialized")
        result["bounds_respected"] = all(r["P"] <= r["P_bound"] for r in rows)
    else:
        result["notes"].append("theoretical sample counts are far beyond desk scale; "
                               "n_used comes from the doubling search")
        if any(r["certified_sup"] == "" for r in rows):
            result["notes"].append("rows without certified_sup report a lower bound on the sup")
    return result


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(result: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in result["rows"]:
        w.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def _json_value(v):
    # big integers go out as decimal strings so every JSON reader keeps them exact
    if isinstance(v, int) and not isinstance(v, bool) and abs(v) >= 2**53:
        return str(v)
    if v == "":
        return None
    return v


def to_json(result: dict) -> str:
    doc = {
        "columns": list(COLUMNS),
        "rows": [{c: _json_value(r[c]) for c in COLUMNS} for r in result["rows"]],
        "slopes": result["slopes"],
        "notes": result["notes"],
    }
    if "bounds_respected" in result:
        doc["bounds_respected"] = result["bounds_respected"]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_outputs(result: dict, out_csv) -> tuple[str, str]:
    """Write ``out_csv`` and its JSON mirror (same stem, ``.json``)."""
    out_json = os.path.splitext(str(out_csv))[0] + ".json"
    with open(out_csv, "w", newline="") as fh:
        fh.write(to_csv(result))
    with open(out_json, "w") as fh:
        fh.write(to_json(result))
    return str(out_csv), out_json
