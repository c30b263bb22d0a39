"""Command-line experiment runner.

    isewalk <subcommand> [--config PATH] [--seed U64] [--workers N] [--out DIR]
                         [model flags] [--K K] [--replicas R] [--param KEY=JSON ...]

Subcommands: generate, skeleton, conditions, exponents, tree-bm, time-change,
inequalities.  A JSON config may hold ``subcommand``, ``seed``, ``model``
(a dict of model fields) and ``params`` (subcommand parameters); flags
override it.  Exit codes: 0 success, 1 I/O failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import check_G, check_R, check_S, check_V, config_hash
from .graph import (StoppingRule, effective_resistance, hitting_time_moments,
                    verify_fourth_moment_bound, verify_variance_bound, write_edge_list)
from .models import ModelSpec, random_connected_graph, sample_graph, sample_marks
from .parallel import replica_seeds, run_replicas
from .skeleton import build_skeleton, reduce_skeleton, sausage_diameters

__all__ = ["ExperimentConfig", "UsageError", "run", "main", "SUBCOMMANDS"]


class UsageError(ValueError):
    """Invalid command line or configuration."""


DEFAULTS: dict[str, dict] = {
    "generate": {"replicas": 1},
    "skeleton": {"K": 3, "replicas": 1},
    "conditions": {"checks": ["S", "G", "V", "R"], "n_grid": [1000, 4000], "K_grid": [2, 5],
                   "K": 2, "replicas": 20, "eps": 0.5, "crt_samples": 500, "crt_steps": 20000},
    "exponents": {"replicas": 10, "walks": 20, "checkpoints": [10, 10000, 16],
                  "return_walks": 200, "return_checkpoints": [10, 1000, 10],
                  "window": None, "return_window": None, "bootstrap": 1000},
    "tree-bm": {"tree": "star:1,1,2", "metric": "length", "h": None, "measure": "lebesgue",
                "t_max": 10.0, "runs": 20, "start": 0},
    "time-change": {"K": 5, "steps": None, "n_grid": 50, "replicas": 1},
    "inequalities": {"graphs": 200, "max_vertices": 40, "fourth_trials": 100000},
}
SUBCOMMANDS = tuple(DEFAULTS)
_MODEL_KEYS = set(ModelSpec.__dataclass_fields__)
_TOP_KEYS = {"subcommand", "seed", "model", "params"}


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment exactly (worker count and
    output directory do not affect results and are kept outside the hash)."""

    subcommand: str
    model: ModelSpec = field(default_factory=ModelSpec)
    params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        if self.subcommand not in DEFAULTS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        unknown = set(self.params) - set(DEFAULTS[self.subcommand])
        if unknown:
            raise UsageError(f"unknown parameter(s) for {self.subcommand}: {sorted(unknown)}")
        self.params = {**DEFAULTS[self.subcommand], **self.params}
        if not 0 <= int(self.seed) < 2 ** 64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        if int(self.workers) < 1:
            raise UsageError("workers must be positive")
        _validate_params(self.subcommand, self.params)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "seed": int(self.seed),
                "model": asdict(self.model), "params": self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise UsageError(f"unknown config key(s): {sorted(unknown)}")
        model = data.get("model", {})
        bad = set(model) - _MODEL_KEYS
        if bad:
            raise UsageError(f"unknown model key(s): {sorted(bad)}")
        try:
            spec = ModelSpec(**model)
        except (TypeError, ValueError) as err:
            raise UsageError(str(err)) from None
        return cls(data["subcommand"], spec, dict(data.get("params", {})), int(data.get("seed", 0)),
                   **overrides)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


def _positive(name, v):
    if v is None:
        return
    vals = v if isinstance(v, (list, tuple)) else [v]
    for x in vals:
        if isinstance(x, (int, float)) and not isinstance(x, bool) and not x > 0:
            raise UsageError(f"{name} must be positive")


def _validate_params(sub: str, p: dict) -> None:
    for k, v in p.items():
        if k in ("checks", "tree", "metric", "measure", "window", "return_window", "start"):
            continue
        _positive(k, v)
    if sub == "conditions":
        bad = set(p["checks"]) - {"S", "G", "V", "R"}
        if bad:
            raise UsageError(f"unknown checks {sorted(bad)}")
    if sub == "exponents":
        for key in ("checkpoints", "return_checkpoints"):
            if len(p[key]) != 3 or p[key][0] >= p[key][1]:
                raise UsageError(f"{key} must be [lo, hi, count] with lo < hi")
    if sub == "tree-bm":
        if p["metric"] not in ("length", "resistance"):
            raise UsageError("metric must be 'length' or 'resistance'")
        _parse_tree_spec(p["tree"])


def _parse_tree_spec(spec: str):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "segment":
            return ("segment", float(rest or 1.0))
        if kind == "star":
            arms = [float(a) for a in rest.split(",")]
            if not arms or min(arms) <= 0:
                raise ValueError
            return ("star", arms)
        if kind == "kise":
            K, d = (int(x) for x in (rest or "3:14").split(":"))
            return ("kise", K, d)
    except ValueError:
        pass
    raise UsageError(f"bad tree spec {spec!r}; use segment:L, star:a,b,c or kise:K:d")


# --------------------------------------------------------------------------
# report writing


def _versions() -> dict:
    import numba
    import scipy
    return {"isewalk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


class _Writer:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.files: list[str] = []

    def text(self, name: str, body: str) -> None:
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body)
        self.files.append(name)

    def json(self, name: str, payload: dict) -> None:
        meta = {"config": self.cfg.to_dict(), "config_hash": self.cfg.hash,
                "seed": int(self.cfg.seed), "versions": _versions()}
        self.text(name, json.dumps(_clean({**meta, **payload}), sort_keys=True, indent=2) + "\n")


def _csv(header, rows) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join("" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
                            for v in r))
    return "\n".join(out) + "\n"


def _svg_loglog(series: dict, title: str) -> str:
    """Tiny log-log plot: ``series`` maps a name to (x, y, slope, intercept)."""
    W, H, pad = 480, 320, 50
    xs = np.concatenate([np.log10(s[0]) for s in series.values()])
    ys = np.concatenate([np.log10(np.maximum(s[1], 1e-300)) for s in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x, y):
        return (pad + (x - x0) / (x1 - x0) * (W - 2 * pad), H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
             f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">log10 m</text>']
    for i, (name, (x, y, slope, icpt)) in enumerate(series.items()):
        c = colors[i % len(colors)]
        for a, b in zip(np.log10(x), np.log10(np.maximum(y, 1e-300))):
            cx, cy = px(a, b)
            parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="{c}"/>')
        lx = np.log10(np.array([x[0], x[-1]], float))
        ly = (slope * np.log(10 ** lx) + icpt) / np.log(10)
        (ax, ay), (bx, by) = px(lx[0], ly[0]), px(lx[1], ly[1])
        parts.append(f'<line x1="{ax:.1f}" y1="{ay:.1f}" x2="{bx:.1f}" y2="{by:.1f}" stroke="{c}"/>')
        parts.append(f'<text x="{W - pad}" y="{pad + 16 * i}" text-anchor="end" font-size="12" '
                     f'fill="{c}">{name}: slope {slope:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --------------------------------------------------------------------------
# replica tasks (module level so they pickle)


def _task_generate(task, rng):
    model, i = task
    g = sample_graph(model, rng)
    return i, g


def _task_skeleton(task, rng):
    model, K = task
    g = sample_graph(model, rng)
    cuts = g.cut_decomposition
    marks = sample_marks(g, cuts, K, model.mark_law, rng)
    sk, tree = build_skeleton(g, marks, cuts)
    out = {"n_vertices": g.n_vertices, "n_edges": g.n_edges, "marks": marks.tolist(),
           "tree_like": tree is not None, "max_clique": sk.max_clique}
    if tree is not None:
        red = reduce_skeleton(tree, marks)
        dia = sausage_diameters(g, tree, cuts)
        out.update({"skeleton": tree.to_dict(), "newick": red.to_newick(),
                    "coordinates": red.coordinate_table() if red.position is not None else None,
                    "delta_intrinsic": dia["delta_intrinsic"], "delta_zd": dia["delta_zd"],
                    "skeleton_vertices": tree.n_vertices})
    return out


def _task_exponents(task, rng):
    from .walks import walk_curves
    model, cps, walks, rcps, rwalks = task
    g = sample_graph(model, rng)
    d = walk_curves(g, cps, walks, rng)
    r = walk_curves(g, rcps, rwalks, rng, returns=True)
    return d, r


def _task_time_change(task, rng):
    from .walks import time_change_profiles, walk_trace_on_skeleton
    model, K, steps, n_grid = task
    g = sample_graph(model, rng)
    cuts = g.cut_decomposition
    marks = sample_marks(g, cuts, K, model.mark_law, rng)
    sk, tree = build_skeleton(g, marks, cuts)
    if tree is None:
        return None
    rec = walk_trace_on_skeleton(g, steps, tree.graph_vertex[tree.is_vstar], rng)
    return time_change_profiles(g, tree, rec, n_grid=n_grid, cuts=cuts)


def _task_tree_bm(task, rng):
    from .treebm import crossing_local_time_estimate, local_times, simulate
    net, t_max, start = task
    path = simulate(net, t_max, rng, start=start)
    field_ = local_times(path)
    est = crossing_local_time_estimate(field_)
    return {"integral_error": field_.integral() - path.t, "sup_gap": est.sup_gap,
            "local_time": field_.local_time, "steps": int(path.sites.size - 1),
            "path_csv": path.to_csv()}


def _task_inequality(task, rng):
    max_vertices = task
    n = int(rng.integers(2, max_vertices + 1))
    extra = int(rng.integers(0, n + 1))
    g = random_connected_graph(n, extra, rng)
    x, y = (int(v) for v in rng.choice(n, 2, replace=False))
    m = hitting_time_moments(g, x, y, 2)
    back = hitting_time_moments(g, y, x, 2)
    R = effective_resistance(g, x, y)
    commute = m.moment(1) + back.moment(1)
    ident = 2 * g.n_edges * R
    vb = verify_variance_bound(g, x, y)
    return {"n": n, "edges": g.n_edges, "commute_error": abs(commute - ident) / ident,
            "variance_lhs": vb["lhs"], "variance_rhs": vb["rhs"], "variance_holds": bool(vb["holds"])}


# --------------------------------------------------------------------------
# subcommands


def _cmd_generate(cfg, w):
    p = cfg.params
    seeds = replica_seeds(cfg.seed, p["replicas"])
    res = run_replicas(_task_generate, [(cfg.model, i) for i in range(p["replicas"])], seeds, cfg.workers)
    rows = []
    for i, g in res:
        name = f"graph_{i:04d}.txt"
        buf = io.StringIO()
        write_edge_list(g, buf)
        w.text(name, buf.getvalue())
        rows.append({"file": name, "n_vertices": g.n_vertices, "n_edges": g.n_edges,
                     "diameter": int(g.diameter)})
    w.json("summary.json", {"graphs": rows})


def _cmd_skeleton(cfg, w):
    p = cfg.params
    seeds = replica_seeds(cfg.seed, p["replicas"])
    res = run_replicas(_task_skeleton, [(cfg.model, p["K"])] * p["replicas"], seeds, cfg.workers)
    rows = []
    for i, r in enumerate(res):
        if r["tree_like"]:
            w.text(f"skeleton_{i:04d}.json", json.dumps(r["skeleton"], sort_keys=True) + "\n")
            w.text(f"reduced_{i:04d}.nwk", r["newick"] + "\n")
            if r["coordinates"]:
                w.text(f"reduced_{i:04d}.csv", r["coordinates"])
        rows.append([i, r["n_vertices"], r["n_edges"], int(r["tree_like"]), r["max_clique"],
                     r.get("skeleton_vertices"), r.get("delta_intrinsic"), r.get("delta_zd")])
    w.text("skeletons.csv", _csv(["replica", "n_vertices", "n_edges", "tree_like", "max_clique",
                                   "skeleton_vertices", "delta_intrinsic", "delta_zd"], rows))
    w.json("summary.json", {"replicas": [{k: v for k, v in r.items() if k not in ("skeleton", "coordinates")}
                                         for r in res]})


def _cmd_conditions(cfg, w):
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    summary = {}
    for c in sorted(p["checks"]):
        if c == "S":
            rep = check_S(cfg.model, p["n_grid"], p["K_grid"], p["replicas"], p["eps"], rng, cfg.workers)
        elif c == "G":
            rep = check_G(cfg.model, p["n_grid"], p["K"], p["replicas"], rng, p["crt_samples"],
                          p["crt_steps"], cfg.workers)
        elif c == "V":
            rep = check_V(cfg.model, p["n_grid"], p["K_grid"], p["replicas"], rng, cfg.workers)
        else:
            rep = check_R(cfg.model, p["n_grid"], p["replicas"], rng, cfg.workers)
        rep.seed = int(cfg.seed)
        w.json(f"condition_{c}.json", {"report": rep.to_dict()})
        w.text(f"condition_{c}.csv", rep.to_csv())
        summary[c] = bool(rep.verdict)
    w.json("summary.json", {"verdicts": summary})


def _cmd_exponents(cfg, w):
    from .walks import exponent_stats, log_checkpoints
    p = cfg.params
    cps = log_checkpoints(*p["checkpoints"])
    rcps = log_checkpoints(*p["return_checkpoints"])
    seeds = replica_seeds(cfg.seed, p["replicas"] + 1)
    tasks = [(cfg.model, cps, p["walks"], rcps, p["return_walks"])] * p["replicas"]
    res = run_replicas(_task_exponents, tasks, seeds[:-1], cfg.workers)
    curves = [c for pair in res for c in pair]
    fits = exponent_stats(curves, p["window"], p["return_window"], p["bootstrap"],
                          np.random.default_rng(seeds[-1]))
    rows = []
    for which, pick in (("dist", 0), ("euc", 0), ("ret", 1)):
        group = [pair[pick] for pair in res]
        tot = sum(c.n_walks for c in group)
        mean = sum(getattr(c, "sum_" + which) for c in group) / tot
        for m, v in zip(group[0].checkpoints, mean):
            rows.append([which, int(m), float(v)])
    w.text("curves.csv", _csv(["observable", "m", "mean"], rows))
    frow = [[k, f.slope, f.se, f.ci_low, f.ci_high, f.n_points] for k, f in fits.items() if f is not None]
    w.text("fits.csv", _csv(["observable", "slope", "se", "ci_low", "ci_high", "n_points"], frow))
    w.json("summary.json", {"fits": {k: None if f is None else f.to_dict() for k, f in fits.items()}})
    series = {}
    for name, which, pick in (("intrinsic_slope", "dist", 0), ("euclidean_slope", "euc", 0),
                              ("return_slope", "ret", 1)):
        f = fits.get(name)
        if f is None:
            continue
        xs = np.array([r[1] for r in rows if r[0] == which], float)
        ys = np.array([r[2] for r in rows if r[0] == which], float)
        ok = ys > 0
        series[name] = (xs[ok], ys[ok], f.slope, f.intercept)
    if series:
        w.text("fits.svg", _svg_loglog(series, f"{cfg.model.family}, n={cfg.model.n}"))


def _build_tree(spec, rng):
    from .continuum import sample_kise
    from .treebm import segment_tree, star_tree
    parsed = _parse_tree_spec(spec)
    if parsed[0] == "segment":
        return segment_tree(parsed[1])
    if parsed[0] == "star":
        return star_tree(parsed[1])
    return sample_kise(parsed[1], 20000, parsed[2], rng).tree


def _cmd_tree_bm(cfg, w):
    from .treebm import discretize
    p = cfg.params
    seeds = replica_seeds(cfg.seed, p["runs"] + 1)
    tree = _build_tree(p["tree"], np.random.default_rng(seeds[-1]))
    try:
        net = discretize(tree, p["metric"], p["h"], p["measure"])
    except ValueError as err:
        raise UsageError(str(err)) from None
    res = run_replicas(_task_tree_bm, [(net, float(p["t_max"]), int(p["start"]))] * p["runs"],
                       seeds[:-1], cfg.workers)
    mean_L = np.mean([r["local_time"] for r in res], axis=0)
    w.text("local_time.csv", net.fields_csv(mean_L))
    w.text("path_0000.csv", res[0]["path_csv"])
    gaps = np.array([r["sup_gap"] for r in res])
    errs = np.array([abs(r["integral_error"]) for r in res])
    w.json("summary.json", {"n_sites": net.n_sites, "n_pieces": net.n_pieces, "h": net.h,
                            "max_integral_error": float(errs.max()),
                            "median_sup_crossing_gap": float(np.median(gaps)),
                            "mean_steps": float(np.mean([r["steps"] for r in res]))})


def _cmd_time_change(cfg, w):
    p = cfg.params
    n = cfg.model.n
    steps = int(p["steps"] or 3 * n ** 1.5)
    seeds = replica_seeds(cfg.seed, p["replicas"])
    res = run_replicas(_task_time_change, [(cfg.model, p["K"], steps, p["n_grid"])] * p["replicas"],
                       seeds, cfg.workers)
    out = []
    for i, prof in enumerate(res):
        if prof is None:
            out.append(None)
            continue
        w.text(f"profile_{i:04d}.csv", prof.to_csv())
        mid = prof.t.size // 2
        out.append({"nu_hat": prof.nu_hat, "cv": prof.cv,
                    "tilde_gap_mid": float(prof.relative_gap("tilde")[mid]),
                    "hat_gap_mid": float(prof.relative_gap("hat")[mid])})
    w.json("summary.json", {"steps": steps, "replicas": out})


def _cmd_inequalities(cfg, w):
    p = cfg.params
    seeds = replica_seeds(cfg.seed, p["graphs"] + 2)
    res = run_replicas(_task_inequality, [int(p["max_vertices"])] * p["graphs"], seeds[:-2], cfg.workers)
    rows = [[i, r["n"], r["edges"], r["commute_error"], r["variance_lhs"], r["variance_rhs"],
             int(r["variance_holds"])] for i, r in enumerate(res)]
    w.text("graphs.csv", _csv(["graph", "n", "edges", "commute_rel_error", "variance_lhs",
                                "variance_rhs", "variance_holds"], rows))
    fourth = {}
    for name, rule, ss in (("fixed_50", "fixed:50", seeds[-2]), ("geometric_half_cap100", "geometric:0.5:100", seeds[-1])):
        r = verify_fourth_moment_bound("rademacher", StoppingRule.parse(rule), p["fourth_trials"],
                                       np.random.default_rng(ss))
        fourth[name] = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in r.items()}
    violations = sum(not r["variance_holds"] for r in res) + sum(not f["holds"] for f in fourth.values())
    w.json("summary.json", {"graphs": len(res), "max_commute_rel_error": max(r["commute_error"] for r in res),
                            "variance_violations": sum(not r["variance_holds"] for r in res),
                            "fourth_moment": fourth, "violations": violations})


_COMMANDS = {"generate": _cmd_generate, "skeleton": _cmd_skeleton, "conditions": _cmd_conditions,
             "exponents": _cmd_exponents, "tree-bm": _cmd_tree_bm, "time-change": _cmd_time_change,
             "inequalities": _cmd_inequalities}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit status."""
    w = _Writer(cfg)
    try:
        w.dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[cfg.subcommand](cfg, w)
        w.text("config.json", cfg.to_json() + "\n")
    except UsageError as err:
        print(f"isewalk: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"isewalk: I/O error: {err}", file=sys.stderr)
        return 1
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isewalk", description="Skeleton, tree diffusion and "
                                 "random-walk scaling experiments.")
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes")
    ap.add_argument("--out", default=None, help="output directory")
    g = ap.add_argument_group("model")
    g.add_argument("--family", choices=("gw_tree", "brw_trace", "path", "gw_shortcuts"))
    g.add_argument("--n", type=int)
    g.add_argument("--offspring")
    g.add_argument("--d", type=int)
    g.add_argument("--mark-law", dest="mark_law")
    g.add_argument("--shortcuts", type=int)
    ap.add_argument("--K", type=int)
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--param", action="append", default=[], metavar="KEY=JSON",
                    help="subcommand parameter, value parsed as JSON")
    return ap


def _config_from_args(args) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as err:
            raise UsageError(f"cannot read config: {err}") from None
        except json.JSONDecodeError as err:
            raise UsageError(f"malformed config: {err}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    sub = args.subcommand or data.get("subcommand")
    if sub is None:
        raise UsageError("no subcommand given")
    if args.subcommand and data.get("subcommand") not in (None, args.subcommand):
        raise UsageError("subcommand on the command line differs from the config")
    data = {**data, "subcommand": sub}
    model = dict(data.get("model", {}))
    for k in ("family", "n", "offspring", "d", "mark_law", "shortcuts"):
        v = getattr(args, k)
        if v is not None:
            model[k] = v
    data["model"] = model
    params = dict(data.get("params", {}))
    if args.K is not None:
        params["K"] = args.K
    if args.replicas is not None:
        params["replicas"] = args.replicas
    for item in args.param:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=JSON, got {item!r}")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = val
    data["params"] = params
    if args.seed is not None:
        data["seed"] = args.seed
    out = args.out or os.path.join("out", sub)
    return ExperimentConfig.from_dict(data, workers=args.workers, out=out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except UsageError as err:
        print(f"isewalk: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
