"""Command line front end: ``torusdecomp <experiment> --config run.json``.

The config is a flat JSON object with dotted keys:

* ``measure.*``      kind, Q, index, position, components, weights, file, count
* ``multipliers.*``  kind, L, beta, step, elements
* ``params.*``       any :class:`~torusdecomp.decompose.ParamSet` field
* ``run.*``          experiment settings (windows, thresholds, file inputs)
* ``seed``           integer seed, required by randomized generators

Each run writes ``report.json`` and ``summary.csv`` into the output directory,
plus PNG figures unless ``--no-plot`` is given. Errors go to standard error as
one JSON object, with exit codes 2 (validation), 3 (hypothesis failed),
4 (extraction failed) and 5 (internal assertion).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, plotting
from .addcomb import bsg_refine, fourier_bsg
from .decompose import (ParamSet, bootstrap_diagnostic, decompose,
                        final_bootstrap_diagnostic, iteration_log_rows)
from .errors import RejectedInputError, TorusError
from .granulation import granulate, hypothesis_cover, verify_family
from .measure import GridMeasure, ball_mask, make_measure, spectrum, walk_power, walk_sequence
from .multipliers import MultiplierSet, generate, regularity_constant
from .projection import DirectionMeasure, PlanarPointSet, projection_probe
from .spectral_sets import covering_number, level_set, max_separated_subset

EXPERIMENTS = ("spectrum", "walk-decay", "regularity", "bsg", "granulate", "bootstrap",
               "final-bootstrap", "decompose", "projection-probe")

_NUM = (int, float)
_MEASURE_KEYS = {"kind": str, "Q": int, "index": int, "position": _NUM, "components": list,
                 "weights": list, "file": str, "count": int}
_MULT_KEYS = {"kind": str, "L": int, "beta": _NUM, "step": int, "elements": list}
_RUN_KEYS = {
    "spectrum": {"n_max": int, "walk_steps": int, "method": str},
    "walk-decay": {"steps": int, "window": int},
    "regularity": {"lam": (int, float, list), "scale_r": _NUM},
    "bsg": {"graph_file": str, "K": _NUM, "restarts": int, "N": _NUM, "M": _NUM,
            "delta": _NUM, "R": _NUM},
    "granulate": {"N": _NUM, "M": int, "t": _NUM, "s": _NUM},
    "bootstrap": {"n": int, "N": _NUM, "M": _NUM, "delta": _NUM, "alpha": _NUM,
                  "branch": str},
    "final-bootstrap": {"n": int, "N": _NUM, "M": _NUM, "delta": _NUM, "density": bool},
    "decompose": {},
    "projection-probe": {"points_file": str, "n_points": int, "r": _NUM, "alpha": _NUM,
                         "alpha_delta": _NUM, "eps0": _NUM, "directions": int,
                         "kappa": _NUM},
}
_NEEDS = {
    "spectrum": ("measure",), "walk-decay": ("measure", "multipliers"),
    "regularity": ("multipliers",), "bsg": (), "granulate": ("measure",),
    "bootstrap": ("measure", "multipliers"), "final-bootstrap": ("measure", "multipliers"),
    "decompose": ("measure", "multipliers"), "projection-probe": (),
}


@dataclass
class RunConfig:
    experiment: str
    measure: dict = field(default_factory=dict)
    multipliers: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    seed: int | None = None
    out_dir: Path = Path(".")
    plot: bool = True
    base_dir: Path = Path(".")

    def file(self, value: str, key: str) -> Path:
        p = Path(value)
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.exists():
            raise RejectedInputError(f"file for {key} does not exist: {value}", key=key)
        return p


def _typecheck(key, value, types):
    if types is bool:
        ok = isinstance(value, bool)
    elif types is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        t = types if isinstance(types, tuple) else (types,)
        ok = isinstance(value, t) and not isinstance(value, bool)
    if not ok:
        raise RejectedInputError(f"config key {key!r} has the wrong type", key=key)


def parse_config(experiment: str, data: dict, *, seed=None, out_dir=".", plot=True,
                 base_dir=".") -> RunConfig:
    if experiment not in EXPERIMENTS:
        raise RejectedInputError(f"unknown experiment {experiment!r}", key="experiment")
    if not isinstance(data, dict):
        raise RejectedInputError("config must be a JSON object", key="<root>")
    cfg = RunConfig(experiment, out_dir=Path(out_dir), plot=plot, base_dir=Path(base_dir))
    param_keys = set(ParamSet.keys())
    for key, value in data.items():
        if key == "seed":
            _typecheck(key, value, int)
            cfg.seed = value
            continue
        head, _, tail = key.partition(".")
        if head == "measure" and tail in _MEASURE_KEYS:
            _typecheck(key, value, _MEASURE_KEYS[tail])
            cfg.measure[tail] = value
        elif head == "multipliers" and tail in _MULT_KEYS:
            _typecheck(key, value, _MULT_KEYS[tail])
            cfg.multipliers[tail] = value
        elif head == "params" and tail in param_keys:
            cfg.params[tail] = value
        elif head == "run" and tail in _RUN_KEYS[experiment]:
            _typecheck(key, value, _RUN_KEYS[experiment][tail])
            cfg.run[tail] = value
        else:
            raise RejectedInputError(f"unknown config key {key!r}", key=key)
    if seed is not None:
        cfg.seed = int(seed)
    if cfg.seed is not None and not 0 <= cfg.seed < 2 ** 64:
        raise RejectedInputError("seed must be an unsigned 64-bit integer", key="seed")
    for section in _NEEDS[experiment]:
        if not getattr(cfg, section):
            raise RejectedInputError(f"{experiment} needs {section}.* keys", key=section)
    # fail early on missing files
    if "file" in cfg.measure:
        cfg.file(cfg.measure["file"], "measure.file")
    for k in ("graph_file", "points_file"):
        if k in cfg.run:
            cfg.file(cfg.run[k], f"run.{k}")
    return cfg


def _require(cfg: RunConfig, *keys):
    missing = [k for k in keys if k not in cfg.run]
    if missing:
        raise RejectedInputError(f"missing config key run.{missing[0]}",
                                 key=f"run.{missing[0]}")
    return [cfg.run[k] for k in keys]


def build_measure(cfg: RunConfig) -> GridMeasure:
    m = dict(cfg.measure)
    kind = m.pop("kind", None)
    if kind is None:
        raise RejectedInputError("missing config key measure.kind", key="measure.kind")
    if kind == "file":
        return io.load_measure(cfg.file(m["file"], "measure.file"))
    if "Q" not in m:
        raise RejectedInputError("missing config key measure.Q", key="measure.Q")
    Q = m["Q"]
    if kind == "random_atoms":
        if cfg.seed is None:
            raise RejectedInputError("random_atoms needs a seed", key="seed")
        rng = np.random.default_rng(cfg.seed)
        count = m.get("count", 8)
        idx = rng.choice(Q, size=count, replace=False)
        w = np.zeros(Q)
        w[idx] = rng.dirichlet(np.ones(count))
        return GridMeasure(Q, w / max(1.0, w.sum()))
    if kind == "dirac" and "position" in m:
        return make_measure("dirac", Q, index=int(round(m["position"] * Q)) % Q)
    if kind == "mixture":
        comps = m.get("components")
        if not comps:
            raise RejectedInputError("missing config key measure.components",
                                     key="measure.components")
        parsed = []
        for item in comps:
            c, spec = item
            spec = dict(spec)
            if spec.get("kind") == "dirac" and "position" in spec:
                spec["index"] = int(round(spec.pop("position") * Q)) % Q
            parsed.append((c, spec))
        return make_measure("mixture", Q, components=parsed)
    extra = {k: m[k] for k in ("index", "weights") if k in m}
    return make_measure(kind, Q, **extra)


def build_multipliers(cfg: RunConfig) -> MultiplierSet:
    m = dict(cfg.multipliers)
    kind = m.get("kind")
    if kind is None or "L" not in m:
        raise RejectedInputError("multipliers need kind and L", key="multipliers.kind")
    if kind == "explicit":
        if "elements" not in m:
            raise RejectedInputError("missing config key multipliers.elements",
                                     key="multipliers.elements")
        return MultiplierSet(m["L"], sorted(m["elements"]))
    return generate(kind, m["L"], beta=m.get("beta"), seed=cfg.seed, step=m.get("step"))


def build_params(cfg: RunConfig, S: MultiplierSet | None = None) -> ParamSet:
    p = dict(cfg.params)
    if S is not None:
        p.setdefault("L", S.L)
    try:
        return ParamSet(**p)
    except TypeError as exc:
        raise RejectedInputError(f"bad params: {exc}", key="params") from exc


# ---------------------------------------------------------------------------
# experiments: each returns (report, header, rows, plots)


def _exp_spectrum(cfg):
    mu = build_measure(cfg)
    n_max = cfg.run.get("n_max", 64)
    steps = cfg.run.get("walk_steps", 0)
    if steps:
        S = build_multipliers(cfg)
        mu = walk_power(mu, S, steps)
    spec = spectrum(mu, n_max, cfg.run.get("method", "auto"))
    spec.check_invariants()
    report = {"n_max": n_max, "walk_steps": steps, "mass": mu.mass, "meta": spec.meta,
              "aliased": spec.aliased, "max_nonzero": float(np.delete(spec.magnitudes(),
                                                                      n_max).max())}
    rows = list(io.spectrum_rows(spec))
    plots = [("spectrum.png", lambda p: plotting.spectrum_plot(
        p, spec.frequencies, spec.magnitudes()))]
    return report, ("n", "re", "im", "abs"), rows, plots


def _exp_walk_decay(cfg):
    mu = build_measure(cfg)
    S = build_multipliers(cfg)
    steps = cfg.run.get("steps", 6)
    window = cfg.run.get("window", 64)
    n = np.r_[np.arange(-window, 0), np.arange(1, window + 1)]
    rows = []
    for k, m in enumerate(walk_sequence(mu, S, steps)):
        mags = np.abs(m.fourier(n))
        j = int(np.argmax(mags))
        rows.append((k, float(mags[j]), int(n[j])))
    report = {"steps": steps, "window": window, "size_S": len(S), "L": S.L,
              "decay": [{"k": k, "sup": s, "argmax": a} for k, s, a in rows]}
    plots = [("walk_decay.png", lambda p: plotting.series(
        p, [r[0] for r in rows], {"sup |coefficient|": [max(r[1], 1e-300) for r in rows]},
        xlabel="walk step k", ylabel="sup over 0<|n|<=window", logy=True))]
    return report, ("k", "sup_abs", "argmax_n"), rows, plots


def _exp_regularity(cfg):
    S = build_multipliers(cfg)
    lams = cfg.run.get("lam", [0.25, 0.5, 0.75])
    lams = lams if isinstance(lams, list) else [lams]
    r = cfg.run.get("scale_r", 1.0)
    certs = [regularity_constant(S, float(lam), r) for lam in lams]
    rows = [(c.lam, c.scale_r, c.c_tilde, c.witness[0], c.witness[1], c.witness_count)
            for c in certs]
    report = {"L": S.L, "size": len(S), "elements": list(S.elements),
              "certificates": [c.as_dict() for c in certs]}
    plots = [("regularity.png", lambda p: plotting.series(
        p, [c.lam for c in certs], {"C~": [c.c_tilde for c in certs]},
        xlabel="lambda", ylabel="regularity constant"))]
    header = ("lambda", "scale_r", "c_tilde", "witness_left", "witness_length", "count")
    return report, header, rows, plots


def _exp_bsg(cfg):
    seed = cfg.seed if cfg.seed is not None else 0
    if "graph_file" in cfg.run:
        g = io.read_edge_list(cfg.file(cfg.run["graph_file"], "run.graph_file"))
        (K,) = _require(cfg, "K")
        a_p, b_p, cert = bsg_refine(g, K, seed=seed, restarts=cfg.run.get("restarts", 32))
        report = {"mode": "graph", "K": K, "a_prime": a_p, "b_prime": b_p,
                  "certificate": cert.as_dict(), "edges": len(g.edges)}
        rows = [("size_a", len(g.part_a)), ("size_b", len(g.part_b)),
                ("edges", len(g.edges)), ("size_a_prime", len(a_p)),
                ("size_b_prime", len(b_p)), ("min_paths", cert.min_paths)]
        adj = g.adjacency()
        deg = adj.sum(axis=1)
        plots = [("degrees.png", lambda p: plotting.series(
            p, list(range(len(deg))), {"degree": sorted(deg.tolist())},
            xlabel="vertex rank", ylabel="degree"))]
        return report, ("quantity", "value"), rows, plots
    mu = build_measure(cfg)
    N, M, delta = _require(cfg, "N", "M", "delta")
    spec = spectrum(mu, int(math.ceil(2 * N)))
    a0 = max_separated_subset(level_set(spec, delta, N), M)
    if len(a0) == 0:
        raise RejectedInputError("level set is empty", key="run.delta")
    small = covering_number(level_set(spec, delta ** 2 / 8, 2 * N), M).count
    R = cfg.run.get("R", small / len(a0))
    ext = fourier_bsg(spec, a0, N, M, delta, R, seed=seed)
    report = {"mode": "fourier", "a0": a0.to_json(), "R": R, "extraction": ext.as_dict()}
    inter = ext.intermediates
    rows = [(k, inter[k]) for k in sorted(inter)
            if isinstance(inter[k], (int, float, bool, np.integer, np.floating))]
    rows += [(k, v) for k, v in sorted(ext.constants.items())]
    a1 = ext.a1.as_array()
    plots = [("bsg.png", lambda p: plotting.spectrum_plot(
        p, a1, np.abs(spec(a1)), threshold=delta))]
    return report, ("quantity", "value"), rows, plots


def _exp_granulate(cfg):
    mu = build_measure(cfg)
    N, M, t = _require(cfg, "N", "M", "t")
    if "s" in cfg.run:
        s = cfg.run["s"]
    else:
        cover, _ = hypothesis_cover(mu, N, M, t)
        s = cover * M / N * (1 - 1e-12)
    fam = granulate(mu, N, M, t, s)
    check = verify_family(fam, mu)
    report = {"family": fam.to_json(), "trace": fam.trace.as_dict(), "verification": check,
              "s": s}
    masses = [float(mu.weights[ball_mask(mu.Q, [p], fam.radius)].sum()) for p in fam.points]
    rows = [(p, p / mu.Q, m) for p, m in zip(fam.points, masses)]
    plots = [("granules.png", lambda p: plotting.measure_plot(
        p, mu, centers=fam.points, radius=fam.radius))]
    return report, ("index", "x", "ball_mass"), rows, plots


def _check_rows(checks):
    return [(c["name"], c["lhs"], c["rhs"], c["holds"], c["exact"]) for c in checks]


def _exp_bootstrap(cfg):
    mu = build_measure(cfg)
    S = build_multipliers(cfg)
    params = build_params(cfg, S)
    n, N, M, delta = _require(cfg, "n", "N", "M", "delta")
    tr = bootstrap_diagnostic(mu, S, n, N, M, delta, params, alpha=cfg.run.get("alpha"),
                              force_branch=cfg.run.get("branch"),
                              seed=cfg.seed if cfg.seed is not None else 0)
    rows = _check_rows(tr.checks)
    labels = list(tr.counts)
    plots = [("bootstrap_counts.png", lambda p: plotting.bars(
        p, labels, [tr.counts[k] for k in labels], ylabel="count"))]
    return tr.as_dict(), ("check", "lhs", "rhs", "holds", "exact"), rows, plots


def _exp_final_bootstrap(cfg):
    mu = build_measure(cfg)
    S = build_multipliers(cfg)
    params = build_params(cfg, S)
    n, N, M, delta = _require(cfg, "n", "N", "M", "delta")
    out = final_bootstrap_diagnostic(mu, S, n, N, M, delta, params,
                                     check_density=cfg.run.get("density", True))
    rows = _check_rows(out["checks"])
    concl = out["conclusion"]
    rows.append(("conclusion cover vs density bound", concl["cover"], concl["bound"],
                 concl["met"], False))
    plots = []
    if "directions" in out:
        d = out["directions"]
        plots.append(("final_bootstrap_directions.png", lambda p: plotting.series(
            p, [r["s1"] for r in d], {"density bound": [r["bound"] for r in d],
                                      "true cover": [r["cover"] for r in d]},
            xlabel="s1", ylabel="covering number")))
    return out, ("check", "lhs", "rhs", "holds", "exact"), rows, plots


def _exp_decompose(cfg):
    mu = build_measure(cfg)
    S = build_multipliers(cfg)
    params = build_params(cfg, S)
    res = decompose(mu, S, params)
    table = iteration_log_rows(res)
    report = res.to_json(inline_measures=True)
    report["mass_mu"] = mu.mass
    centers = [p for f in res.families for p in f.points]
    radius = res.families[0].radius if res.families else 0.0
    plots = [("decompose_measure.png", lambda p: plotting.measure_plot(
        p, res.mu1, centers=centers, radius=radius, second=res.mu2))]
    if res.log:
        plots.append(("decompose_mass.png", lambda p: plotting.series(
            p, [0] + [r["ell"] for r in res.log],
            {"remaining mass": [mu.mass] + [r["remaining_mass"] for r in res.log]},
            xlabel="iteration", ylabel="mass of mu1")))
    return report, table[0], table[1:], plots


def _exp_projection_probe(cfg):
    r, alpha = _require(cfg, "r", "alpha")
    if "points_file" in cfg.run:
        pts = io.read_planar_csv(cfg.file(cfg.run["points_file"], "run.points_file"))
    else:
        if cfg.seed is None:
            raise RejectedInputError("random point sets need a seed", key="seed")
        rng = np.random.default_rng(cfg.seed)
        side = cfg.run.get("n_points", 256)
        xs = np.sort(rng.choice(int(1 / r), size=int(math.isqrt(side)), replace=False)) * r
        pts = PlanarPointSet.product(xs, xs).points
    e = PlanarPointSet(pts)
    eta = DirectionMeasure.uniform(cfg.run.get("directions", 16))
    rep = projection_probe(e, eta, r, alpha, cfg.run.get("alpha_delta", 0.1),
                           cfg.run.get("eps0", 0.1), kappa=cfg.run.get("kappa"))
    rows = [(d["theta"], d["weight"], d["cover"], d["ok"]) for d in rep.directions]
    plots = [("points.png", lambda p: plotting.points_plot(p, pts))]
    if rows:
        plots.append(("projection_covers.png", lambda p: plotting.series(
            p, [x[0] for x in rows], {"cover": [x[2] for x in rows]},
            xlabel="direction theta", ylabel="covering number", hline=rep.threshold)))
    return rep.as_dict(), ("theta", "weight", "cover", "ok"), rows, plots


_RUNNERS = {
    "spectrum": _exp_spectrum, "walk-decay": _exp_walk_decay, "regularity": _exp_regularity,
    "bsg": _exp_bsg, "granulate": _exp_granulate, "bootstrap": _exp_bootstrap,
    "final-bootstrap": _exp_final_bootstrap, "decompose": _exp_decompose,
    "projection-probe": _exp_projection_probe,
}


def run(cfg: RunConfig) -> dict:
    """Execute one experiment and write its artifacts; returns the report."""
    report, header, rows, plots = _RUNNERS[cfg.experiment](cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    full = {"experiment": cfg.experiment, "seed": cfg.seed, "config": {
        "measure": cfg.measure, "multipliers": cfg.multipliers, "params": cfg.params,
        "run": cfg.run}, "result": report}
    io.write_json(cfg.out_dir / "report.json", full)
    io.write_csv(cfg.out_dir / "summary.csv", header, rows)
    if cfg.plot:
        for name, draw in plots:
            draw(cfg.out_dir / name)
    return full


def _parser():
    p = argparse.ArgumentParser(prog="torusdecomp", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="flat JSON config with dotted keys")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figures")
    return p


def _fail(exc: TorusError) -> int:
    sys.stderr.write(json.dumps(io.to_jsonable(exc.to_dict()), sort_keys=True) + "\n")
    return exc.exit_code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        path = Path(args.config)
        if not path.exists():
            raise RejectedInputError(f"config file not found: {args.config}", key="--config")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise RejectedInputError(f"config is not valid JSON: {exc}",
                                     key="<root>") from exc
        cfg = parse_config(args.experiment, data, seed=args.seed, out_dir=args.out,
                           plot=not args.no_plot, base_dir=path.parent)
        run(cfg)
    except TorusError as exc:
        return _fail(exc)
    except Exception as exc:  # surfaced as an internal error with exit code 5
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                                    sort_keys=True) + "\n")
        return 5
    return 0


if __name__ == "__main__":
    sys.exit(main())
