"""Command-line experiment runner.

    quasitree validate --instance schottky-default --radius 3
    quasitree build --instance chain --raw --out out/
    quasitree analyze --suite complex --suite blowup --pairs 200 --seed 7
    quasitree action --element a

Every command writes ``report.json`` (deterministic for a fixed config and
seed) and ``runtime.json`` (wall-clock timings, not deterministic) into the
output directory.  Exit status: 0 when nothing failed, 1 on a verification
failure, 2 on bad usage or unreadable input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from quasitree import kernels
from quasitree.action import (ActionContext, check_equivariance, combinatorial_axis,
                              translation_length_estimate, wpd_probe)
from quasitree.blowup import build_blowup, check_blowup, edge_list_csv, estimate_delta
from quasitree.complex import (DisconnectedComplexError, bottleneck_check, build_complex,
                               check_barrier_search, check_complex, check_guards,
                               complex_diameter, distance_bounds_csv, raw_question, to_dot)
from quasitree.core import CoreParams, TabularSystem, auto_K, check_theorem_main, validate_axioms
from quasitree.hyperbolic import (DegenerateConfigurationError, chain_instance,
                                  monotonicity_counterexample, orbit_words,
                                  random_geodesic_instance, schottky_instance)
from quasitree.report import FAIL, INFO, PASS, Check, Report, _clean

SUITES = ("axioms", "theorem-main", "complex", "blowup", "action", "raw-question")
BUILTINS = ("schottky-default", "chain", "random", "monotonicity-counterexample")
COMMAND_SUITES = {
    "validate": ("axioms", "theorem-main"),
    "analyze": ("complex", "blowup"),
    "action": ("action",),
    "build": (),
}
PARAM_KEYS = ("xi", "theta", "K", "Kprime", "L", "auto_K")
DEFAULTS = {
    "instance": "schottky-default",
    "radius": 3,
    "xi": None,
    "theta": None,
    "K": None,
    "auto_K": False,
    "Kprime": None,
    "L": None,
    "metric": "modified",
    "suites": None,
    "pairs": 200,
    "samples": 500,
    "seed": 0,
    "out": "quasitree-out",
    "raw": False,
    "walks": 50,
    "element": "a",
    "k_max": 8,
    "axis_element": "ab",
    "axis_K": None,
    "axis_Kprime": 2.0,
    "wpd_D": 1,
    "wpd_M": 2,
    "wpd_radius": 2,
}
EQUIVARIANCE_TOL = 1e-6


class UsageError(Exception):
    """Bad flags, config or instance input: exit status 2."""


# ---------------------------------------------------------------- config


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    flat = {}
    for key, value in data.items():
        if key == "params":
            if not isinstance(value, dict):
                raise UsageError("[params] must be a table")
            for k, v in value.items():
                if k not in PARAM_KEYS:
                    raise UsageError(f"unknown parameter in config: {k}")
                flat[k] = v
        elif key in DEFAULTS:
            flat[key] = value
        else:
            raise UsageError(f"unknown config key: {key}")
    if isinstance(flat.get("suites"), str):
        flat["suites"] = [flat["suites"]]
    return flat


def resolve_config(command, flags):
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if flags.get("config"):
        cfg.update(load_config(flags["config"]))
    cfg.update({k: v for k, v in flags.items() if k != "config" and v is not None})
    suites = cfg["suites"] or COMMAND_SUITES[command]
    flat = []
    for s in suites:
        flat.extend(part for part in str(s).split(",") if part)
    unknown = [s for s in flat if s not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    cfg["suites"] = list(dict.fromkeys(flat))
    if cfg["metric"] not in ("modified", "raw"):
        raise UsageError(f"unknown metric mode: {cfg['metric']}")
    return cfg


# ---------------------------------------------------------------- instances


def load_instance(cfg):
    source = cfg["instance"]
    if source == "schottky-default":
        return schottky_instance(word_radius=int(cfg["radius"]))
    if source == "chain":
        return chain_instance()
    if source == "random":
        return random_geodesic_instance(30, int(cfg["seed"]))
    if source == "monotonicity-counterexample":
        return monotonicity_counterexample()
    path = Path(source)
    if not path.exists():
        raise UsageError(f"instance is neither a built-in ({', '.join(BUILTINS)}) "
                         f"nor an existing file: {source}")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read instance {source}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"instance file {source} must hold a JSON object")
    try:
        if "dpi" in data:
            return TabularSystem.from_dict(data, name=path.stem)
        if "generators" in data:
            radius = cfg["radius"] if cfg.get("_radius_flag") else data.get("word_radius", 2)
            return schottky_instance(data["generators"], word_radius=int(radius), name=path.stem)
        if "count" in data:
            return random_geodesic_instance(
                int(data["count"]), int(data.get("seed", 0)),
                endpoint_range=tuple(data.get("endpoint_range", (-10.0, 10.0))),
                min_gap=float(data.get("min_gap", 0.05)))
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid instance {source}: {exc}") from None
    raise UsageError(f"instance file {source} has none of the keys dpi, generators, count")


def make_params(system, cfg):
    """CoreParams from the overrides; returns (params, auto-K history or None)."""
    if cfg["xi"] is not None and float(cfg["xi"]) != system.xi:
        system = system.with_xi(float(cfg["xi"]))
    try:
        params = CoreParams.derive(system.xi, theta=cfg["theta"], K=cfg["K"],
                                   Kprime=cfg["Kprime"], L=cfg["L"])
    except ValueError as exc:
        raise UsageError(f"invalid constants: {exc}") from None
    history = None
    if cfg["auto_K"]:
        params, history = auto_K(system, params)
        if cfg["Kprime"] is not None or cfg["L"] is not None:
            params = CoreParams.derive(system.xi, theta=params.theta, K=params.K,
                                       Kprime=cfg["Kprime"], L=cfg["L"])
    return system, params, history


# ---------------------------------------------------------------- suites


def suite_axioms(ctx):
    rep = validate_axioms(ctx.system)
    ctx.data["axioms"] = {"minimal_valid_xi": rep.minimal_valid_xi,
                          "axiom0_bound": rep.axiom0_bound, "violations": rep.violations}
    return rep.checks


def suite_theorem_main(ctx):
    return check_theorem_main(ctx.system, ctx.params, mode=ctx.cfg["metric"])


def suite_complex(ctx):
    try:
        c = ctx.complex()
    except DisconnectedComplexError as exc:
        return [Check("complex.connected", FAIL, 1, 1, note=str(exc))]
    if not c.connected:
        return [Check("complex.connected", FAIL, 1, 1, note="raw-mode complex is disconnected")]
    out = check_complex(ctx.system, ctx.params, c)
    out.append(check_guards(ctx.system, ctx.params, c))
    out.append(check_barrier_search(ctx.system, ctx.params, c, walks=int(ctx.cfg["walks"]),
                                    seed=int(ctx.cfg["seed"])))
    check, rep = bottleneck_check(c)
    out.append(check)
    ctx.data["complex"] = {"diameter": complex_diameter(c), "edges": c.edge_count(),
                           "bottleneck": rep.to_dict()}
    return out


def suite_blowup(ctx):
    if not hasattr(ctx.system, "interval"):
        return [Check("blowup.available", INFO, 0, 0, note="instance has no geometry")]
    try:
        space = ctx.blowup()
    except DisconnectedComplexError as exc:
        return [Check("complex.connected", FAIL, 1, 1, note=str(exc))]
    seed = int(ctx.cfg["seed"])
    out = check_blowup(space, ctx.system, ctx.params, pairs=int(ctx.cfg["pairs"]), seed=seed)
    delta = estimate_delta(space, seed=seed)
    out.append(Check("blowup.delta", INFO, space.n_nodes, 0, measured=delta))
    ctx.data["blowup"] = {"nodes": space.n_nodes, "delta": delta, "seed": seed}
    return out


def suite_raw_question(ctx):
    return raw_question(ctx.system, ctx.params)


def _window(system, word, forward, backward):
    """Orbit window of ``word`` over the instance's bases, or the instance itself."""
    if not getattr(system, "bases", ()):
        return system
    try:
        return schottky_instance(system.generators, words=orbit_words(word, forward, backward),
                                 bases=system.bases, name=f"window-{word}")
    except DegenerateConfigurationError:
        return system


def _window_params(window, cfg, K=None, Kprime=None):
    return CoreParams.derive(window.xi, theta=cfg["theta"], K=K if K is not None else cfg["K"],
                             Kprime=Kprime if Kprime is not None else cfg["Kprime"], L=cfg["L"])


def suite_action(ctx):
    system, cfg = ctx.system, ctx.cfg
    if not getattr(system, "generators", None):
        return [Check("action.available", INFO, 0, 0, note="instance has no generators")]
    seed = int(cfg["seed"])
    out = []
    actx = ActionContext(system)
    eq = check_equivariance(actx, sample_count=int(cfg["samples"]), seed=seed)
    bad = eq["samples"] > 0 and eq["max_defect"] > EQUIVARIANCE_TOL
    out.append(Check("action.equivariance", FAIL if bad else PASS, eq["samples"], int(bad),
                     measured={**eq, "tolerance": EQUIVARIANCE_TOL}))

    k_max = int(cfg["k_max"])
    try:
        elem = actx.element(cfg["element"])
    except KeyError as exc:
        raise UsageError(f"element uses an unknown generator letter: {exc}") from None
    win = _window(system, elem.word, k_max, k_max // 2)
    wp = _window_params(win, cfg) if win is not system else ctx.params
    wctx = ActionContext(win)
    curve = translation_length_estimate(wctx, build_complex(win, wp), wctx.element(elem.word),
                                        k_max, theta=wp.theta, Kprime=wp.Kprime)
    curve["window"] = win.name
    curve["window_size"] = win.n
    out.append(Check("action.translation-length", PASS if curve["ok"] else FAIL,
                     len(curve["per_k"]), int(not curve["ok"]),
                     measured={"tau_hat": curve["tau_hat"], "min_per_k":
                               min(curve["per_k"]) if curve["per_k"] else None,
                               "hypothesis_met": curve["hypothesis_met"],
                               "truncated": curve["truncated"]}))
    ctx.data["translation"] = curve
    ctx.exports["translation.csv"] = translation_csv(curve)

    out.extend(_axis_checks(ctx, actx))

    c = ctx.complex()
    probes = {}
    for radius in range(1, int(cfg["wpd_radius"]) + 1):
        res = wpd_probe(actx, c, elem, int(cfg["wpd_D"]), int(cfg["wpd_M"]), radius)
        probes[f"{elem.word}|{cfg['wpd_D']}|{cfg['wpd_M']}|{radius}"] = res
    ctx.data["wpd"] = probes
    counts = [p["count"] for p in probes.values()]
    out.append(Check("action.wpd-probe", INFO, len(counts), 0, measured={"counts": counts}))
    return out


def _axis_checks(ctx, actx):
    cfg = ctx.cfg
    try:
        g = actx.element(cfg["axis_element"])
    except KeyError as exc:
        raise UsageError(f"axis element uses an unknown generator letter: {exc}") from None
    win = _window(ctx.system, g.word, 4, 4)
    wctx = ActionContext(win)
    theta = cfg["theta"] if cfg["theta"] is not None else 4 * win.xi
    K = cfg["axis_K"] if cfg["axis_K"] is not None else theta
    try:
        wp = CoreParams.derive(win.xi, theta=theta, K=K, Kprime=cfg["axis_Kprime"])
    except ValueError as exc:
        raise UsageError(f"invalid axis constants: {exc}") from None
    fwd = combinatorial_axis(wctx, wctx.element(g.word), wp.K, wp.Kprime)
    back = combinatorial_axis(wctx, wctx.element(g.word).inverse(), wp.K, wp.Kprime)
    ctx.data["axis"] = {"forward": fwd, "inverse": back, "window": win.name, "K": wp.K,
                        "Kprime": wp.Kprime}
    if not fwd["ordered"]:
        return [Check("action.combinatorial-axis", FAIL, len(fwd["axis"]), 1,
                      note=fwd.get("error"))]
    violations = (fwd["betweenness_violations"] + fwd["invariance_gaps"]
                  + fwd["order_violations"])
    shift_ok = len(fwd["axis"]) <= 1 or fwd["is_shift"]
    reversed_ok = back["ordered"] and back["axis"] == fwd["axis"][::-1]
    return [
        Check("action.combinatorial-axis", PASS if violations == 0 and shift_ok else FAIL,
              len(fwd["axis"]), violations + int(not shift_ok),
              measured={"length": len(fwd["axis"]), "shifts": fwd["shifts"],
                        "skipped": fwd["skipped"]}),
        Check("action.axis-reversal", PASS if reversed_ok else FAIL, 1, int(not reversed_ok)),
    ]


SUITE_FUNCS = {
    "axioms": suite_axioms,
    "theorem-main": suite_theorem_main,
    "complex": suite_complex,
    "blowup": suite_blowup,
    "action": suite_action,
    "raw-question": suite_raw_question,
}


class RunContext:
    """Instance, constants and lazily built structures shared by the suites."""

    def __init__(self, cfg, system, params):
        self.cfg = cfg
        self.system = system
        self.params = params
        self.data = {}
        self.exports = {}
        self._complex = None
        self._blowup = None

    def complex(self):
        if self._complex is None:
            self._complex = build_complex(self.system, self.params, metric_mode=self.cfg["metric"])
        return self._complex

    def blowup(self):
        if self._blowup is None:
            c = self.complex()
            if c.mode != "modified":
                c = build_complex(self.system, self.params)
            self._blowup = build_blowup(self.system, self.params, c)
        return self._blowup


# ---------------------------------------------------------------- exports


def translation_csv(curve):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "distance", "distance_over_k"])
    for k, v in enumerate(curve["per_k"], start=1):
        w.writerow([k, round(v * k), repr(v)])
    return buf.getvalue()


def _write(out, name, text):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


# ---------------------------------------------------------------- commands


def run(command, cfg, stream=None):
    """Run one command; returns the exit status."""
    stream = sys.stdout if stream is None else stream
    started = time.perf_counter()
    timings = {}
    try:
        system = load_instance(cfg)
    except DegenerateConfigurationError as exc:
        raise UsageError(f"degenerate instance: {exc}") from None
    system, params, history = make_params(system, cfg)
    provenance = {
        "command": command,
        "instance": cfg["instance"],
        "instance_name": system.name,
        "instance_digest": system.digest(),
        "vertices": system.n,
        "params": params.to_dict(),
        "metric": cfg["metric"],
        "seed": int(cfg["seed"]),
        "pairs": int(cfg["pairs"]),
        "samples": int(cfg["samples"]),
    }
    if history is not None:
        provenance["auto_K_history"] = [list(h) for h in history]
    ctx = RunContext(cfg, system, params)
    out = Path(cfg["out"])

    if command == "build":
        reports = {"build": _build(ctx, out)}
    else:
        reports = {}
        for suite in cfg["suites"]:
            t = time.perf_counter()
            rep = Report(suite)
            rep.extend(SUITE_FUNCS[suite](ctx))
            timings[suite] = time.perf_counter() - t
            reports[suite] = rep
        for name, text in ctx.exports.items():
            _write(out, name, text)

    failed = any(r.failed for r in reports.values())
    doc = {
        "provenance": provenance,
        "suites": {name: r.to_dict() for name, r in reports.items()},
        "data": ctx.data,
        "failed": failed,
    }
    text = json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    _write(out, "report.json", text)
    timings["total"] = time.perf_counter() - started
    _write(out, "runtime.json", json.dumps({"backend": kernels.BACKEND, "seconds": timings},
                                           indent=2, sort_keys=True) + "\n")
    for name, r in reports.items():
        print(f"== {name}", file=stream)
        for line in r.lines():
            print(line, file=stream)
    print(f"report: {out / 'report.json'}", file=stream)
    return 1 if failed else 0


def _build(ctx, out):
    rep = Report("build")
    system, params, cfg = ctx.system, ctx.params, ctx.cfg
    modes = [cfg["metric"]]
    if cfg["raw"] and "raw" not in modes:
        modes.append("raw")
    files = []
    for mode in modes:
        c = ctx.complex() if mode == cfg["metric"] else build_complex(system, params,
                                                                     metric_mode="raw")
        name = "complex.dot" if mode == cfg["metric"] else "complex-raw.dot"
        _write(out, name, to_dot(c, name="projection_complex_" + mode))
        files.append(name)
        rep.add(Check(f"build.complex-{mode}", INFO, system.n, 0,
                      measured={"edges": c.edge_count(), "connected": c.connected}))
    c = ctx.complex()
    if c.connected:
        _write(out, "bounds.csv", distance_bounds_csv(system, params, c))
        files.append("bounds.csv")
    if hasattr(system, "interval") and c.connected:
        space = ctx.blowup()
        _write(out, "blowup-edges.csv", edge_list_csv(space))
        files.append("blowup-edges.csv")
        rep.add(Check("build.blowup", INFO, space.n_nodes, 0,
                      measured={"nodes": space.n_nodes, "edges": len(space.edge_list())}))
    ctx.data["files"] = files
    return rep


# ---------------------------------------------------------------- argument parsing


def build_parser():
    parser = argparse.ArgumentParser(prog="quasitree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("validate", "axiom and modified-distance checks"),
                        ("build", "build the complex and blowup, export DOT and CSV"),
                        ("analyze", "complex and blowup diagnostics"),
                        ("action", "group-action diagnostics")):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="TOML file with default settings")
        p.add_argument("--instance", help=f"built-in ({', '.join(BUILTINS)}) or JSON file")
        p.add_argument("--radius", type=int, help="word radius of the Schottky instance")
        p.add_argument("--xi", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--K", type=float)
        p.add_argument("--auto-K", dest="auto_K", action="store_true")
        p.add_argument("--Kprime", type=float)
        p.add_argument("--L", type=float)
        p.add_argument("--metric", choices=("modified", "raw"))
        p.add_argument("--suite", dest="suites", action="append",
                       help=f"one of {', '.join(SUITES)}; repeatable or comma separated")
        p.add_argument("--pairs", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        if name == "build":
            p.add_argument("--raw", action="store_true", help="also export the raw-mode complex")
        if name == "action":
            p.add_argument("--element", help="word whose translation length is estimated")
            p.add_argument("--k-max", dest="k_max", type=int)
            p.add_argument("--axis-element", dest="axis_element")
            p.add_argument("--axis-K", dest="axis_K", type=float)
            p.add_argument("--axis-Kprime", dest="axis_Kprime", type=float)
            p.add_argument("--wpd-D", dest="wpd_D", type=int)
            p.add_argument("--wpd-M", dest="wpd_M", type=int)
            p.add_argument("--wpd-radius", dest="wpd_radius", type=int)
    return parser


def main(argv=None):
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    args["_radius_flag"] = "radius" in args
    try:
        cfg = resolve_config(command, args)
        return run(command, cfg)
    except UsageError as exc:
        print(f"quasitree: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
