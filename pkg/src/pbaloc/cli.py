"""Experiment driver: scene generation, localization runs, baselines, analysis.

Subcommands
-----------
gen-scene     render a star-on-noise scene to PGM + JSON sidecar
localize      run the bisection search on a scene, write the trace CSV
baseline      run the sliding-window baseline, write the comparison CSV
compare       run both on the same scene and report the call-count speedup
analyze       Monte Carlo error curves against the capacity bound, as CSV
check-oracle  handshake and probe an external classifier endpoint

Exit codes: 0 success, 1 invalid arguments, 2 oracle/transport failure,
3 run finished without meeting the convergence test (flagged, outputs are
still written).

Every CSV starts with reproducibility comments (# version / command / seed /
config hash); identical seeds and configs reproduce byte-identical data
rows.  ``--config FILE`` reads defaults from a JSON document and
``--dump-config FILE`` writes back the fully resolved configuration with no
hidden defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import analysis as analysis_mod
from . import baseline as baseline_mod
from . import engine as engine_mod
from . import scene as scene_mod
from .oracles import (
    BlockTruthOracle,
    BscOracle,
    ExternalOracle,
    OracleUnavailableError,
    ProtocolError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ORACLE = 2
EXIT_NOT_CONVERGED = 3

TRACE_COLUMNS = (
    "t,axis,split_bin,side,q_blocks,y,epsilon,calls_cum,"
    "median_row,median_col,map_row,map_col,var_row,var_col,"
    "width95_row,width95_col"
)
COMPARE_COLUMNS = "method,calls,center_row,center_col,err_l2,speedup"
CURVE_COLUMNS = "n,mse,bound,trials,epsilon,dims"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_dims(text: str) -> tuple[int, int]:
    """HEIGHTxWIDTH, e.g. 200x300 (rows x cols)."""
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise ValueError(f"dims must look like 200x300, got {text!r}") from exc


def _parse_center(text: str) -> tuple[int, int]:
    """ROW,COL, 1-indexed."""
    try:
        r, c = text.split(",")
        return int(r), int(c)
    except ValueError as exc:
        raise ValueError(f"center must look like 100,50, got {text!r}") from exc


def _parse_windows(text: str) -> list[baseline_mod.WindowGridSpec]:
    """Comma-separated SIDE:SHIFT pairs, e.g. 100:25,150:25,200:25."""
    specs = []
    for chunk in text.split(","):
        try:
            side, shift = chunk.split(":")
            specs.append(baseline_mod.WindowGridSpec(int(side), int(shift)))
        except ValueError as exc:
            raise ValueError(f"window spec must look like 100:25, got {chunk!r}") from exc
    if not specs:
        raise ValueError("need at least one window spec")
    return specs


def _config_hash(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(
    path: str, command: str, seed: int, config: dict, header: str, rows: list[str]
) -> None:
    lines = [
        f"# version={__version__}",
        f"# command={command}",
        f"# seed={seed}",
        f"# config_sha256={_config_hash(config)}",
        header,
    ]
    lines.extend(rows)
    Path(path).write_text("\n".join(lines) + "\n")


def _resolve(args: argparse.Namespace, keys: dict[str, object]) -> dict:
    """Merge CLI values over --config file values over hard defaults."""
    file_config: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        file_config = json.loads(Path(config_path).read_text())
        if not isinstance(file_config, dict):
            raise ValueError(f"{config_path}: config must be a JSON object")
    resolved = {}
    for key, default in keys.items():
        cli_value = getattr(args, key.replace("-", "_"), None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_config:
            resolved[key] = file_config[key]
        else:
            resolved[key] = default
    missing = [k for k, v in resolved.items() if v is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join(missing)}")
    dump_path = getattr(args, "dump_config", None)
    if dump_path:
        Path(dump_path).write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return resolved


def _make_engine_config(cfg: dict) -> engine_mod.EngineConfig:
    return engine_mod.EngineConfig(
        max_iterations=int(cfg["max-iterations"]),
        stop_map_mass=float(cfg["stop-map-mass"]),
        stop_credible_width=int(cfg["stop-credible-width"]),
        rng_seed=int(cfg["seed"]),
        block_input_side=int(cfg["input-side"]),
    )


def _make_oracle(cfg: dict, scene: scene_mod.Scene, rng_seed: int):
    kind = cfg["oracle"]
    if kind == "bsc":
        return BscOracle(
            scene.target_center, float(cfg["eps"]), np.random.default_rng(rng_seed)
        )
    if kind == "block-truth":
        return BlockTruthOracle(
            scene,
            float(cfg["eps"]),
            conf_floor=float(cfg["conf-floor"]),
            rng=np.random.default_rng(rng_seed),
        )
    if kind == "external":
        return ExternalOracle.connect(str(cfg["endpoint"]), scene=scene)
    raise ValueError(f"unknown oracle {kind!r}")


def _close_oracle(oracle: object) -> None:
    if isinstance(oracle, ExternalOracle):
        oracle.close()


def _trace_rows(trace: Sequence[engine_mod.TraceRow]) -> list[str]:
    rows = []
    for r in trace:
        rows.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.t, r.axis, r.split_bin, r.side, r.q_blocks, r.y, r.epsilon,
                    r.calls_cum, r.median_row, r.median_col, r.map_row, r.map_col,
                    r.var_row, r.var_col, r.width95_row, r.width95_col,
                )
            )
        )
    return rows


def _cmd_gen_scene(args: argparse.Namespace) -> int:
    dims = _parse_dims(args.dims)
    center = _parse_center(args.center)
    scn = scene_mod.generate_star_scene(
        dims, center, args.half_size, args.noise, args.seed
    )
    scene_mod.save_scene(scn, args.output)
    print(f"wrote {args.output} ({scn.height}x{scn.width}, center {center})")
    return EXIT_OK


_RUN_KEYS: dict[str, object] = {
    "oracle": "block-truth",
    "eps": 0.05,
    "conf-floor": 0.75,
    "endpoint": "",
    "seed": 0,
    "max-iterations": 200,
    "stop-map-mass": 0.99,
    "stop-credible-width": 3,
    "input-side": 100,
}


def _cmd_localize(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _RUN_KEYS)
    scn = scene_mod.load_scene(args.scene)
    config = _make_engine_config(cfg)
    oracle = _make_oracle(cfg, scn, rng_seed=int(cfg["seed"]) + 1)
    try:
        result = engine_mod.run(scn.dims, oracle, config)
    finally:
        _close_oracle(oracle)
    _write_csv(
        args.output, "localize", int(cfg["seed"]), cfg, TRACE_COLUMNS,
        _trace_rows(result.trace),
    )
    status = "converged" if result.converged else "NOT CONVERGED"
    print(
        f"center={result.center[0]},{result.center[1]} "
        f"iterations={result.iterations_used} calls={result.oracle_calls} {status}"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _compare_row(
    method: str, calls: int, center: tuple[int, int],
    truth: tuple[int, int], ratio: float,
) -> str:
    err = float(np.hypot(center[0] - truth[0], center[1] - truth[1]))
    return ",".join(
        _fmt(v) for v in (method, calls, center[0], center[1], err, ratio)
    )


def _cmd_baseline(args: argparse.Namespace) -> int:
    keys = dict(_RUN_KEYS)
    keys["windows"] = "100:25,150:25,200:25"
    cfg = _resolve(args, keys)
    if cfg["oracle"] == "bsc":
        raise ValueError("the sliding-window baseline needs a block oracle")
    scn = scene_mod.load_scene(args.scene)
    specs = _parse_windows(str(cfg["windows"]))
    oracle = _make_oracle(cfg, scn, rng_seed=int(cfg["seed"]) + 2)
    try:
        center, calls = baseline_mod.sliding_window_localize(scn, oracle, specs)
    finally:
        _close_oracle(oracle)
    _write_csv(
        args.output, "baseline", int(cfg["seed"]), cfg, COMPARE_COLUMNS,
        [_compare_row("sliding_window", calls, center, scn.target_center, 1.0)],
    )
    print(f"center={center[0]},{center[1]} calls={calls}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    keys = dict(_RUN_KEYS)
    keys["windows"] = "100:25,150:25,200:25"
    cfg = _resolve(args, keys)
    if cfg["oracle"] == "bsc":
        raise ValueError("compare needs a block oracle")
    scn = scene_mod.load_scene(args.scene)
    specs = _parse_windows(str(cfg["windows"]))
    config = _make_engine_config(cfg)

    pba_oracle = _make_oracle(cfg, scn, rng_seed=int(cfg["seed"]) + 1)
    try:
        result = engine_mod.run(scn.dims, pba_oracle, config)
    finally:
        _close_oracle(pba_oracle)

    sw_oracle = _make_oracle(cfg, scn, rng_seed=int(cfg["seed"]) + 2)
    try:
        sw_center, sw_calls = baseline_mod.sliding_window_localize(scn, sw_oracle, specs)
    finally:
        _close_oracle(sw_oracle)

    ratio = baseline_mod.speedup(result.oracle_calls, sw_calls)
    rows = [
        _compare_row("pba", result.oracle_calls, result.center,
                     scn.target_center, ratio),
        _compare_row("sliding_window", sw_calls, sw_center,
                     scn.target_center, ratio),
    ]
    _write_csv(args.output, "compare", int(cfg["seed"]), cfg, COMPARE_COLUMNS, rows)
    print(
        f"pba calls={result.oracle_calls} sliding_window calls={sw_calls} "
        f"speedup={ratio:.2f}x"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_analyze(args: argparse.Namespace) -> int:
    keys: dict[str, object] = {
        "grid": "1024", "eps": 0.1, "trials": 200, "nmax": 200, "seed": 0,
    }
    cfg = _resolve(args, keys)
    grid_text = str(cfg["grid"])
    dims = _parse_dims(grid_text) if "x" in grid_text.lower() else int(grid_text)
    d = 1 if isinstance(dims, int) else 2
    eps = float(cfg["eps"])
    curve = analysis_mod.run_mc(
        dims, eps, int(cfg["nmax"]), int(cfg["trials"]), int(cfg["seed"])
    )
    params = analysis_mod.calibrate_bound(curve, d, eps)
    rows = []
    for n, mse in zip(curve.n.tolist(), curve.mse.tolist()):
        bound = analysis_mod.mse_lower_bound(n, params)
        rows.append(
            ",".join(_fmt(v) for v in (n, mse, bound, curve.trials, eps, grid_text))
        )
    _write_csv(args.output, "analyze", int(cfg["seed"]), cfg, CURVE_COLUMNS, rows)
    if args.plot:
        _plot_curve(curve, params, args.plot)
    print(f"wrote {args.output} ({curve.n.size} points, {curve.trials} trials)")
    return EXIT_OK


def _plot_curve(
    curve: analysis_mod.MseCurve, params: analysis_mod.BoundParams, path: str
) -> None:
    try:
        import matplotlib
    except ImportError as exc:
        raise ValueError("--plot requires matplotlib (pip install pbaloc[plot])") from exc
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    bound = [analysis_mod.mse_lower_bound(int(n), params) for n in curve.n]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(curve.n, np.maximum(curve.mse, 1e-12), label="empirical MSE")
    ax.semilogy(curve.n, bound, "--", label="capacity bound")
    ax.set_xlabel("queries n")
    ax.set_ylabel("MSE (bins$^2$)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _cmd_check_oracle(args: argparse.Namespace) -> int:
    oracle = ExternalOracle.connect(args.endpoint)
    try:
        probe = np.zeros((oracle.input_side, oracle.input_side), dtype=np.uint8)
        response = oracle.query_block(probe)
        print(
            f"ok input_side={oracle.input_side} classes={list(oracle.classes)} "
            f"blank_confidence=[{response.confidence[0]!r}, {response.confidence[1]!r}]"
        )
    finally:
        oracle.close()
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="pbaloc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scene", help="render a star-on-noise scene")
    p.add_argument("--dims", required=True, help="HEIGHTxWIDTH, e.g. 200x300")
    p.add_argument("--center", required=True, help="ROW,COL (1-indexed)")
    p.add_argument("--half-size", type=int, default=20, help="star arm length")
    p.add_argument("--noise", type=float, default=0.2, help="salt-pepper density")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="PGM output path")
    p.set_defaults(func=_cmd_gen_scene)

    def add_run_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scene", required=True, help="PGM scene path")
        p.add_argument("--oracle", choices=("bsc", "block-truth", "external"))
        p.add_argument("--eps", type=float, help="oracle flip probability")
        p.add_argument("--conf-floor", type=float,
                       help="block-truth winning-confidence floor")
        p.add_argument("--endpoint",
                       help="external oracle endpoint (stdio:CMD or tcp://HOST:PORT)")
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="JSON config file with defaults")
        p.add_argument("--dump-config", help="write the resolved config as JSON")
        p.add_argument("-o", "--output", required=True, help="CSV output path")

    p = sub.add_parser("localize", help="run the bisection search")
    add_run_options(p)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--stop-map-mass", type=float)
    p.add_argument("--stop-credible-width", type=int)
    p.add_argument("--input-side", type=int)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("baseline", help="run the sliding-window baseline")
    add_run_options(p)
    p.add_argument("--windows", help="SIDE:SHIFT list, e.g. 100:25,150:25")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("compare", help="run both and report the speedup")
    add_run_options(p)
    p.add_argument("--windows", help="SIDE:SHIFT list, e.g. 100:25,150:25")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--stop-map-mass", type=float)
    p.add_argument("--stop-credible-width", type=int)
    p.add_argument("--input-side", type=int)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("analyze", help="Monte Carlo error curve vs the bound")
    p.add_argument("--grid", help="bins: 1024 or 256x256")
    p.add_argument("--eps", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--nmax", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file with defaults")
    p.add_argument("--dump-config", help="write the resolved config as JSON")
    p.add_argument("--plot", help="also write an SVG plot to this path")
    p.add_argument("-o", "--output", required=True, help="CSV output path")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("check-oracle", help="probe an external classifier")
    p.add_argument("--endpoint", required=True)
    p.set_defaults(func=_cmd_check_oracle)

    return parser


def dispatch(argv: Sequence[str]) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except (OracleUnavailableError, ProtocolError) as exc:
        print(f"pbaloc: oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"pbaloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
