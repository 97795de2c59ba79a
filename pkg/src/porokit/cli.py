"""Command-line interface: one subcommand per pipeline stage.

Volumes travel between stages as raw u8 files with JSON sidecars; every
report is CSV. Each run writes a ``<output>.run.json`` record of the
fully resolved configuration so results can be reproduced exactly.

Exit codes: 0 success, 2 usage error, 3 invalid configuration,
4 I/O failure, 5 processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import filters as flt
from .components import (
    label_components,
    stone_distances,
    stone_report,
    write_size_histogram_csv,
    write_stone_report_csv,
)
from .phantom import GaussianNoise, PhantomSpec, SaltPepperNoise, add_noise, generate_phantom
from .postprocess import resolve_stones, write_decisions_csv
from .segmentation import UnbalancedOtsu, binarize
from .selection import (
    evaluate_filter,
    grid_search,
    param_sweep,
    write_selection_csv,
    write_sweep_csv,
)
from .volume import (
    load_binary_volume,
    load_volume,
    save_binary_volume,
    save_volume,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_PROCESSING = 5

_EPILOG = (
    "exit codes: 0 success, 2 usage error, 3 invalid configuration, "
    "4 I/O failure, 5 processing error"
)


class ConfigError(Exception):
    """Raised when flags or config-file values cannot be interpreted."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_ints(text: str, n: int, name: str) -> tuple[int, ...]:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != n:
        raise ConfigError(f"{name} needs {n} comma-separated integers, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{name} needs integers, got {text!r}") from None


def _parse_floats(text: str, n: int, name: str) -> tuple[float, ...]:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != n:
        raise ConfigError(f"{name} needs {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{name} needs numbers, got {text!r}") from None


def _parse_filter(spec: str):
    try:
        return flt.filter_from_string(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_noise(spec: str, default_seed: int):
    """Noise spec-string: gaussian:sigma=5 or saltpepper:p=0.005,salt=255,pepper=0."""
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip()
    kwargs: dict[str, float] = {}
    if rest.strip():
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"malformed noise parameter {item!r} in {spec!r}")
            try:
                kwargs[key.strip()] = float(value.strip())
            except ValueError:
                raise ConfigError(f"bad value in noise spec {spec!r}") from None
    seed = int(kwargs.pop("seed", default_seed))
    try:
        if kind == "gaussian":
            return GaussianNoise(sigma=kwargs.pop("sigma"), seed=seed, **_no_extras(kwargs, spec))
        if kind == "saltpepper":
            return SaltPepperNoise(
                p=kwargs.pop("p"),
                salt_value=kwargs.pop("salt", 255.0),
                pepper_value=kwargs.pop("pepper", 0.0),
                seed=seed,
                **_no_extras(kwargs, spec),
            )
    except KeyError as exc:
        raise ConfigError(f"noise spec {spec!r} is missing parameter {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown noise kind {kind!r}; expected gaussian or saltpepper")


def _no_extras(kwargs: dict, spec: str) -> dict:
    if kwargs:
        raise ConfigError(f"unknown noise parameters {sorted(kwargs)} in {spec!r}")
    return {}


def _parse_threshold(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"--threshold must be 'auto' or an integer, got {text!r}") from None
    if not 0 <= value <= 255:
        raise ConfigError(f"--threshold must lie in [0, 255], got {value}")
    return value


def _parse_delta_max(text: str) -> float | str:
    if text == "calibrate":
        return "calibrate"
    try:
        return float(text)
    except ValueError:
        raise ConfigError(
            f"--delta-max must be 'calibrate' or a number, got {text!r}"
        ) from None


def _load_grid_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            grids = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"grid file {path} is not valid JSON: {exc}") from None
    if not isinstance(grids, dict):
        raise ConfigError(f"grid file {path} must hold an object of families")
    if not grids:
        raise ConfigError(f"grid file {path} defines an empty grid")
    return grids


def _parse_values(text: str, name: str) -> list[float]:
    """Value list grammar: '1,2,3' or 'start:stop:step' (stop inclusive)."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{name}: range form needs start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{name}: bad range {text!r}") from None
        if step <= 0:
            raise ConfigError(f"{name}: step must be positive in {text!r}")
        values = []
        k = 0
        while True:
            v = round(start + k * step, 10)
            if v > stop + 1e-9:
                break
            values.append(v)
            k += 1
        if not values:
            raise ConfigError(f"{name}: empty range {text!r}")
        return values
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{name}: bad value list {text!r}") from None


def _write_run_record(args: argparse.Namespace, anchor: str | Path) -> None:
    record = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config"):
            continue
        record[key] = str(value) if isinstance(value, Path) else value
    path = Path(str(anchor) + ".run.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    _log(f"config: {json.dumps(record, sort_keys=True)}")


# ---------------------------------------------------------------------------
# subcommands


def _parse_noise_list(specs, seed: int) -> list:
    if isinstance(specs, str):
        specs = [specs]
    return [
        _parse_noise(spec, default_seed=seed + 1 + i) for i, spec in enumerate(specs or [])
    ]


def cmd_phantom(args) -> int:
    dims = _parse_ints(args.dims, 3, "--dims")
    radii = _parse_floats(args.grain_radius, 2, "--grain-radius")
    try:
        spec = PhantomSpec(
            dims=dims,
            target_porosity=args.porosity,
            grain_radius_range=radii,
            material_intensity=args.material_intensity,
            pore_intensity=args.pore_intensity,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    noises = _parse_noise_list(args.noise, args.seed)

    volume, truth = generate_phantom(spec)
    if args.clean_output:
        save_volume(volume, args.clean_output)
    for noise in noises:
        volume = add_noise(volume, noise)
    save_volume(volume, args.output)
    if args.ground_truth:
        save_binary_volume(truth, args.ground_truth)
    _write_run_record(args, args.output)
    _log(f"phantom: dims={dims} material={int(truth.material_count)} voxels")
    return EXIT_OK


def cmd_filter(args) -> int:
    filt = _parse_filter(args.filter)
    volume = load_volume(args.input)
    result = flt.apply_filter(volume, filt, threads=args.threads)
    save_volume(result, args.output)
    _write_run_record(args, args.output)
    return EXIT_OK


def cmd_segment(args) -> int:
    threshold = _parse_threshold(args.threshold)
    volume = load_volume(args.input)
    if threshold is None:
        otsu = UnbalancedOtsu().fit(volume)
        segmented = otsu.transform(volume)
        _log(f"segment: threshold={otsu.threshold_} criterion={otsu.criterion_:.6g}")
    else:
        segmented = binarize(volume, threshold)
        _log(f"segment: threshold={threshold} (fixed)")
    save_binary_volume(segmented, args.output)
    _write_run_record(args, args.output)
    return EXIT_OK


def _histogram_path(report: str) -> Path:
    p = Path(report)
    return p.with_name(p.stem + "_sizes" + (p.suffix or ".csv"))


def cmd_analyze(args) -> int:
    binary = load_binary_volume(args.input)
    field = label_components(binary, connectivity=args.connectivity)
    report = stone_report(field)
    distances = stone_distances(field, report)
    write_stone_report_csv(report, distances, args.report)
    hist_path = args.histogram or _histogram_path(args.report)
    write_size_histogram_csv(report, hist_path)
    _write_run_record(args, args.report)
    _log(
        f"analyze: bulk={report.bulk.size} voxels, stones={report.total_stones}, "
        f"one-voxel={report.one_voxel_count}"
    )
    return EXIT_OK


def cmd_select(args) -> int:
    grids = _load_grid_file(args.grid) if args.grid else None
    delta_max = _parse_delta_max(args.delta_max)
    volume = load_volume(args.input)
    result = grid_search(
        volume,
        grids=grids,
        delta_max=delta_max,
        connectivity=args.connectivity,
        threads=args.threads,
    )
    baseline = evaluate_filter(volume, flt.MedianFilter(h=1, w=1), connectivity=args.connectivity)
    write_selection_csv(result, args.report, baseline=baseline)
    if args.evaluations:
        write_selection_csv(result, args.evaluations, baseline=baseline, all_evaluations=True)
    _write_run_record(args, args.report)
    _log(f"select: delta_max={result.delta_max:.6g}")
    if result.best_overall is None:
        _log("select: no feasible configuration")
    else:
        best = result.best_overall
        _log(
            f"select: best {best.family}:{best.params} one_voxel={best.one_voxel_stones} "
            f"delta={best.delta:.6g}"
        )
    return EXIT_OK


def cmd_sweep(args) -> int:
    if len(args.vary) != 2:
        raise ConfigError(f"--vary must be given exactly twice, got {len(args.vary)}")
    varying = {}
    for item in args.vary:
        key, sep, values = item.partition("=")
        if not sep:
            raise ConfigError(f"--vary needs KEY=VALUES, got {item!r}")
        varying[key.strip()] = _parse_values(values, f"--vary {key.strip()}")
    fixed = {}
    for item in args.fixed or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--fixed needs KEY=VALUE, got {item!r}")
        try:
            fixed[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--fixed needs numeric values, got {item!r}") from None

    volume = load_volume(args.input)
    try:
        table = param_sweep(
            volume,
            args.family,
            varying,
            fixed=fixed,
            connectivity=args.connectivity,
            threads=args.threads,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_sweep_csv(table, args.report)
    _write_run_record(args, args.report)
    _log(f"sweep: {len(table.rows)} rows over {table.param_names}")
    return EXIT_OK


def cmd_postprocess(args) -> int:
    if args.tau <= 0:
        raise ConfigError(f"--tau must be positive, got {args.tau}")
    binary = load_binary_volume(args.input)
    field = label_components(binary, connectivity=args.connectivity)
    report = stone_report(field)
    cleaned, decisions = resolve_stones(binary, field, report, tau=args.tau)
    save_binary_volume(cleaned, args.output)
    write_decisions_csv(decisions, args.report)
    _write_run_record(args, args.output)
    removed = sum(1 for d in decisions if d.action == "remove")
    _log(f"postprocess: {removed} removed, {len(decisions) - removed} attached")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    dims = _parse_ints(args.dims, 3, "--dims")
    radii = _parse_floats(args.grain_radius, 2, "--grain-radius")
    try:
        spec = PhantomSpec(
            dims=dims,
            target_porosity=args.porosity,
            grain_radius_range=radii,
            material_intensity=args.material_intensity,
            pore_intensity=args.pore_intensity,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    noises = _parse_noise_list(args.noise, args.seed)
    grids = _load_grid_file(args.grid) if args.grid else None
    delta_max = _parse_delta_max(args.delta_max)
    if args.tau <= 0:
        raise ConfigError(f"--tau must be positive, got {args.tau}")

    clean, truth = generate_phantom(spec)
    save_volume(clean, outdir / "phantom_clean.raw")
    save_binary_volume(truth, outdir / "phantom_truth.raw")
    volume = clean
    for noise in noises:
        volume = add_noise(volume, noise)
    save_volume(volume, outdir / "input.raw")

    result = grid_search(
        volume,
        grids=grids,
        delta_max=delta_max,
        connectivity=args.connectivity,
        threads=args.threads,
    )
    baseline = evaluate_filter(volume, flt.MedianFilter(h=1, w=1), connectivity=args.connectivity)
    write_selection_csv(result, outdir / "selection.csv", baseline=baseline)
    write_selection_csv(
        result, outdir / "evaluations.csv", baseline=baseline, all_evaluations=True
    )
    if result.best_overall is None:
        raise ValueError("no feasible filter configuration under the distortion bound")
    best = result.best_overall.spec
    _log(f"pipeline: selected {flt.filter_to_string(best)}")

    filtered = flt.apply_filter(volume, best, threads=args.threads)
    save_volume(filtered, outdir / "filtered.raw")

    otsu = UnbalancedOtsu().fit(filtered)
    segmented = otsu.transform(filtered)
    _log(f"pipeline: threshold={otsu.threshold_} criterion={otsu.criterion_:.6g}")
    save_binary_volume(segmented, outdir / "segmented.raw")

    field = label_components(segmented, connectivity=args.connectivity)
    report = stone_report(field)
    distances = stone_distances(field, report)
    write_stone_report_csv(report, distances, outdir / "stones.csv")
    write_size_histogram_csv(report, outdir / "stone_sizes.csv")

    cleaned, decisions = resolve_stones(segmented, field, report, tau=args.tau)
    save_binary_volume(cleaned, outdir / "cleaned.raw")
    write_decisions_csv(decisions, outdir / "decisions.csv")
    _write_run_record(args, outdir / "pipeline")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of flag defaults (flags override it)")


def _add_phantom_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dims", default="64,64,64", help="volume size nx,ny,nz")
    parser.add_argument("--porosity", type=float, default=0.5, help="target pore fraction")
    parser.add_argument(
        "--grain-radius", default="14,20", help="grain radius range in voxels, min,max"
    )
    parser.add_argument("--material-intensity", type=float, default=200.0)
    parser.add_argument("--pore-intensity", type=float, default=60.0)
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument(
        "--noise",
        action="append",
        default=None,
        help="noise spec, repeatable (applied in order): gaussian:sigma=S or "
        "saltpepper:p=P[,salt=..][,pepper=..][,seed=..]",
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="porokit",
        description="Porous-structure CT analysis pipeline",
        epilog=_EPILOG,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic porous volume", epilog=_EPILOG)
    _add_common(p)
    _add_phantom_flags(p)
    p.add_argument("--output", required=True, help="output volume path")
    p.add_argument("--ground-truth", default=None, help="optional ground-truth label path")
    p.add_argument("--clean-output", default=None, help="optional pre-noise volume path")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("filter", help="apply one filter to a volume", epilog=_EPILOG)
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument(
        "--filter",
        required=True,
        help="filter spec, e.g. median:h=1,w=3 | aniso:N=8,lambda=0.2,K=20 | "
        "bilateral:h=1,w=7,sigma_s=1.3,sigma_r=0.5 | guided:w=3,eps=0.275",
    )
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("segment", help="binarize a volume", epilog=_EPILOG)
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--threshold", default="auto", help="'auto' or an integer in [0, 255]")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("analyze", help="label components and report stones", epilog=_EPILOG)
    _add_common(p)
    p.add_argument("--input", required=True, help="segmented volume")
    p.add_argument("--report", required=True, help="per-stone CSV output")
    p.add_argument("--histogram", default=None, help="size histogram CSV (default: derived)")
    p.add_argument("--connectivity", type=int, default=26, choices=(6, 18, 26))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser(
        "select", help="grid-search filter parameters under a distortion bound", epilog=_EPILOG
    )
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--report", required=True, help="summary CSV (per-family winners)")
    p.add_argument("--evaluations", default=None, help="optional CSV of every grid point")
    p.add_argument("--grid", default=None, help="JSON grid file (default: built-in grids)")
    p.add_argument("--delta-max", default="calibrate", help="'calibrate' or a number")
    p.add_argument("--connectivity", type=int, default=26, choices=(6, 18, 26))
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("sweep", help="two-parameter sweep for one family", epilog=_EPILOG)
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--family", required=True, choices=flt.FAMILY_ORDER)
    p.add_argument(
        "--vary",
        action="append",
        required=True,
        help="KEY=V1,V2,... or KEY=start:stop:step; give exactly twice",
    )
    p.add_argument("--fixed", action="append", help="KEY=VALUE for the remaining parameters")
    p.add_argument("--connectivity", type=int, default=26, choices=(6, 18, 26))
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("postprocess", help="remove or attach residual stones", epilog=_EPILOG)
    _add_common(p)
    p.add_argument("--input", required=True, help="segmented volume")
    p.add_argument("--output", required=True, help="cleaned segmented volume")
    p.add_argument("--report", required=True, help="decision CSV")
    p.add_argument("--tau", type=float, default=1.0, help="relative-distance threshold")
    p.add_argument("--connectivity", type=int, default=26, choices=(6, 18, 26))
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser(
        "pipeline",
        help="phantom -> noise -> select -> filter -> segment -> analyze -> postprocess",
        epilog=_EPILOG,
    )
    _add_common(p)
    _add_phantom_flags(p)
    p.add_argument("--outdir", required=True)
    p.add_argument("--grid", default=None)
    p.add_argument("--delta-max", default="calibrate")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--connectivity", type=int, default=26, choices=(6, 18, 26))
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)

    return parser, dict(sub.choices)


def _apply_config_file(
    subcommands: dict[str, argparse.ArgumentParser], argv: list[str]
) -> None:
    """Load --config defaults into the invoked subparser; flags still override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    command = next((a for a in argv if not a.startswith("-")), None)
    subparser = subcommands.get(command or "")
    if subparser is None:
        return  # let argparse produce its own usage error
    try:
        with open(known.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {known.config} is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a JSON object of flag values")
    valid = {a.dest for a in subparser._actions} - {"help"}
    mapped = {str(k).replace("-", "_"): v for k, v in config.items()}
    unknown = set(mapped) - valid
    if unknown:
        raise ConfigError(
            f"config keys {sorted(unknown)} are not valid for the {command} command"
        )
    subparser.set_defaults(**mapped)


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, subcommands = build_parser()
    try:
        _apply_config_file(subcommands, argv)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except FileNotFoundError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except (ValueError, RuntimeError, TypeError) as exc:
        return _fail("processing", str(exc), EXIT_PROCESSING)


if __name__ == "__main__":
    sys.exit(main())
