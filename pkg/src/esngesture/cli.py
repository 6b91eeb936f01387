"""Command-line interface.

Every subcommand exits 0 on success and prints a one-line diagnostic and
exits nonzero on failure: 2 for usage, config and dataset problems, 1 for
anything else. Output files are written to a temporary name and renamed into
place, so a failed run leaves nothing half-written.

Configuration precedence is CLI flags > config file > built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import datasets
from .config import ARCHITECTURES, PRESETS, PROTOCOLS, READOUTS, PipelineConfig, load_config
from .errors import ConfigError, DatasetError, ESNGestureError
from .evaluation import plan_split, run_eval, time_pipeline
from .features import RdmSequence, FeatureMap, MapKind
from .pipeline import build_encoder, fit, sample_maps
from .reservoir import SOLI_MULTI, SOLI_SINGLE

log = logging.getLogger("esngesture")

__all__ = ["main", "build_parser", "effective_config"]


class UsageError(ESNGestureError):
    """Bad command-line input that argparse cannot catch by itself."""


# -- config assembly ---------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args) -> dict:
    d = {}
    for key in ("preset", "dataset", "output", "seed", "architecture", "readout", "protocol"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        if key.startswith("reservoir."):
            d.setdefault("reservoir", {})[key.split(".", 1)[1]] = _parse_value(value)
        else:
            d[key] = _parse_value(value)
    return d


def effective_config(args) -> PipelineConfig:
    """Defaults, then the config file, then command-line overrides."""
    base = {}
    if getattr(args, "config", None):
        base = json.loads(load_config(args.config).dumps())
    over = _overrides(args)
    if "preset" in over:
        # a preset on the command line replaces the base; file keys are dropped
        base = {}
    if "reservoir" in over and "reservoir" in base:
        over["reservoir"] = {**base["reservoir"], **over["reservoir"]}
    try:
        return PipelineConfig.from_dict({**base, **over})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _threads(args, cfg: PipelineConfig | None = None) -> int:
    if args.threads is not None:
        return args.threads
    if cfg is not None and cfg.threads:
        return int(cfg.threads)
    return os.cpu_count() or 1


def _dataset(cfg: PipelineConfig) -> Path:
    if not cfg.dataset:
        raise DatasetError("no dataset given (use --dataset or the config 'dataset' key)")
    path = Path(cfg.dataset)
    if not path.exists():
        raise DatasetError(f"dataset not found: {path}")
    return path


def _load(cfg: PipelineConfig):
    path = _dataset(cfg)
    classes = datasets.load_manifest(path).classes
    return datasets.load(path, power=cfg.power, as_maps=True), list(classes)


def _write(path, text: str | bytes) -> None:
    datasets.atomic_write(path, text.encode() if isinstance(text, str) else text)


def _maybe_dump_config(args, cfg: PipelineConfig) -> None:
    if getattr(args, "dump_config", None):
        if args.dump_config == "-":
            sys.stdout.write(cfg.dumps())
        else:
            _write(args.dump_config, cfg.dumps())


def _fresh_dir(dest: Path, force: bool):
    """Context for building a directory atomically next to ``dest``."""
    if dest.exists() and (not dest.is_dir() or any(dest.iterdir())) and not force:
        raise UsageError(f"{dest} exists and is not empty (use --force to replace it)")
    dest.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{dest.name}.", dir=dest.parent))


def _commit_dir(tmp: Path, dest: Path) -> None:
    if dest.exists():
        shutil.rmtree(dest) if dest.is_dir() else dest.unlink()
    os.replace(tmp, dest)


# -- subcommands -------------------------------------------------------------

def cmd_convert(args) -> int:
    from .external import convert_external

    dest = Path(args.dest)
    if not Path(args.source).is_dir():
        raise DatasetError(f"source directory not found: {args.source}")
    subject_map = None
    if args.subject_map:
        subject_map = json.loads(Path(args.subject_map).read_text())
    tmp = _fresh_dir(dest, args.force)
    try:
        _, warnings = convert_external(args.kind, args.source, tmp, subject_map)
        _commit_dir(tmp, dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    n = len(datasets.load_manifest(dest).samples)
    print(f"converted {n} {args.kind} samples to {dest}")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    from .synth import SynthSpec, synth_iter

    spec = SynthSpec(classes=args.classes, samples_per_class=args.samples_per_class,
                     subjects=args.subjects, sessions=args.sessions, min_steps=args.min_steps,
                     max_steps=args.max_steps, noise=args.noise, seed=args.seed,
                     antennas=args.antennas, range_bins=args.range_bins,
                     doppler_bins=args.doppler_bins)
    dest = Path(args.dest)
    tmp = _fresh_dir(dest, args.force)
    try:
        datasets.save(synth_iter(spec), tmp, "synthetic", spec.class_names)
        _commit_dir(tmp, dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(f"wrote {spec.classes * spec.samples_per_class} synthetic samples to {dest}")
    return 0


def cmd_train(args) -> int:
    cfg = effective_config(args)
    _maybe_dump_config(args, cfg)
    records, classes = _load(cfg)
    threads = _threads(args, cfg)
    t0 = time.perf_counter()
    with threadpool_limits(threads):
        model, states = fit(cfg, records, classes, threads)
    seconds = time.perf_counter() - t0
    y = np.array([classes.index(r.label) for r in records])
    acc = float(np.mean(np.asarray(model.readout.predict(states)) == y))
    from .model_io import dumps_model

    out = cfg.output or "model.esng"
    _write(out, dumps_model(model))
    print(f"{cfg.name}: train accuracy {100 * acc:.2f}% on {len(records)} samples, "
          f"feature dim {model.encoder.state_dim}, train time {seconds:.2f} s -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = effective_config(args)
    _maybe_dump_config(args, cfg)
    records, classes = _load(cfg)
    threads = _threads(args, cfg)
    plan = plan_split(records, cfg.protocol, cfg.seed, cfg.folds)
    with threadpool_limits(threads):
        report = run_eval(records, cfg, plan, classes, threads=threads)
    out = Path(cfg.output or "evaluation")
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "report.json", report.dumps())
    _write(out / "timings.json", json.dumps(report.timings(), indent=1) + "\n")
    _write(out / "confusion.csv", report.confusion_csv())
    # the output directory is implied by where the file lives
    _write(out / "config.json", cfg.with_(output=None).dumps())
    print(f"{cfg.name} {cfg.protocol}: accuracy {100 * report.mean_accuracy:.2f}% "
          f"+/- {100 * report.std_accuracy:.2f} over {len(report.folds)} fold(s) -> {out}")
    return 0


def _read_sample(path: Path, power: bool):
    raw = datasets.read_payload(path)
    if raw.ndim == 4:
        return RdmSequence.from_array(raw, power=power)
    if raw.ndim == 2:
        values = np.abs(raw) if (np.iscomplexobj(raw) or power) else raw
        if power:
            values = values * values
        return [FeatureMap(np.asarray(values, dtype=np.float64), MapKind.MDM)]
    raise DatasetError(f"{path}: payload has {raw.ndim} dims, expected 4 (RDM) or 2 (MDM)")


def _samples(paths, power: bool):
    """Yield ``(id, payload)`` from payload files and dataset directories/manifests."""
    for p in map(Path, paths):
        if p.is_dir() or p.suffix == ".json":
            for r in datasets.load(p, power=power, as_maps=True):
                yield r.id, r.payload
        elif p.is_file():
            yield p.stem, _read_sample(p, power)
        else:
            raise DatasetError(f"sample file not found: {p}")


def cmd_predict(args) -> int:
    from .model_io import load_model

    if not Path(args.model).is_file():
        raise DatasetError(f"model file not found: {args.model}")
    model = load_model(args.model)
    items = list(_samples(args.samples, model.config.power))
    threads = _threads(args)
    with threadpool_limits(threads):
        states = model.encoder.encode_many([p for _, p in items], threads)
        scores = np.atleast_2d(model.readout.decision(states))
        pred = np.asarray(model.readout.predict(states))
    lines = []
    for (sid, _), k, row in zip(items, pred, scores):
        lines.append(f"{sid}\t{model.classes[int(k)]}\t" + " ".join(f"{v:.6g}" for v in row))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def _bench_configs(cfg: PipelineConfig, architectures, readouts):
    out = []
    for arch in architectures:
        if arch == cfg.architecture:
            spec = cfg.reservoir
        else:
            spec = SOLI_SINGLE if arch == "single" else SOLI_MULTI
        for ro in readouts:
            out.append(cfg.with_(architecture=arch, reservoir=spec, readout=ro))
    return out


def cmd_bench(args) -> int:
    cfg = effective_config(args)
    _maybe_dump_config(args, cfg)
    records, classes = _load(cfg)
    threads = _threads(args, cfg)
    rows = []
    example = sample_maps(records[0], cfg.normalization)
    with threadpool_limits(threads):
        for c in _bench_configs(cfg, _csv(args.architectures, ARCHITECTURES),
                                _csv(args.readouts, READOUTS)):
            dim = build_encoder(c, example).state_dim
            train_s, infer_ms = time_pipeline(records, c, args.repetitions, c.seed, classes)
            rows.append((c.name, dim, train_s, infer_ms))
    head = f"{'model':<10} {'feature_dim':>11} {'train_s':>10} {'infer_ms':>10}"
    lines = [head, "-" * len(head)]
    lines += [f"{n:<10} {d:>11d} {t:>10.3f} {i:>10.3f}" for n, d, t, i in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.output:
        _write(cfg.output, text)
    return 0


def _csv(text, allowed):
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in allowed]
    if bad or not items:
        raise UsageError(f"choose from {', '.join(allowed)}; got {text!r}")
    return items


def _parse_grid(text: str) -> dict:
    """``name=v1,v2;name=v1`` or a JSON object (inline or in a file)."""
    p = Path(text)
    if p.is_file():
        text = p.read_text()
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"grid: line {exc.lineno}: {exc.msg}") from None
    grid = {}
    for part in filter(None, (s.strip() for s in text.split(";"))):
        key, sep, values = part.partition("=")
        if not sep:
            raise UsageError(f"grid axis must be name=v1,v2, got {part!r}")
        grid[key.strip()] = [json.loads(v) for v in values.split(",")]
    return grid


def cmd_tune(args) -> int:
    from .hpo import default_space, grid_search, random_search

    cfg = effective_config(args)
    _maybe_dump_config(args, cfg)
    records, classes = _load(cfg)
    if not args.all_data:
        # validation folds come from the training half only
        train_ids = set(plan_split(records, "holdout_50_50", cfg.seed).folds[0].train)
        records = [r for r in records if r.id in train_ids]

    def progress(t):
        status = f"error {t.error}" if t.error else f"objective {t.objective:.4f}"
        print(f"trial {t.index}: {json.dumps(t.params, sort_keys=True)} {status}", file=sys.stderr)

    threads = _threads(args, cfg)
    with threadpool_limits(threads):
        if args.grid:
            result = grid_search(_parse_grid(args.grid), records, cfg, cfg.seed, args.folds,
                                 classes, progress)
        else:
            result = random_search(default_space(cfg), args.budget, records, cfg, cfg.seed,
                                   args.folds, classes, progress)
    out = cfg.output or "tune_log.json"
    _write(out, result.dumps())
    best = result.best
    print(f"best trial {best.index}: objective {best.objective:.4f} "
          f"params {json.dumps(best.params, sort_keys=True)} -> {out}")
    return 0


def _map_index(spec: str, maps) -> int:
    if spec.isdigit():
        k = int(spec)
    else:
        kinds = [f"{m.kind.value.lower()}{'' if m.antenna is None else m.antenna}" for m in maps]
        if spec.lower() not in kinds:
            raise UsageError(f"no map {spec!r}; available: {', '.join(kinds)}")
        k = kinds.index(spec.lower())
    if not 0 <= k < len(maps):
        raise UsageError(f"map index {k} out of range 0..{len(maps) - 1}")
    return k


def cmd_inspect(args) -> int:
    src = Path(args.source)
    if src.is_dir() or src.suffix == ".json":
        if not args.id:
            raise UsageError("--id is required when inspecting a dataset")
        found = [p for sid, p in _samples([src], args.power) if sid == args.id]
        if not found:
            raise DatasetError(f"sample {args.id!r} not in {src}")
        payload = found[0]
    elif src.is_file():
        payload = _read_sample(src, args.power)
    else:
        raise DatasetError(f"sample file not found: {src}")
    maps = sample_maps(payload, args.normalization)
    if args.list:
        for i, m in enumerate(maps):
            ant = "" if m.antenna is None else f" antenna {m.antenna}"
            print(f"{i}\t{m.kind.value}{ant}\t{m.steps}x{m.channels}")
        return 0
    m = maps[_map_index(args.map, maps)]
    lines = [",".join(f"bin{j}" for j in range(m.channels))]
    lines += [",".join(f"{v:.9g}" for v in row) for row in m.values]
    text = "\n".join(lines) + "\n"
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


# -- parser ------------------------------------------------------------------

def _config_flags(p):
    p.add_argument("--config", help="JSON config file (keys as in PipelineConfig)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--dataset", help="dataset directory or manifest.json")
    p.add_argument("--output", help="output path")
    p.add_argument("--seed", type=int, help="base seed for reservoirs and splits")
    p.add_argument("--architecture", choices=ARCHITECTURES)
    p.add_argument("--readout", choices=READOUTS)
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key, e.g. ridge_lambda=0.5 or reservoir.nodes=100")
    p.add_argument("--dump-config", metavar="PATH",
                   help="write the effective config as JSON ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esngesture",
                                 description="Echo state networks for radar gesture recognition.")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker and BLAS threads (default: available cores; 1 is bit-reproducible)")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("convert", help="convert a raw Soli or Dop-NET release")
    p.add_argument("kind", choices=("soli", "dopnet"))
    p.add_argument("source", help="directory with the raw release files")
    p.add_argument("dest", help="output dataset directory")
    p.add_argument("--subject-map", help="JSON object mapping Soli session ids to subject ids")
    p.add_argument("--force", action="store_true", help="replace an existing output directory")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("synth", help="generate a synthetic RDM dataset")
    p.add_argument("dest", help="output dataset directory")
    p.add_argument("--classes", type=int, default=11)
    p.add_argument("--samples-per-class", type=int, default=250)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--sessions", type=int, default=5)
    p.add_argument("--min-steps", type=int, default=28)
    p.add_argument("--max-steps", type=int, default=145)
    p.add_argument("--noise", type=float, default=1.0, help="half-normal noise level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--antennas", type=int, default=4)
    p.add_argument("--range-bins", type=int, default=32)
    p.add_argument("--doppler-bins", type=int, default=32)
    p.add_argument("--force", action="store_true", help="replace an existing output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write it to --output")
    _config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the configured protocol; writes report files")
    _config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify samples with a trained model")
    p.add_argument("model", help="model file written by 'train'")
    p.add_argument("samples", nargs="+", help="payload .bin files or dataset directories")
    p.add_argument("--output", help="write predictions here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="time training and inference across models")
    _config_flags(p)
    p.add_argument("--architectures", default="single,multi")
    p.add_argument("--readouts", default="rr_l,rr_n")
    p.add_argument("--repetitions", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tune", help="random or grid hyperparameter search")
    _config_flags(p)
    p.add_argument("--budget", type=int, default=20, help="random-search trials")
    p.add_argument("--grid", help="grid as 'name=v1,v2;name=v1' or JSON (inline or file)")
    p.add_argument("--folds", type=int, default=3, help="validation folds per trial")
    p.add_argument("--all-data", action="store_true",
                   help="search on the whole dataset instead of the holdout training half")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("inspect", help="dump a feature map as CSV (rows = time, cols = bins)")
    p.add_argument("source", help="payload .bin file, or dataset directory with --id")
    p.add_argument("--id", help="sample id inside a dataset")
    p.add_argument("--map", default="0", help="map index or name such as rtm0, dtm2, mdm")
    p.add_argument("--normalization", default="none",
                   choices=("none", "per-sample-max", "log-then-per-sample-max"))
    p.add_argument("--power", action="store_true", help="use squared magnitudes")
    p.add_argument("--list", action="store_true", help="list the available maps")
    p.add_argument("--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("esngesture: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, ConfigError, DatasetError) as exc:
        print(f"esngesture: error: {exc}", file=sys.stderr)
        return 2
    except (ESNGestureError, ValueError, ArithmeticError, OSError) as exc:
        print(f"esngesture: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
