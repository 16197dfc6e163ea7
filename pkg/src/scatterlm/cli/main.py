"""``scatterlm`` command line: train, simulate, fit, bench."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..forward.mueller import read_signature, write_signature
from ..forward.simulate import ForwardModel
from ..lm_solver import lm_fit, write_fit_report
from ..pipeline import (
    ClassifierBundle,
    SimulationCache,
    kernel_sweep,
    reconstruct,
    run_benchmark,
    train_classifiers,
)
from ..pipeline.workers import WORKERS_ENV
from ..signature import inject_errors
from ..svm import write_training_set
from ..svm.io import FORMAT_VERSION
from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("scatterlm")

STUDIES = ("svm_vs_lm", "kernel_sweep", "noise_sweep", "training_size")


class UsageError(ValueError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(path: Path, command: str, cfg: RunConfig, artifacts, extra=None) -> Path:
    """Everything needed to reproduce the run; no timestamps, so reruns match byte for byte."""
    path = Path(path)
    body = {
        "format_version": FORMAT_VERSION,
        "scatterlm_version": __version__,
        "command": command,
        "config_hash": cfg.hash(),
        "config": cfg.resolved(),
        "seeds": cfg.seeds,
        "artifacts": {str(Path(a).name): _sha256(Path(a)) for a in artifacts},
    }
    if extra:
        body.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")
    return path


def _workers(args, cfg: RunConfig) -> int:
    if getattr(args, "workers", None):
        return int(args.workers)
    if os.environ.get(WORKERS_ENV):
        return int(os.environ[WORKERS_ENV])
    return int(cfg.workers or 1)


def _kv(items, names) -> dict:
    out = {}
    for it in items or ():
        k, sep, v = it.partition("=")
        if not sep:
            raise UsageError(f"expected NAME=VALUE, got {it!r}")
        if k not in names:
            raise UsageError(f"unknown parameter {k!r}; expected one of {names}")
        out[k] = float(v)
    return out


def _outdir(args, cfg) -> Path:
    d = Path(args.output) if getattr(args, "output", None) else cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_train(args, cfg: RunConfig) -> int:
    structure, space, inc = cfg.structure(), cfg.space(), cfg.incidence()
    out = _outdir(args, cfg)
    workers = _workers(args, cfg)
    cache = SimulationCache(ForwardModel(structure, inc, cfg.materials()), workers)
    sets: dict = {}
    bundle = train_classifiers(space, structure, inc, cfg.kernel(), cfg.k_points, cfg.svm_config(),
                               int(cfg.seeds["training"]), cache=cache, training_sets=sets)
    artifacts = bundle.save(out / "bundle")
    if args.write_training_sets:
        tdir = out / "training"
        tdir.mkdir(exist_ok=True)
        for name, ts in sets.items():
            p = tdir / f"{name}.train.txt"
            write_training_set(ts, p)
            artifacts.append(p)
    write_manifest(out / "bundle" / "manifest.json", "train", cfg, artifacts)
    print(out / "bundle")
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    structure, inc = cfg.structure(), cfg.incidence()
    names = list(structure.parameters)
    params = _kv(args.param, names)
    if args.values:
        if len(args.values) != len(names):
            raise UsageError(f"expected {len(names)} values for {names}")
        params.update(dict(zip(names, (float(v) for v in args.values))))
    missing = [n for n in names if n not in params]
    if missing:
        raise UsageError(f"missing parameter values for {missing}")
    if cfg.data.get("parameters") and not args.allow_outside_range:
        for n, (lo, hi) in cfg.space().bounds.items():
            if not lo <= params[n] <= hi:
                raise ValueError(f"{n}={params[n]} outside rough range [{lo}, {hi}]")
    structure.bind(params)
    sig = ForwardModel(structure, inc, cfg.materials()).signature(params)
    extra = {"params": params}
    if args.noise:
        err = cfg.error_spec()
        if args.seed is not None:
            err = err.with_seed(args.seed)
        sig = inject_errors(sig, err)
        extra["noise"] = {"random_magnitude": err.random_magnitude,
                          "offset_magnitude": err.offset_magnitude, "seed": err.seed}
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_signature(sig, out)
    write_manifest(out.with_name(out.name + ".manifest.json"), "simulate", cfg, [out], extra)
    print(out)
    return 0


def cmd_fit(args, cfg: RunConfig) -> int:
    structure, space, fit_inc = cfg.structure(), cfg.space(), cfg.fit_incidence()
    measured = read_signature(args.signature)
    model = ForwardModel(structure, fit_inc, cfg.materials())
    extra = {"method": args.method, "signature": str(args.signature)}
    if args.method == "svm_lm":
        if not args.bundle:
            raise UsageError("--bundle is required for method svm_lm")
        bundle = ClassifierBundle.load(args.bundle)
        rec = reconstruct(measured, structure, space, bundle, fit_inc, cfg.lm_config(), model=model)
        fit = rec.fit
        for m in rec.mapping:
            extra[f"subrange {m.name}"] = f"{m.subrange[0]:.17g} {m.subrange[1]:.17g}"
        extra["init"] = " ".join(f"{m.name}={m.median:.17g}" for m in rec.mapping)
        extra["svm_time_s"] = f"{rec.svm_time:.6f}"
    else:
        init = dict(space.medians)
        init.update(_kv(args.init, space.names))
        fit = lm_fit(measured, structure, init, space.bounds, fit_inc, cfg.lm_config(), model=model)
        extra["init"] = " ".join(f"{k}={v:.17g}" for k, v in init.items())
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_fit_report(fit, out, extra)
    write_manifest(out.with_name(out.name + ".manifest.json"), "fit", cfg, [out], {"method": args.method})
    print(out)
    return 0


def cmd_bench(args, cfg: RunConfig) -> int:
    structure, space, inc = cfg.structure(), cfg.space(), cfg.incidence()
    out = _outdir(args, cfg)
    workers = _workers(args, cfg)
    b = cfg.data["bench"]
    if args.study == "svm_vs_lm":
        methods = list(b["methods"])
        bundle = None
        if "svm_lm" in methods:
            if args.bundle:
                bundle = ClassifierBundle.load(args.bundle)
                bundle.check_structure(structure)
            else:
                bundle = train_classifiers(space, structure, inc, cfg.kernel(), cfg.k_points, cfg.svm_config(),
                                           int(cfg.seeds["training"]), materials=cfg.materials(), workers=workers)
        n = int(args.n_cases if args.n_cases is not None else b["n_cases"])
        report = run_benchmark(space, structure, inc, bundle, n, cfg.error_spec(), methods,
                               int(cfg.seeds["benchmark"]), cfg.lm_config(), cfg.fit_wavelengths(),
                               b.get("lm_only_init", "median"), cfg.materials(), workers)
        artifacts = report.write(out, args.study)
    else:
        grid = cfg.sweep_grid(args.study)
        cache = SimulationCache(ForwardModel(structure, inc, cfg.materials()), workers)
        table = kernel_sweep(space, structure, inc, grid, int(b.get("param_index", 0)), int(b["n_test"]),
                             int(cfg.seeds["training"]), cfg.svm_config(), cache=cache)
        artifacts = table.write(out, args.study)
    write_manifest(out / f"{args.study}.manifest.json", f"bench {args.study}", cfg, artifacts)
    for a in artifacts:
        print(a)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scatterlm", description=__doc__)
    p.add_argument("--version", action="version", version=f"scatterlm {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="YAML run config (path or packaged name)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. svm.C=100")

    t = sub.add_parser("train", help="synthesize training sets and train the classifier bundle")
    common(t)
    t.add_argument("-o", "--output", help="output directory (default: config output_dir)")
    t.add_argument("--write-training-sets", action="store_true")
    t.add_argument("--workers", type=int)

    s = sub.add_parser("simulate", help="write the signature of one parameter set")
    common(s)
    s.add_argument("values", nargs="*", help="parameter values in structure order")
    s.add_argument("-p", "--param", action="append", metavar="NAME=VALUE")
    s.add_argument("-o", "--output", required=True, help="signature file to write")
    s.add_argument("--noise", action="store_true", help="inject the configured measurement errors")
    s.add_argument("--seed", type=int, help="noise seed (default: seeds.noise)")
    s.add_argument("--allow-outside-range", action="store_true")

    f = sub.add_parser("fit", help="extract parameters from a signature file")
    common(f)
    f.add_argument("signature")
    f.add_argument("--bundle", help="trained bundle directory (svm_lm)")
    f.add_argument("--method", choices=("svm_lm", "lm_only"), default="svm_lm")
    f.add_argument("--init", action="append", metavar="NAME=VALUE", help="lm_only initial value")
    f.add_argument("-o", "--output", required=True, help="report file to write")

    b = sub.add_parser("bench", help="run a benchmark study")
    common(b)
    b.add_argument("--study", required=True, choices=STUDIES)
    b.add_argument("--bundle", help="trained bundle directory (svm_vs_lm; trained on the fly if absent)")
    b.add_argument("--n-cases", type=int)
    b.add_argument("-o", "--output", help="output directory (default: config output_dir)")
    b.add_argument("--workers", type=int)
    return p


COMMANDS = {"train": cmd_train, "simulate": cmd_simulate, "fit": cmd_fit, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set).validate()
        return COMMANDS[args.command](args, cfg)
    except KeyboardInterrupt:
        print("error: Interrupted: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # single-line, machine-parseable failure report
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        if args.verbose:
            raise
        return 1
