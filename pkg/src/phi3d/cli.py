"""``phi3d`` command line: one experiment per invocation, CSV + manifest + SVG out.

Exit codes: 0 success, 2 invalid configuration, 3 at least one failing check row.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import fields
from fractions import Fraction

from . import __version__
from .experiments import EXPERIMENTS, PRESETS, RunConfig, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3

# config keys that hold lists, and the element type
_LIST_KEYS = {"N_list": int, "M_list": int, "sigma_list": float, "p_list": float,
              "expect_stable": float, "expect_divergent": float}
_ALIASES = {"N": "N_list", "M": "M_list", "sigma": "sigma_list", "p": "p_list"}
_SCALARS = {f.name: f.type for f in fields(RunConfig)}


def parse_number(text: str, kind=float):
    text = text.strip()
    if kind is int:
        return int(text)
    return float(Fraction(text)) if "/" in text else float(text)


def parse_list(text: str, kind=int) -> list:
    """``a,b,c`` or ``a..b`` (doubling from ``a`` up to ``b``), mixed freely."""
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if ".." in item:
            lo_s, hi_s = item.split("..", 1)
            lo, hi = parse_number(lo_s, kind), parse_number(hi_s, kind)
            if lo <= 0 or hi < lo:
                raise ValueError(f"bad range {item!r}")
            v = lo
            while v <= hi * (1 + 1e-12):
                out.append(v)
                v = v * 2
        else:
            out.append(parse_number(item, kind))
    if not out:
        raise ValueError(f"empty list {text!r}")
    return out


def _canonical(key: str) -> str:
    key = key.strip().replace("-", "_")
    return _ALIASES.get(key, key)


def _coerce(key: str, value: str):
    if key in _LIST_KEYS:
        return parse_list(value, _LIST_KEYS[key])
    typ = str(_SCALARS.get(key, "str"))
    if key in ("d", "threads", "q", "time_steps", "n_samples", "seed"):
        return int(float(value)) if key != "seed" else int(value)
    if key == "plot":
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if "float" in typ:
        return parse_number(value)
    return str(value).strip()


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            key = _canonical(key)
            if key not in _SCALARS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phi3d", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", help="flat key = value file")
    ap.add_argument("--d", type=str)
    ap.add_argument("--alpha", type=str, help="decimal or fraction, e.g. 1/3")
    ap.add_argument("--N", dest="N_list", help="list, e.g. 64..4096 or 16,64")
    ap.add_argument("--M", dest="M_list")
    ap.add_argument("--sigma", dest="sigma_list")
    ap.add_argument("--n-samples")
    ap.add_argument("--seed")
    ap.add_argument("--output-dir")
    ap.add_argument("--estimator", choices=["plain", "median_of_means"])
    ap.add_argument("--threads")
    ap.add_argument("--A")
    ap.add_argument("--gamma")
    ap.add_argument("--delta")
    ap.add_argument("--q")
    ap.add_argument("--eps")
    ap.add_argument("--time-steps")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--a")
    ap.add_argument("--b")
    ap.add_argument("--lam")
    ap.add_argument("--p", dest="p_list")
    ap.add_argument("--expect-stable")
    ap.add_argument("--expect-divergent")
    ap.add_argument("--no-plot", action="store_true")
    ap.add_argument("--save-sample", help="write one Gaussian sample path checkpoint here")
    return ap


def make_config(argv=None) -> RunConfig:
    """Defaults < config file < ``PHI3D_SEED`` < explicit flags."""
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(read_config(args.config))
    if os.environ.get("PHI3D_SEED"):
        values["seed"] = int(os.environ["PHI3D_SEED"])
    for key, raw in vars(args).items():
        if key in ("experiment", "config", "no_plot") or raw is None:
            continue
        key = _canonical(key)
        values[key] = raw if key == "save_sample" else _coerce(key, raw)
    if args.no_plot:
        values["plot"] = False
    if args.preset:
        # a preset fixes the regime unless the flags say otherwise
        d, alpha, _, _ = PRESETS[args.preset]
        if args.d is None:
            values["d"] = d
        if args.alpha is None:
            values["alpha"] = alpha
    cfg = RunConfig(experiment=args.experiment, **values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    if not cfg.alpha > 0:
        raise ValueError("alpha must be positive")
    if cfg.experiment in ("singularity", "drift-scan") and abs(cfg.d - 3 * cfg.alpha) > 1e-6:
        raise ValueError(f"{cfg.experiment} requires d = 3 alpha")
    if cfg.n_samples is not None and cfg.n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    if cfg.threads < 1:
        raise ValueError("threads must be >= 1")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(table, path: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(row.get(c, "")) for c in table.columns])


def write_manifest(cfg: RunConfig, table, path: str, wall: float):
    import numpy
    import scipy

    lines = [f"experiment = {cfg.experiment}", f"code_version = {__version__}",
             f"numpy_version = {numpy.__version__}", f"scipy_version = {scipy.__version__}",
             f"master_seed = {cfg.seed}"]
    lines += [f"derived_seed.{k} = {v}" for k, v in sorted(table.seeds.items())]
    for f in fields(RunConfig):
        if f.name in ("experiment", "seed"):
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, list):
            v = ",".join(_fmt(x) for x in v)
        lines.append(f"config.{f.name} = {_fmt(v)}")
    lines.append(f"rows = {len(table.rows)}")
    lines.append(f"failed_rows = {sum(r.get('status') == 'fail' for r in table.rows)}")
    lines.append(f"wall_time_s = {wall:.3f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _save_sample(cfg: RunConfig, path: str):
    from .gff import sample_Y
    from .lattice import FrequencyLattice

    N = (cfg.N_list or cfg.M_list or [16])[-1]
    p = sample_Y(FrequencyLattice(cfg.d, int(N), cfg.alpha), [0.5, 1.0], cfg.seed, 1)
    with open(path, "wb") as fh:
        fh.write(p.to_bytes())


def run(cfg: RunConfig) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out!r} is not writable")
    t0 = time.perf_counter()
    table = run_experiment(cfg)
    wall = time.perf_counter() - t0
    base = os.path.join(out, cfg.experiment)
    write_csv(table, base + ".csv")
    write_manifest(cfg, table, base + ".manifest.txt", wall)
    if cfg.plot:
        from .plotting import plot_table

        plot_table(table, base + ".svg")
    if cfg.save_sample:
        _save_sample(cfg, cfg.save_sample)
    return EXIT_FAILED if table.failed else EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except (ValueError, OSError) as exc:
        print(f"phi3d: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        code = run(cfg)
    except (ValueError, OSError) as exc:
        print(f"phi3d: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status = {EXIT_OK: "all checks passed", EXIT_FAILED: "some checks failed"}[code]
    print(f"phi3d {cfg.experiment}: {status}; wrote {os.path.join(cfg.output_dir, cfg.experiment)}.csv")
    return code


if __name__ == "__main__":
    sys.exit(main())
