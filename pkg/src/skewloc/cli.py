"""Command-line interface: ``skewloc {constants,simulate,estimate,verify,check}``.

Exit codes: 0 success, 1 I/O or usage failure, 2 configuration error,
3 numerical failure, 4 failed acceptance check (``verify --strict``) or
failed reproducibility/checksum check.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import closed_form_constants, constants_for
from .config import ConfigBundle, format_config, parse_config, with_seed
from .errors import ConfigError, ExperimentError, NumericalError, SamplerError, SkewlocError
from .harness import (
    run_clt_experiment,
    run_consistency_experiment,
    run_rate_experiment,
    run_sampler_checks,
)
from .persist import (
    RunManifest,
    check_manifest,
    dumps_json,
    read_path,
    write_json,
    write_path_binary,
    write_path_csv,
    write_step_function_csv,
    write_table_csv,
)
from .sampler import RandomStream, simulate_path
from .statistics import crossing_estimator, weighted_estimator

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3, 4

SEED_ENV = "SKEWLOC_SEED"

PRESETS = {
    "bm-weighted-n4096": (
        "clt",
        "[process] kind=skew beta=0 r=0\n[kernel] estimator=weighted\n[experiment] n=4096 paths=2000 seed=1\n",
    ),
    "obm12-weighted-n4096": (
        "clt",
        "[process] kind=oscillating sigma=1,2 r=0\n[kernel] estimator=weighted\n[experiment] n=4096 paths=2000 seed=1\n",
    ),
    "sbm05-weighted-n4096": (
        "clt",
        "[process] kind=skew beta=0.5 r=0\n[kernel] estimator=weighted\n[experiment] n=4096 paths=2000 seed=1\n",
    ),
    "obm12-weighted-rate": (
        "rate",
        "[process] kind=oscillating sigma=1,2 r=0\n[kernel] estimator=weighted\n"
        "[experiment] n=2^8,2^9,2^10,2^11,2^12,2^13,2^14,2^15,2^16 paths=1000 seed=1\n",
    ),
    "sbm05-crossing-consistency": (
        "consistency",
        "[process] kind=skew beta=0.5 r=0\n[kernel] estimator=crossing\n"
        "[experiment] n=2^8,2^10,2^12 paths=500 seed=1\n",
    ),
    "obm12-crossing-consistency": (
        "consistency",
        "[process] kind=oscillating sigma=1,2 r=0\n[kernel] estimator=crossing\n"
        "[experiment] n=2^8,2^10,2^12 paths=500 seed=1\n",
    ),
    "sampler": ("sampler", "[process] kind=skew beta=0 r=0\n[experiment] seed=1\n"),
}

# Acceptance thresholds applied by ``verify``.
CLT_MAX_KS = 0.06
CLT_VARIANCE_RANGE = (0.85, 1.15)
RATE_SLOPE_RANGE = (-0.35, -0.15)
SAMPLER_MAX_KS = 0.005
SAMPLER_MIN_P = 0.01
SAMPLER_STEP_DRAWS = 200_000
SAMPLER_JOINT_DRAWS = 1_000_000


class CheckFailed(SkewlocError):
    """Raised when an acceptance or reproducibility check fails."""


# ---------------------------------------------------------------------------
# Shared option handling
# ---------------------------------------------------------------------------


def _add_process_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("process")
    g.add_argument("--config", type=Path, help="configuration file (see docs/config.md)")
    g.add_argument("--process", choices=["obm", "sbm", "oscillating", "skew"], help="process family")
    g.add_argument("--sigma", help="oscillating volatilities 'sigma_minus,sigma_plus'")
    g.add_argument("--beta", type=float, help="skewness parameter in (-1, 1)")
    g.add_argument("--r", type=float, help="threshold (default 0)")


def _process_overrides(args) -> str:
    """Build ``[process]`` assignments from command-line flags."""
    parts = []
    if args.process:
        parts.append(f"kind={args.process}")
    if args.sigma is not None:
        parts.append(f"sigma={args.sigma}")
    if args.beta is not None:
        parts.append(f"beta={args.beta!r}")
    if args.r is not None:
        parts.append(f"r={args.r!r}")
    return " ".join(parts)


def _merge(base: str, section: str, assignments: str) -> str:
    """Append assignments to a section, dropping keys they replace."""
    if not assignments:
        return base
    from .config import tokenize

    new_keys = {tok.split("=", 1)[0].strip() for tok in _split_assignments(assignments)}
    if section == "process" and "kind" in new_keys:
        # A new family invalidates family-specific keys from the base.
        new_keys |= {"beta", "sigma", "sigma_minus", "sigma_plus"}
    kept = []
    for sec, key, raw, _ in tokenize(base):
        if sec == section and key in new_keys:
            continue
        kept.append(f"[{sec}] {key} = {raw}")
    kept.append(f"[{section}] {assignments}")
    return "\n".join(kept) + "\n"


def _split_assignments(text: str):
    import re

    return [m.group(0) for m in re.finditer(r"[A-Za-z_]\w*\s*=\s*\S+", text)]


def _read_config(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _load_bundle(args, base_text: str | None = None) -> tuple[ConfigBundle, str]:
    if getattr(args, "config", None) is not None:
        text = _read_config(args.config)
    elif base_text is not None:
        text = base_text
    else:
        text = "[process] kind=skew beta=0 r=0\n"
    if hasattr(args, "process"):
        text = _merge(text, "process", _process_overrides(args))
    return parse_config(text), text


def _resolve_seed(args, config_seed: int | None) -> int:
    """``--seed`` beats the environment variable, which beats the config file."""
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return int(config_seed) if config_seed is not None else 1


def _prepare_out(path: Path | None) -> Path | None:
    if path is None:
        return None
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(command: str, argv, out: Path, files, config: dict, seed, started: float, extra=None, check=False) -> None:
    """Write the manifest; with ``check`` compare against the previous one first."""
    previous = None
    mpath = out / "manifest.json"
    if check:
        if not mpath.exists():
            raise CheckFailed(f"--check: no previous manifest in {out}")
        previous = RunManifest.read(mpath)
    manifest = RunManifest(command, config, seed, __version__, round(time.perf_counter() - started, 3),
                           argv=list(argv), extra=extra or {})
    for f in files:
        manifest.add_file(f, out)
    if previous is not None:
        # The previous manifest is kept on failure so the reference survives.
        diffs = [name for name, digest in manifest.files.items() if previous.files.get(name) != digest]
        if diffs:
            raise CheckFailed(f"--check: outputs differ from the previous run: {', '.join(sorted(diffs))}")
        print(f"check: {len(manifest.files)} files reproduced byte-identically", file=sys.stderr)
    manifest.write(out)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


_CLOSED_FORM_FAMILY = {"h1x2": "weighted", "h0": "crossing"}


def cmd_constants(args, argv) -> int:
    bundle, _ = _load_bundle(args)
    params = bundle.params
    kernel = args.kernel
    family = _CLOSED_FORM_FAMILY.get(kernel)
    if (args.closed_form or args.compare) and family is None:
        raise ConfigError(f"no closed-form constants for kernel {kernel!r} (available for h0, h1x2)")
    out: dict = {"schema": 1, "process": params.describe(), "kernel": kernel}
    if args.closed_form or args.compare:
        kind = f"{family}_{'sbm' if params.is_skew else 'obm'}"
        cf = closed_form_constants(kind, params, bundle.series, bundle.quad)
        out["closed_form"] = {
            "kind": cf.kind,
            "limit_constant": cf.limit_constant,
            "clt_constant": cf.clt_constant,
            "clt_source": cf.source,
        }
    if not args.closed_form or args.compare:
        try:
            rep = constants_for(params, kernel, bundle.series, bundle.quad)
        except NumericalError as exc:
            raise NumericalError(f"constants for kernel {kernel}: {exc}") from exc
        out["numeric"] = rep.to_dict()
    if args.compare:
        num, cf = out["numeric"], out["closed_form"]
        comp = {"limit_constant_rel_diff": _rel(num["limit_constant"], cf["limit_constant"])}
        if cf["clt_constant"] is not None:
            comp["clt_constant_rel_diff"] = _rel(num["clt_constant"], cf["clt_constant"])
        out["comparison"] = comp
    chosen = out.get("closed_form") if args.closed_form and not args.compare else out.get("numeric")
    text = dumps_json(out)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    summary = f"c = {chosen['limit_constant']:.6f}"
    if chosen.get("clt_constant") is not None:
        summary += f"  K = {chosen['clt_constant']:.6f}"
    if "terms" in chosen:
        summary += "  terms = [" + ", ".join(f"{t:.6f}" for t in chosen["terms"]) + "]"
    print(summary, file=sys.stderr)
    return EXIT_OK


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------
# simulate / estimate
# ---------------------------------------------------------------------------


def _fresh_path(args, bundle: ConfigBundle):
    seed = _resolve_seed(args, bundle.experiment.seed if bundle.experiment else None)
    x0 = bundle.params.threshold if args.x0 is None else args.x0
    return simulate_path(bundle.params, x0, args.T, args.n, RandomStream(seed, args.stream)), seed


def cmd_simulate(args, argv) -> int:
    started = time.perf_counter()
    bundle, _ = _load_bundle(args)
    path, seed = _fresh_path(args, bundle)
    out = _prepare_out(args.out)
    files = []
    if args.format in ("csv", "both"):
        files.append(write_path_csv(path, out / "path.csv"))
    if args.format in ("binary", "both"):
        files.append(write_path_binary(path, out / "path.bin"))
    config = {**bundle.to_dict(), "simulate": {"n_steps": args.n, "T": args.T, "x0": path.x0, "stream": args.stream}}
    _finish("simulate", argv, out, files, config, seed, started, check=args.check)
    print(f"wrote {len(files)} file(s) to {out}: L_T = {path.local_time[-1]:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args, argv) -> int:
    started = time.perf_counter()
    if args.input is not None:
        try:
            path = read_path(args.input)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
            return EXIT_IO
        r = 0.0 if args.r is None else args.r
        if path.params.threshold != 0.0 and args.r is None:
            r = path.params.threshold
        config = {"input": str(args.input), "r": r}
        seed = None
    else:
        bundle, _ = _load_bundle(args)
        path, seed = _fresh_path(args, bundle)
        r = bundle.params.threshold
        config = {**bundle.to_dict(), "simulate": {"n_steps": args.n, "T": args.T, "x0": path.x0}}
    estimator = crossing_estimator if args.estimator == "crossing" else weighted_estimator
    fn = estimator(path.positions, r, path.T, path.n_steps)
    value = fn.final
    print(repr(value))
    if args.out is not None:
        out = _prepare_out(args.out)
        f = write_step_function_csv(fn, out / f"{args.estimator}.csv", value_name=args.estimator)
        config = {**config, "estimator": args.estimator}
        _finish("estimate", argv, out, [f], config, seed, started, extra={"final_value": value})
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _verify_bundle(args, kind: str) -> tuple[ConfigBundle, str | None]:
    preset = None
    base = None
    if args.preset is not None:
        preset_kind, base = PRESETS[args.preset]
        if preset_kind != kind:
            raise ConfigError(f"preset {args.preset!r} is a {preset_kind!r} preset, not {kind!r}")
        preset = args.preset
    elif args.config is None and kind != "sampler":
        raise ConfigError(f"verify {kind} needs --preset or --config")
    elif kind == "sampler":
        base = PRESETS["sampler"][1]
    text = _read_config(args.config) if args.config is not None else base
    overrides = []
    if args.paths is not None:
        overrides.append(f"paths={args.paths}")
    if args.n is not None:
        overrides.append(f"n={args.n}")
    if overrides:
        text = _merge(text, "experiment", " ".join(overrides))
    bundle = parse_config(text)
    if bundle.experiment is None and kind != "sampler":
        raise ConfigError("configuration has no [experiment] section")
    seed = _resolve_seed(args, bundle.experiment.seed if bundle.experiment else None)
    return with_seed(bundle, seed), preset


def _qq_rows(z: np.ndarray):
    zs = np.sort(z)
    m = zs.size
    q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    return [(i, float(a), float(b)) for i, (a, b) in enumerate(zip(q, zs))]


def _verify_clt(bundle: ConfigBundle, workers: int, out: Path):
    res = run_clt_experiment(bundle.experiment, workers, bundle.series, bundle.quad)
    lo, hi = CLT_VARIANCE_RANGE
    checks = {
        "ks_max": {"threshold": CLT_MAX_KS, "value": res.ks, "passed": res.ks <= CLT_MAX_KS},
        "variance_range": {"threshold": list(CLT_VARIANCE_RANGE), "value": res.variance,
                           "passed": lo <= res.variance <= hi},
    }
    files = [
        write_table_csv(out / "clt_qq.csv", ["i", "normal_quantile", "z_quantile"], _qq_rows(res.z)),
        write_table_csv(out / "clt_z.csv", ["i", "z"], [(i, float(v)) for i, v in enumerate(res.z)]),
    ]
    return res.summary(), checks, files


def _verify_rate(bundle: ConfigBundle, workers: int, out: Path):
    res = run_rate_experiment(bundle.experiment, workers, bundle.series, bundle.quad)
    lo, hi = RATE_SLOPE_RANGE
    checks = {"slope_range": {"threshold": list(RATE_SLOPE_RANGE), "value": res.slope, "passed": lo <= res.slope <= hi}}
    rows = [(int(n), float(np.log(n)), float(r), float(np.log(r)), int(m)) for n, r, m in res.rows]
    files = [write_table_csv(out / "rate.csv", ["n", "log_n", "rmse", "log_rmse", "paths"], rows)]
    return res.summary(), checks, files


def _verify_consistency(bundle: ConfigBundle, workers: int, out: Path):
    res = run_consistency_experiment(bundle.experiment, workers, series=bundle.series, quad=bundle.quad)
    checks = {"strictly_decreasing": {"value": res.medians, "passed": res.strictly_decreasing()}}
    rows = [(int(n), float(v), int(m)) for n, v, m in res.rows]
    files = [write_table_csv(out / "consistency.csv", ["n", "median_sup_error", "paths"], rows)]
    return res.summary(), checks, files


def _verify_sampler(bundle: ConfigBundle, workers: int, out: Path, draws=SAMPLER_STEP_DRAWS, joint=SAMPLER_JOINT_DRAWS):
    seed = bundle.experiment.seed if bundle.experiment else 1
    res = run_sampler_checks(seed=seed, draws=draws, joint_draws=joint)
    worst_ks = max(s["ks"] for s in res["steps"])
    worst_p = min(j["p_value"] for j in res["joint"])
    checks = {
        "step_ks_max": {"threshold": SAMPLER_MAX_KS, "value": worst_ks, "passed": worst_ks < SAMPLER_MAX_KS},
        "joint_p_min": {"threshold": SAMPLER_MIN_P, "value": worst_p, "passed": worst_p > SAMPLER_MIN_P},
    }
    files = [
        write_table_csv(out / "sampler_steps.csv", ["case", "ks"], [(s["case"], float(s["ks"])) for s in res["steps"]]),
        write_table_csv(out / "sampler_joint.csv", ["case", "chi2", "p_value", "cells"],
                        [(j["case"], float(j["chi2"]), float(j["p_value"]), int(j["cells"])) for j in res["joint"]]),
    ]
    return {**res, "draws": draws, "joint_draws": joint}, checks, files


_VERIFIERS = {
    "clt": _verify_clt,
    "rate": _verify_rate,
    "consistency": _verify_consistency,
    "sampler": _verify_sampler,
}


def cmd_verify(args, argv) -> int:
    started = time.perf_counter()
    kind = args.experiment
    bundle, preset = _verify_bundle(args, kind)
    out = _prepare_out(args.out or Path(f"skewloc-verify-{kind}"))
    kwargs = {}
    if kind == "sampler":
        if args.draws is not None:
            kwargs["draws"] = args.draws
        if args.joint_draws is not None:
            kwargs["joint"] = args.joint_draws
    result, checks, files = _VERIFIERS[kind](bundle, args.workers, out, **kwargs)
    passed = all(c["passed"] for c in checks.values())
    config = bundle.to_dict()
    record = {
        "schema": 1,
        "experiment": kind,
        "preset": preset,
        "config": config,
        "result": result,
        "checks": checks,
        "passed": passed,
        "version": __version__,
    }
    files.insert(0, write_json(out / "record.json", record))
    if args.plot:
        from .plotting import render_verify_plots

        files += render_verify_plots(kind, out)
    seed = bundle.experiment.seed if bundle.experiment else None
    _finish(f"verify {kind}", argv, out, files, config, seed, started,
            extra={"workers": args.workers, "config_text": format_config(bundle)}, check=args.check)
    for name, c in checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {kind}.{name}: value={c['value']}", file=sys.stderr)
    print(f"record: {out / 'record.json'}", file=sys.stderr)
    if args.strict and not passed:
        return EXIT_CHECK
    return EXIT_OK


def cmd_check(args, argv) -> int:
    target = args.manifest
    if target.is_dir():
        target = target / "manifest.json"
    if not target.exists():
        print(f"error: no manifest at {target}", file=sys.stderr)
        return EXIT_IO
    problems = check_manifest(target)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_CHECK
    print(f"ok: all checksums in {target} match", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewloc", description="Local-time statistics for skew and oscillating Brownian motion.")
    parser.add_argument("--version", action="version", version=f"skewloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="limit constant c and variance constant K for a kernel")
    _add_process_args(p)
    p.add_argument("--kernel", default="h1x2", choices=["h0", "h1x2", "g"], help="built-in kernel")
    p.add_argument("--closed-form", action="store_true", help="use closed-form constants where available")
    p.add_argument("--compare", action="store_true", help="report numeric and closed-form constants side by side")
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_constants)

    def path_args(q):
        q.add_argument("--n", type=int, default=1024, help="number of steps")
        q.add_argument("--T", type=float, default=1.0, help="horizon")
        q.add_argument("--x0", type=float, help="start (default: the threshold)")
        q.add_argument("--seed", type=int, help=f"random seed (overrides ${SEED_ENV} and the config)")
        q.add_argument("--stream", type=int, default=0, help="stream id within the seed")

    p = sub.add_parser("simulate", help="simulate one exact path with its local time")
    _add_process_args(p)
    path_args(p)
    p.add_argument("--out", type=Path, default=Path("skewloc-path"), help="output directory")
    p.add_argument("--format", choices=["csv", "binary", "both"], default="csv")
    p.add_argument("--check", action="store_true", help="fail unless outputs match the existing manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="run an estimator over a stored or fresh path")
    _add_process_args(p)
    path_args(p)
    p.add_argument("--estimator", choices=["crossing", "weighted"], default="weighted")
    p.add_argument("--input", type=Path, help="path file (CSV or binary); omit to simulate a fresh path")
    p.add_argument("--out", type=Path, help="directory for the step-function CSV and manifest")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="run a Monte Carlo acceptance experiment")
    p.add_argument("experiment", choices=sorted(_VERIFIERS))
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int, help="override the number of paths")
    p.add_argument("--n", help="override the frequency list, e.g. '256,1024,4096'")
    p.add_argument("--draws", type=int, help="sampler: one-step draws per case")
    p.add_argument("--joint-draws", type=int, help="sampler: draws for the joint check")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.add_argument("--strict", action="store_true", help="exit 4 if an acceptance check fails")
    p.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    p.add_argument("--check", action="store_true", help="fail unless outputs match the existing manifest")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("check", help="verify the checksums listed in a manifest")
    p.add_argument("manifest", type=Path, help="manifest.json or the directory holding it")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) is not None and getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (NumericalError, ExperimentError, SamplerError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
