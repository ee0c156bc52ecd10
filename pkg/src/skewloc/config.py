"""Line-oriented configuration files.

Grammar (see ``docs/config.md``)::

    file     := line*
    line     := [ "[" section "]" ] { key "=" value }* [ "#" comment ]
    section  := "process" | "kernel" | "experiment" | "numerics"
    value    := text up to the next "key =" token or end of line

A line may hold a section header followed by assignments, or several
assignments at once (``[process] kind=skew beta=0.5 r=0``). Unknown keys and
repeated keys are errors; every value is validated against the invariant it
feeds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace

from .analytic import ProcessParams
from .asymptotics import SeriesConfig
from .errors import ConfigError
from .harness import CONSTANT_SOURCES, ExperimentConfig
from .kernels import BUILTIN_KERNELS
from .quadrature import QuadratureConfig

SECTIONS = ("process", "kernel", "experiment", "numerics")

_KIND_ALIASES = {"skew": "skew", "sbm": "skew", "oscillating": "oscillating", "obm": "oscillating"}

# key -> converter, per section
_SCHEMA = {
    "process": {
        "kind": str,
        "beta": float,
        "sigma_minus": float,
        "sigma_plus": float,
        "sigma": "pair",
        "r": float,
    },
    "kernel": {"name": str, "estimator": str},
    "experiment": {
        "n": "intlist",
        "paths": int,
        "seed": int,
        "T": float,
        "t_eval": float,
        "x0": float,
        "localtime_floor": float,
        "constants": str,
        "c": float,
        "K": float,
        "chunk_paths": int,
    },
    "numerics": {
        "abs_tol": float,
        "rel_tol": float,
        "tail_sigmas": float,
        "max_subdivisions": int,
        "j_min": int,
        "term_tol": float,
        "decay_check_window": int,
        "j_max": int,
    },
}

_HEADER = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]")
_ASSIGN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)(?=\s+[A-Za-z_][A-Za-z0-9_]*\s*=|\s*$)")


@dataclass
class ConfigBundle:
    """Validated configuration with all defaults materialised."""

    params: ProcessParams
    estimator: str = "weighted"
    kernel: str | None = None
    experiment: ExperimentConfig | None = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    series: SeriesConfig = field(default_factory=SeriesConfig)

    @property
    def kernel_name(self) -> str:
        from .harness import ESTIMATOR_KERNELS

        return self.kernel or ESTIMATOR_KERNELS.get(self.estimator, self.estimator)

    def to_dict(self) -> dict:
        d = {
            "process": self.params.describe(),
            "kernel": {"name": self.kernel_name, "estimator": self.estimator},
            "numerics": {
                **{f.name: getattr(self.quad, f.name) for f in fields(self.quad)},
                **{f.name: getattr(self.series, f.name) for f in fields(self.series) if f.name != "tail_correction"},
            },
        }
        if self.experiment is not None:
            e = self.experiment
            d["experiment"] = {
                "n": list(e.n_list),
                "paths": e.n_paths,
                "seed": e.seed,
                "T": e.T,
                "t_eval": e.eval_time,
                "x0": e.start,
                "localtime_floor": e.localtime_floor,
                "constants": e.constants,
                "c": e.c,
                "K": e.K,
                "chunk_paths": e.chunk_paths,
            }
        return d


def _convert(kind, raw: str, key: str, lineno: int):
    try:
        if kind == "pair":
            parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
            if len(parts) != 2:
                raise ValueError("expected two comma-separated numbers")
            return (float(parts[0]), float(parts[1]))
        if kind == "intlist":
            parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
            if not parts:
                raise ValueError("empty list")
            vals = []
            for p in parts:
                if "^" in p:
                    base, exp = p.split("^", 1)
                    vals.append(int(base) ** int(exp))
                else:
                    v = float(p)
                    if v != int(v):
                        raise ValueError(f"{p!r} is not an integer")
                    vals.append(int(v))
            return tuple(vals)
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError("not an integer")
            return int(v)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: invalid value for {key!r}: {raw!r} ({exc})") from None


def tokenize(text: str):
    """Yield ``(section, key, raw_value, lineno)`` assignments."""
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        m = _HEADER.match(body)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]; expected one of {SECTIONS}")
            body = body[m.end():]
        rest = body.strip()
        if not rest:
            continue
        if section is None:
            raise ConfigError(f"line {lineno}: assignment outside of a section")
        pos = 0
        matched = False
        for am in _ASSIGN.finditer(rest):
            if rest[pos:am.start()].strip():
                raise ConfigError(f"line {lineno}: syntax error near {rest[pos:am.start()].strip()!r}")
            value = am.group(2).strip()
            if value == "":
                raise ConfigError(f"line {lineno}: missing value for {am.group(1)!r}")
            yield section, am.group(1), value, lineno
            pos = am.end()
            matched = True
        if not matched or rest[pos:].strip():
            raise ConfigError(f"line {lineno}: syntax error: expected 'key = value', got {rest!r}")


def parse_config(text: str) -> ConfigBundle:
    """Parse and validate configuration text; see the module docstring for the grammar."""
    values: dict[str, dict[str, object]] = {s: {} for s in SECTIONS}
    seen: dict[tuple, int] = {}
    for section, key, raw, lineno in tokenize(text):
        schema = _SCHEMA[section]
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]; allowed: {sorted(schema)}")
        if (section, key) in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} in [{section}] (first set on line {seen[(section, key)]})"
            )
        seen[(section, key)] = lineno
        values[section][key] = (_convert(schema[key], raw, key, lineno), lineno)

    def get(section, key, default=None):
        v = values[section].get(key)
        return default if v is None else v[0]

    def line_of(section, key):
        v = values[section].get(key)
        return f"line {v[1]}: " if v else ""

    # -- process --------------------------------------------------------------
    if not values["process"]:
        raise ConfigError("missing [process] section")
    kind_raw = get("process", "kind")
    if kind_raw is None:
        raise ConfigError("[process] requires 'kind' (skew or oscillating)")
    kind = _KIND_ALIASES.get(str(kind_raw).lower())
    if kind is None:
        raise ConfigError(f"{line_of('process', 'kind')}kind must be skew/sbm or oscillating/obm, got {kind_raw!r}")
    r = get("process", "r", 0.0)
    try:
        if kind == "skew":
            for bad in ("sigma", "sigma_minus", "sigma_plus"):
                if bad in values["process"]:
                    raise ConfigError(f"{line_of('process', bad)}{bad!r} is not a skew-process parameter")
            params = ProcessParams.skew(get("process", "beta", 0.0), r)
        else:
            if "beta" in values["process"]:
                raise ConfigError(f"{line_of('process', 'beta')}'beta' is not an oscillating-process parameter")
            pair = get("process", "sigma")
            if pair is not None and ("sigma_minus" in values["process"] or "sigma_plus" in values["process"]):
                raise ConfigError(f"{line_of('process', 'sigma')}give either 'sigma' or 'sigma_minus'/'sigma_plus', not both")
            sm, sp = pair if pair is not None else (get("process", "sigma_minus", 1.0), get("process", "sigma_plus", 1.0))
            params = ProcessParams.oscillating(sm, sp, r)
    except ConfigError as exc:
        key = "beta" if kind == "skew" else ("sigma" if "sigma" in values["process"] else "sigma_minus")
        msg = str(exc)
        if not msg.startswith("line"):
            msg = f"{line_of('process', key)}{msg}"
        raise ConfigError(msg) from None

    # -- kernel ---------------------------------------------------------------
    estimator = get("kernel", "estimator", "weighted")
    kernel = get("kernel", "name")
    valid = set(BUILTIN_KERNELS) | {"g_beta", "weighted", "crossing"}
    for key, val in (("estimator", estimator), ("name", kernel)):
        if val is not None and val not in valid:
            raise ConfigError(f"{line_of('kernel', key)}unknown kernel/estimator {val!r}; expected one of {sorted(valid)}")
    if kernel is not None and "estimator" not in values["kernel"]:
        estimator = kernel

    # -- numerics -------------------------------------------------------------
    try:
        quad = QuadratureConfig(
            abs_tol=get("numerics", "abs_tol", 1e-10),
            rel_tol=get("numerics", "rel_tol", 1e-10),
            tail_sigmas=get("numerics", "tail_sigmas", 10.0),
            max_subdivisions=get("numerics", "max_subdivisions", 2000),
        )
        series = SeriesConfig(
            j_min=get("numerics", "j_min", 16),
            term_tol=get("numerics", "term_tol", 1e-3),
            decay_check_window=get("numerics", "decay_check_window", 4),
            j_max=get("numerics", "j_max", 4000),
        )
    except ConfigError as exc:
        raise ConfigError(f"[numerics]: {exc}") from None

    # -- experiment -----------------------------------------------------------
    experiment = None
    if values["experiment"]:
        constants = get("experiment", "constants", "closed_form")
        if constants not in CONSTANT_SOURCES:
            raise ConfigError(f"{line_of('experiment', 'constants')}constants must be one of {CONSTANT_SOURCES}")
        n = get("experiment", "n", (4096,))
        try:
            experiment = ExperimentConfig(
                params=params,
                estimator=kernel or estimator,
                n=n if len(n) > 1 else n[0],
                n_paths=get("experiment", "paths", 2000),
                seed=get("experiment", "seed", 1),
                T=get("experiment", "T", 1.0),
                t_eval=get("experiment", "t_eval", get("experiment", "T", 1.0)),
                x0=get("experiment", "x0", r),
                localtime_floor=get("experiment", "localtime_floor", 1e-3),
                constants=constants,
                c=get("experiment", "c"),
                K=get("experiment", "K"),
                chunk_paths=get("experiment", "chunk_paths", 250),
            )
        except (ConfigError, ValueError) as exc:
            # messages start with the offending field name
            field = re.match(r"[A-Za-z_]+", str(exc))
            key = {"n_paths": "paths"}.get(field.group(0), field.group(0)) if field else ""
            raise ConfigError(f"{line_of('experiment', key)}[experiment]: {exc}") from None
    return ConfigBundle(params, estimator, kernel, experiment, quad, series)


def format_config(bundle: ConfigBundle) -> str:
    """Serialise a bundle back to the text format (lossless for floats)."""
    d = bundle.to_dict()
    lines = ["[process]"]
    p = d["process"]
    lines.append(f"kind = {p['kind']}")
    if p["kind"] == "skew":
        lines.append(f"beta = {p['beta']!r}")
    else:
        lines.append(f"sigma_minus = {p['sigma_minus']!r}")
        lines.append(f"sigma_plus = {p['sigma_plus']!r}")
    lines.append(f"r = {p['r']!r}")
    lines += ["", "[kernel]", f"estimator = {bundle.estimator}"]
    if bundle.kernel is not None:
        lines.append(f"name = {bundle.kernel}")
    if "experiment" in d:
        lines += ["", "[experiment]"]
        for k, v in d["experiment"].items():
            if v is None:
                continue
            if k == "n":
                v = ", ".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
    lines += ["", "[numerics]"]
    for k, v in d["numerics"].items():
        lines.append(f"{k} = {v!r}")
    return "\n".join(lines) + "\n"


def with_seed(bundle: ConfigBundle, seed: int) -> ConfigBundle:
    if bundle.experiment is None:
        return bundle
    return replace(bundle, experiment=replace(bundle.experiment, seed=int(seed)))
