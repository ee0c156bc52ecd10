"""Configuration file parsing, validation and lossless round trip."""

import re
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewloc.analytic import ProcessParams
from skewloc.config import format_config, parse_config, tokenize, with_seed
from skewloc.errors import ConfigError
from skewloc.quadrature import DEFAULT_QUAD
from skewloc.asymptotics import DEFAULT_SERIES

DOCS = Path(__file__).resolve().parents[1] / "docs" / "config.md"


def test_minimal_file_defaults_everything():
    b = parse_config("[process] kind=skew beta=0.5 r=0")
    assert b.params == ProcessParams.skew(0.5, 0.0)
    assert b.estimator == "weighted" and b.kernel_name == "h1x2"
    assert b.experiment is None
    assert b.quad == DEFAULT_QUAD and b.series == DEFAULT_SERIES


def test_tokenize_splits_assignments_on_one_line():
    toks = list(tokenize("[experiment] n = 256, 1024 paths = 500  # comment\nseed=3"))
    assert [(s, k, v) for s, k, v, _ in toks] == [
        ("experiment", "n", "256, 1024"),
        ("experiment", "paths", "500"),
        ("experiment", "seed", "3"),
    ]
    assert [ln for *_, ln in toks] == [1, 1, 2]


def test_oscillating_forms():
    a = parse_config("[process]\nkind = oscillating\nsigma = 1, 2\n")
    b = parse_config("[process] kind=obm sigma_minus=1 sigma_plus=2")
    assert a.params == b.params == ProcessParams.oscillating(1.0, 2.0)


def test_experiment_section():
    b = parse_config(
        "[process] kind=obm sigma=1,2\n[kernel] estimator=crossing\n"
        "[experiment] n = 2^8, 2^10 paths = 300 seed = 9 constants = numeric\n"
    )
    e = b.experiment
    assert e.n == (256, 1024) and e.n_paths == 300 and e.seed == 9
    assert e.estimator == "crossing" and e.constants == "numeric"
    assert e.params == b.params
    assert with_seed(b, 11).experiment.seed == 11


def test_numerics_section():
    b = parse_config("[process] kind=skew\n[numerics] abs_tol=1e-8 j_min=20 term_tol=1e-4")
    assert b.quad.abs_tol == 1e-8
    assert b.series.j_min == 20 and b.series.term_tol == 1e-4


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("[process] kind=skew beta=1.0", r"line 1: .*open interval"),
        ("[process] kind=skew\nbeta = 0.2\nbeta = 0.3", r"line 3: duplicate key 'beta'.*line 2"),
        ("[process] kind=skew colour=red", r"line 1: unknown key 'colour'"),
        ("[plot] kind=skew", r"line 1: unknown section"),
        ("kind=skew", r"line 1: assignment outside of a section"),
        ("[process] kind=obm sigma=1,2 sigma_minus=1", r"sigma"),
        ("[process] kind=skew sigma=1,2", r"sigma"),
        ("[process] kind=obm beta=0.1", r"beta"),
        ("[process] kind=obm sigma=1,-2", r"positive|> 0"),
        ("[process] kind=brownian", r"kind"),
        ("[process] kind=skew beta=abc", r"line 1"),
        ("[process] kind=skew\n[experiment] paths=0", r"line 2"),
        ("[kernel] estimator=weighted", r"\[process\]"),
    ],
)
def test_errors_name_line_and_invariant(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


def test_documented_examples_parse():
    blocks = re.findall(r"```\n(.*?)```", DOCS.read_text(encoding="utf-8"), flags=re.S)
    good = [b for b in blocks if "→" not in b and not b.startswith("file")]
    assert len(good) >= 3
    for block in good:
        parse_config(block)
    bad = [b for b in blocks if "→" in b]
    for block in bad:
        for case in block.split("\n\n"):
            text, message = case.split("→")
            with pytest.raises(ConfigError) as info:
                parse_config(text)
            assert str(info.value) in message


params_strategy = st.one_of(
    st.builds(ProcessParams.skew, st.floats(-0.99, 0.99), st.floats(-10, 10)),
    st.builds(ProcessParams.oscillating, st.floats(0.01, 100), st.floats(0.01, 100), st.floats(-10, 10)),
)


@given(
    params_strategy,
    st.sampled_from(["weighted", "crossing", "h1", "g"]),
    st.lists(st.integers(2, 10**6), min_size=1, max_size=4),
    st.integers(0, 2**63),
    st.booleans(),
)
def test_round_trip_is_lossless(params, estimator, ns, seed, with_experiment):
    kind = "skew" if params.is_skew else "oscillating"
    proc = f"beta = {params.beta!r}" if params.is_skew else f"sigma = {params.sigma_minus!r}, {params.sigma_plus!r}"
    text = f"[process] kind={kind} {proc} r = {params.threshold!r}\n[kernel] estimator = {estimator}\n"
    if with_experiment:
        text += f"[experiment] n = {', '.join(map(str, ns))} seed = {seed} paths = 10\n"
    b = parse_config(text)
    again = parse_config(format_config(b))
    assert again == b
    assert format_config(again) == format_config(b)
