import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plap_hartree.config import (RunConfig, config_equal, load_config, parse_config,
                                 serialize_config)
from plap_hartree.errors import ParameterError
from plap_hartree.model import Variant
from plap_hartree.solver import SeedKind


def test_defaults():
    cfg = parse_config("")
    assert config_equal(cfg, RunConfig())
    assert cfg.params.N == 5 and cfg.params.p == 2.0 and cfg.params.mu == 1.0
    assert cfg.params.variant is Variant.HARTREE
    assert cfg.grid.M == 2048
    assert cfg.suite.criteria == (1, 2, 3, 4, 5, 6, 7, 8)


def test_partial_sections_and_comments(tmp_path):
    text = """
[params]
N = 6
p = 1.8   # inline comment
variant = HardySobolev
s = 0.4

[verify]
far_window = 100, 1000
lambdas = -3, -1

[suite]
instances = Hartree 5 2 0; HardySobolev 6 1.8 0.5
"""
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.params.N == 6 and cfg.params.p == 1.8 and cfg.params.s == 0.4
    assert cfg.params.variant is Variant.HARDY_SOBOLEV
    assert cfg.verify.far_window == (100.0, 1000.0) and cfg.verify.near_window is None
    assert cfg.verify.lambdas == (-3.0, -1.0)
    assert cfg.suite.instances == (("Hartree", 5, 2.0, 0.0), ("HardySobolev", 6, 1.8, 0.5))
    assert cfg.solver.max_outer == RunConfig().solver.max_outer


@pytest.mark.parametrize("text,msg", [
    ("[nonsense]\nx = 1\n", "unknown section"),
    ("[params]\nq = 1\n", "unknown key"),
    ("[params]\nN = five\n", "N"),
    ("[params]\np = 5\n", "1 < p < N"),
    ("[verify]\nnear_window = 1, 2, 3\n", "window"),
    ("[suite]\ncriteria = 1, 9\n", "criteria"),
    ("[suite]\ninstances = Hartree 5 2\n", "variant N p mu"),
    ("[solver]\nmax_outer = 0\n", "caps"),
    ("[output]\nangular_nodes = 8\n", "angular_nodes"),
    ("no section header\n", "syntax"),
])
def test_rejections(text, msg):
    with pytest.raises(ParameterError, match=msg):
        parse_config(text)


def test_mu_ladder():
    cfg = parse_config("[params]\nmu_steps = 4\n")
    ladder = cfg.mu_ladder()
    assert ladder[0] == 0.0 and len(ladder) == 4
    assert ladder[-1] == pytest.approx(0.75 * cfg.params.mu_bar)


_floats = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(N=st.integers(3, 9), pf=st.floats(0.05, 0.45), muf=st.floats(0.0, 0.99),
       variant=st.sampled_from(["Hartree", "HardySobolev"]),
       M=st.integers(64, 4096), tol=_floats, seed=st.integers(0, 2 ** 63),
       seed_kind=st.sampled_from(list(SeedKind)[:2]),
       lambdas=st.lists(st.floats(-50, -1e-3), min_size=1, max_size=4),
       window=st.one_of(st.none(), st.tuples(_floats, _floats)),
       cache=st.one_of(st.none(), st.just("cache dir")))
def test_round_trip(N, pf, muf, variant, M, tol, seed, seed_kind, lambdas, window, cache):
    # Hartree needs p < N/2
    top = N / 2 if variant == "Hartree" else N
    p = 1.0 + pf * (top - 1.0)
    cfg = parse_config(f"[params]\nN = {N}\np = {p!r}\nmu = 0\nvariant = {variant}\n"
                       f"[grid]\nM = {M}\n")
    cfg.params = dataclasses.replace(cfg.params, mu=muf * cfg.params.mu_bar)
    cfg.verify.tol = tol
    cfg.verify.seed = seed
    cfg.verify.lambdas = tuple(lambdas)
    cfg.verify.far_window = window
    cfg.solver.seed_profile = seed_kind
    cfg.output.kernel_cache = cache
    text = serialize_config(cfg)
    again = parse_config(text)
    assert config_equal(cfg, again)
    assert serialize_config(again) == text
