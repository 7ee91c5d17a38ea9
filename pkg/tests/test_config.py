import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imcflab.config import ConfigError, ExperimentConfig, dump_config, parse_config

MINIMAL = """
[metric]
family = hyperbolic
[initial]
rho0 = 3
[flow]
t_end = 4
"""


def test_minimal_document_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg == ExperimentConfig(family="hyperbolic", rho0=3.0, t_end=4.0)
    assert cfg.cfl == 0.2 and cfg.h_floor == 1e-3 and cfg.n_theta == 64


def test_negative_cfl_names_key_and_range():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL + "cfl = -1\n")
    assert exc.value.problems == ["flow.cfl: -1.0 out of range, must be > 0"]


def test_ads_requires_mass():
    with pytest.raises(ConfigError, match="mass required"):
        parse_config(MINIMAL.replace("hyperbolic", "ads_schwarzschild"))


def test_all_problems_are_reported():
    text = "[metric]\nfamily = flat\ncolour = red\n[grid]\nn_theta = 8\n[extra]\nx = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    probs = "\n".join(exc.value.problems)
    for needle in ("metric.colour: unknown key", "grid.n_theta", "[extra]: unknown section",
                   "initial.rho0: missing", "flow.t_end: missing", "metric.family"):
        assert needle in probs


@pytest.mark.parametrize(
    "extra, needle",
    [
        ("[grid]\nn_phi = 3\n", "grid.n_phi"),
        ("[initial]\ncos_modes = 2.5\n", "initial radius"),
        ("[flow]\nsample_every = 1.5\n", "not an integer"),
        ("[output]\nsave_nodes = maybe\n", "not a boolean"),
        ("[metric]\nq_amplitude = 0.1\n", "only valid for the perturbed family"),
    ],
)
def test_specific_violations(extra, needle):
    base = "[metric]\nfamily = hyperbolic\n[initial]\nrho0 = 3\n[flow]\nt_end = 1\n"
    # merge by appending duplicate sections is a syntax error, so rebuild
    sections = {}
    for block in (base + extra).split("["):
        if block.strip():
            head, body = block.split("]", 1)
            sections.setdefault(head, []).append(body.strip())
    text = "".join(f"[{h}]\n" + "\n".join(b) + "\n" for h, b in sections.items())
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_perturbed_family():
    text = "[metric]\nfamily = perturbed\nmass = 1\nq_amplitude = 0.2\nq_modes = 0.5, 0.5\n[initial]\nrho0 = 3\n[flow]\nt_end = 1\n"
    cfg = parse_config(text)
    assert cfg.metric().perturbation.modes == (0.5, 0.5)
    with pytest.raises(ConfigError, match="q_amplitude"):
        parse_config(text.replace("q_amplitude = 0.2\n", ""))


def test_syntax_error():
    with pytest.raises(ConfigError, match="syntax"):
        parse_config("no section header\n")


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from(["hyperbolic", "ads_schwarzschild"]),
    st.floats(0.1, 5),
    st.floats(2.0, 5.0),
    st.lists(st.floats(-0.3, 0.3), max_size=3),
    st.floats(0, 20),
    st.integers(16, 128),
)
def test_dump_parse_roundtrip(family, mass, rho0, modes, t_end, n):
    cfg = ExperimentConfig(family=family, mass=mass if family != "hyperbolic" else 0.0, rho0=rho0,
                           cos_modes=tuple(modes), t_end=t_end, n_theta=n)
    assert parse_config(dump_config(cfg)) == cfg
