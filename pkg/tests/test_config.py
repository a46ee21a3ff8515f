import math
from dataclasses import replace

import numpy as np
import pytest

from udwcavity.config import (
    SCENARIOS,
    ConfigError,
    ConvergenceSpec,
    config_hash,
    load_default,
    parse_config,
    parse_config_text,
    parse_number,
    serialize,
    validate_convergence,
)

MINIMAL = """
[run]
scenario = harvesting

[cavity]
length = 2*pi
boundary = dirichlet
modes = 20

[detector.1]
gap = 9
coupling = 1/100
position = pi/2

[detector.2]
gap = 9
coupling = 1/100
position = 3*pi/2
"""


def with_lines(text, section, *lines):
    return text.replace(f"[{section}]", "\n".join([f"[{section}]", *lines]), 1)


def test_minimal_config_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.scenario == "harvesting"
    assert cfg.length == pytest.approx(2 * math.pi)
    assert cfg.picture == "interaction" and cfg.seed == 0
    assert cfg.include_zero_mode is False
    assert cfg.detectors[0].switching == "sharp"
    assert cfg.convergence is None


def test_periodic_zero_mode_defaults_off():
    text = MINIMAL.replace("dirichlet", "periodic")
    assert parse_config_text(text).include_zero_mode is False


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_checked_in_configs_round_trip(scenario):
    cfg = load_default(scenario)
    again = parse_config_text(serialize(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_unruh_defaults():
    cfg = load_default("unruh")
    d = cfg.detectors[0]
    assert cfg.length == pytest.approx(4 * math.pi)
    assert cfg.boundary == "periodic"
    assert d.coupling == pytest.approx(0.01)
    assert d.width == pytest.approx(8 / 7)
    assert d.gap == 4.0
    assert d.trajectory == "accelerated" and d.position == 0.0
    assert len(cfg.sweep_value("accelerations")) == 12


def test_switching_noise_defaults():
    cfg = load_default("switching_noise")
    d = cfg.detectors[0]
    assert (cfg.length, cfg.boundary) == (pytest.approx(2 * math.pi), "dirichlet")
    assert (d.gap, d.coupling, d.position) == (4.5, pytest.approx(0.01), pytest.approx(math.pi))


def test_causality_defaults():
    cfg = load_default("causality")
    assert cfg.sweep_value("mode_counts") == (10, 13, 16)
    d1, d2 = cfg.detectors
    assert d1.squeezing == 0.0 and d2.squeezing == 5.0
    assert d1.position == pytest.approx(cfg.length / 4) and d2.position == pytest.approx(3 * cfg.length / 4)
    assert d1.gap == d2.gap == 4.5 and d1.coupling == pytest.approx(0.01)


def test_harvesting_defaults():
    cfg = load_default("harvesting")
    assert [d.gap for d in cfg.detectors] == [9.0, 9.0]
    assert cfg.convergence.schedule[-1] == 100
    assert all(d.squeezing == 0.0 for d in cfg.detectors)


def test_empty_file_names_required_fields(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    with pytest.raises(ConfigError) as exc:
        parse_config(p)
    for key in ("scenario", "length", "boundary", "modes", "gap", "coupling"):
        assert key in str(exc.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.cfg")


@pytest.mark.parametrize(
    "section, line",
    [
        ("cavity", "colour = red"),
        ("run", "speed = 3"),
        ("detector.1", "mass = 1"),
    ],
)
def test_unknown_keys_rejected(section, line):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(with_lines(MINIMAL, section, line))
    assert line.split(" =")[0] in str(exc.value)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        parse_config_text(MINIMAL + "\n[extras]\nx = 1\n")


@pytest.mark.parametrize(
    "old, new",
    [
        ("length = 2*pi", "length = -1"),
        ("length = 2*pi", "length = 0"),
        ("coupling = 1/100\nposition = pi/2", "coupling = -0.01\nposition = pi/2"),
        ("modes = 20", "modes = 0"),
        ("boundary = dirichlet", "boundary = neumann"),
        ("gap = 9\ncoupling = 1/100\nposition = pi/2", "gap = 0\ncoupling = 1/100\nposition = pi/2"),
        ("position = pi/2", "position = 10"),
        ("modes = 20", "modes = 2.5"),
        ("length = 2*pi", "length = __import__('os')"),
    ],
)
def test_invalid_values_rejected(old, new):
    assert old in MINIMAL
    with pytest.raises(ConfigError):
        parse_config_text(MINIMAL.replace(old, new, 1))


def test_gaussian_needs_width():
    text = MINIMAL.replace("gap = 9\ncoupling = 1/100\nposition = pi/2",
                           "gap = 9\ncoupling = 1/100\nposition = pi/2\nswitching = gaussian", 1)
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_sweep_keys_checked_per_scenario():
    with pytest.raises(ConfigError):
        parse_config_text(MINIMAL + "\n[sweep]\naccelerations = 1, 2\n")
    cfg = parse_config_text(MINIMAL + "\n[sweep]\nsamples = 11\nonset_threshold = 1e-5\n")
    assert cfg.sweep_value("samples") == 11


def test_list_generators():
    text = MINIMAL.replace("harvesting", "unruh").replace("dirichlet", "periodic")
    text = text.split("[detector.2]")[0]
    text = text.replace("position = pi/2", "position = 0\nswitching = gaussian\nwidth = 1\ntrajectory = accelerated")
    cfg = parse_config_text(text + "\n[sweep]\naccelerations = linspace(1, 2, 5)\n")
    assert np.allclose(cfg.sweep_value("accelerations"), np.linspace(1, 2, 5))
    cfg = parse_config_text(text + "\n[sweep]\naccelerations = geomspace(1, 8, 4)\n")
    assert np.allclose(cfg.sweep_value("accelerations"), [1, 2, 4, 8])


def test_convergence_section_validation():
    ok = parse_config_text(MINIMAL + "\n[convergence]\nschedule = 10, 20\ntolerance = 1e-3\n")
    assert ok.convergence == ConvergenceSpec((10, 20), 1e-3)
    for body in ("schedule = 20, 10\ntolerance = 1e-3", "schedule = 10, 20\ntolerance = 0",
                 "schedule = 10, 10\ntolerance = 1e-3", "tolerance = 1e-3"):
        with pytest.raises(ConfigError):
            parse_config_text(MINIMAL + "\n[convergence]\n" + body + "\n")


def test_validate_convergence_direct():
    with pytest.raises(ConfigError):
        validate_convergence(ConvergenceSpec((0, 5), 1.0))


def test_integrator_section():
    cfg = parse_config_text(MINIMAL + "\n[integrator]\nmethod = rk4_fixed\ndt = 0.01\n")
    assert cfg.integrator.method == "rk4_fixed" and cfg.integrator.dt == 0.01
    with pytest.raises(ConfigError):
        parse_config_text(MINIMAL + "\n[integrator]\nmethod = euler\n")


def test_detector_sections_numbered():
    with pytest.raises(ConfigError):
        parse_config_text(MINIMAL.replace("[detector.2]", "[detector.3]"))


def test_hash_changes_with_content():
    cfg = load_default("causality")
    assert config_hash(cfg) != config_hash(replace(cfg, seed=cfg.seed + 1))
    assert len(config_hash(cfg)) == 64


def test_parse_number_expressions():
    assert parse_number("9/2") == 4.5
    assert parse_number("4*pi") == pytest.approx(4 * math.pi)
    assert parse_number("2**-3") == 0.125
    assert parse_number("1e-5") == 1e-5
    for bad in ("pi()", "x", "1/0", "inf"):
        with pytest.raises(ValueError):
            parse_number(bad)


def test_inline_comments_allowed():
    text = MINIMAL.replace("boundary = dirichlet", "boundary = dirichlet   # or periodic")
    assert parse_config_text(text).boundary == "dirichlet"
