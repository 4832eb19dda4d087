import pytest

from exceptions import ConfigError
from services import config_service
from services.boundary_service import CurveKind
from services.config_service import dump_config, expand_grid, parse_config_text, parse_grid, preset

BASIC = """
[curve]
kind = power_law
alpha = 0.5   # growth exponent
k = 1

[scheme]
n_grid = 64
dt = 0.01
theta = 1.0
advection = upwind
t_final = 2.0
"""


def test_parse_basic_config():
    config = parse_config_text(BASIC)
    assert config.run.mode == "simulate"
    assert config.curve.kind == CurveKind.POWER_LAW
    assert config.curve.alpha == 0.5
    assert config.scheme.n_grid == 64
    assert config.scheme.advection.value == "upwind"
    assert config.controller.enabled is False
    assert config.initial.kind == "analytic"


@pytest.mark.parametrize("name", sorted(config_service.PRESETS))
def test_round_trip(name):
    config = preset(name)
    assert parse_config_text(dump_config(config)) == config


def test_round_trip_keeps_awkward_floats():
    config = parse_config_text(BASIC.replace("dt = 0.01", "dt = 0.1") + "\n[controller]\nenabled = true\nlambda = 0.30000000000000004\n")
    again = parse_config_text(dump_config(config))
    assert again.controller.lam == 0.30000000000000004
    assert again == config


def test_theta_out_of_range():
    with pytest.raises(ConfigError, match=r"scheme.theta: .*theta outside \[0.5,1\]"):
        parse_config_text(BASIC.replace("theta = 1.0", "theta = 0.3"))


def test_missing_lambda_named():
    text = BASIC + "\n[controller]\nenabled = true\n"
    with pytest.raises(ConfigError, match="missing key 'lambda' in \\[controller\\]"):
        parse_config_text(text)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="curve.speed"):
        parse_config_text(BASIC.replace("k = 1", "k = 1\nspeed = 3"))


def test_missing_scheme_rejected():
    with pytest.raises(ConfigError, match="scheme"):
        parse_config_text("[curve]\nalpha = 1\n")


def test_malformed_text_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("alpha = 1\n[curve\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config_service.load_config(tmp_path / "absent.ini")


def test_presets_match_published_runs():
    thm11 = preset("thm11")
    assert (thm11.curve.alpha, thm11.curve.k, thm11.scheme.t_final) == (1.0, 0.5, 100.0)
    assert thm11.controller.enabled is False
    thm12 = preset("thm12")
    assert (thm12.curve.alpha, thm12.curve.k, thm12.scheme.t_final) == (0.25, 1.0, 200.0)
    loop = preset("closedloop")
    assert loop.controller.enabled and loop.controller.lam == 6.5
    assert preset("kernelcheck").run.mode == "kernel_check"


def test_unknown_preset():
    with pytest.raises(ConfigError, match="available: closedloop, kernelcheck, thm11, thm12"):
        preset("thm99")


def test_parse_grid():
    assert parse_grid("alpha=1,0.25,0.5; k=1") == {"alpha": [0.25, 0.5, 1.0], "k": [1.0]}
    assert parse_grid("") == {}
    assert parse_grid("lambda=2,2,1") == {"lambda": [1.0, 2.0]}


@pytest.mark.parametrize("spec", ["beta=1", "alpha", "alpha=x", "alpha=1;alpha=2"])
def test_parse_grid_rejects(spec):
    with pytest.raises(ConfigError):
        parse_grid(spec)


def test_grid_size_capped():
    values = ",".join(str(v) for v in range(1, 101))
    with pytest.raises(ConfigError, match="limit"):
        parse_grid(f"alpha={values};k={values};lambda=1,2")


def test_expand_grid_order():
    base = parse_config_text(BASIC)
    combos = expand_grid(base, parse_grid("k=2,1;alpha=0.5,0.25"))
    points = [point for point, _ in combos]
    assert points == [
        {"alpha": 0.25, "k": 1.0},
        {"alpha": 0.25, "k": 2.0},
        {"alpha": 0.5, "k": 1.0},
        {"alpha": 0.5, "k": 2.0},
    ]
    assert [(c.curve.alpha, c.curve.k) for _, c in combos] == [(p["alpha"], p["k"]) for p in points]
    assert expand_grid(base, {}) == []


def test_expand_grid_lambda_enables_controller():
    base = parse_config_text(BASIC)
    (_, config), = expand_grid(base, {"lambda": [6.5]})
    assert config.controller.enabled and config.controller.lam == 6.5


def test_expand_grid_validates_points():
    with pytest.raises(ConfigError):
        expand_grid(parse_config_text(BASIC), {"alpha": [-1.0]})
