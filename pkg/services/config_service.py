"""
Reading, writing and validating run configurations.

A configuration is INI-style text: `[section]` headers followed by
`key = value` lines. Sections map onto the RunConfig blocks in schemas.py.
"""
import configparser
import io
import itertools
import logging
import math
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from exceptions import ConfigError
from schemas import RunConfig

logger = logging.getLogger(__name__)

SECTION_ORDER = ("run", "curve", "scheme", "controller", "initial", "output")
GRID_PARAMETERS = ("alpha", "k", "lambda")
MAX_GRID_SIZE = 10_000

PRESET_DT = 0.0025

PRESETS: dict[str, dict] = {
    "thm11": {
        "curve": {"kind": "power_law", "alpha": 1.0, "k": 0.5},
        "scheme": {"n_grid": 400, "dt": PRESET_DT, "theta": 0.5, "advection": "centered", "t_final": 100.0},
        "controller": {"enabled": False},
        "initial": {"kind": "analytic"},
        "output": {"trace_path": "thm11_trace.csv", "summary_path": "thm11_summary.txt"},
    },
    "thm12": {
        "curve": {"kind": "power_law", "alpha": 0.25, "k": 1.0},
        "scheme": {"n_grid": 400, "dt": PRESET_DT, "theta": 0.5, "advection": "centered", "t_final": 200.0},
        "controller": {"enabled": False},
        "initial": {"kind": "analytic"},
        "output": {"trace_path": "thm12_trace.csv", "summary_path": "thm12_summary.txt"},
    },
    # backward Euler: the lagged feedback keeps the undamped Crank-Nicolson mode alive at this dt
    "closedloop": {
        "curve": {"kind": "power_law", "alpha": 1.0, "k": 0.5},
        "scheme": {"n_grid": 400, "dt": PRESET_DT, "theta": 1.0, "advection": "centered", "t_final": 10.0},
        "controller": {"enabled": True, "lambda": 6.5},
        "initial": {"kind": "analytic"},
        "output": {"trace_path": "closedloop_trace.csv", "summary_path": "closedloop_summary.txt"},
    },
    "kernelcheck": {
        "run": {"mode": "kernel_check"},
        "curve": {"kind": "power_law", "alpha": 1.0, "k": 0.5},
        "scheme": {"n_grid": 400, "dt": PRESET_DT, "theta": 0.5, "advection": "centered", "t_final": 10.0},
        "controller": {"enabled": True, "lambda": 6.5},
        "initial": {"kind": "analytic"},
        "output": {
            "trace_path": "kernelcheck_bounds.csv",
            "summary_path": "kernelcheck_summary.txt",
            "n_samples": 11,
        },
    },
}


def _format_errors(exc: ValidationError, source: str) -> str:
    lines = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{source}: {location}: {error['msg']}")
    return "\n".join(lines)


def validate_config(data: dict, source: str = "<config>") -> RunConfig:
    """Validate nested section data; every failure names section.key."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, source)) from exc


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        # parsing errors from configparser carry the offending line number
        raise ConfigError(str(exc)) from exc
    data = {section: dict(parser.items(section)) for section in parser.sections()}
    return validate_config(data, source)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    config = parse_config_text(text, source=str(path))
    logger.info("loaded config %s (mode=%s)", path, config.run.mode)
    return config


def _to_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(getattr(value, "value", value))


def dump_config(config: RunConfig) -> str:
    """Serialize to INI text that parses back to an equal RunConfig."""
    data = config.model_dump(by_alias=True, exclude_none=True)
    parser = configparser.ConfigParser(interpolation=None)
    for section in SECTION_ORDER:
        parser[section] = {key: _to_text(value) for key, value in data[section].items()}
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def save_config(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(config), encoding="utf-8")
    return path


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(sorted(PRESETS))}")
    return validate_config(PRESETS[name], source=f"preset:{name}")


def parse_grid(spec: str) -> dict[str, list[float]]:
    """Parse 'alpha=0.25,0.5,1;k=1' into sorted value lists per parameter.

    An empty spec gives an empty grid.
    """
    grid: dict[str, list[float]] = {}
    for chunk in filter(None, (part.strip() for part in spec.split(";"))):
        name, sep, values = chunk.partition("=")
        name = name.strip()
        if not sep or name not in GRID_PARAMETERS:
            raise ConfigError(f"bad grid entry '{chunk}'; expected one of {GRID_PARAMETERS} as name=v1,v2")
        if name in grid:
            raise ConfigError(f"grid parameter '{name}' given twice")
        try:
            numbers = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"grid entry '{chunk}': {exc}") from exc
        grid[name] = sorted(set(numbers))
    size = math.prod(len(v) for v in grid.values()) if grid else 0
    if size > MAX_GRID_SIZE:
        raise ConfigError(f"grid has {size} combinations, limit is {MAX_GRID_SIZE}")
    return grid


def expand_grid(base: RunConfig, grid: dict[str, list[float]]) -> list[tuple[dict[str, float], RunConfig]]:
    """Configurations for every combination, in lexicographic grid order."""
    if not grid:
        return []
    names = sorted(grid)
    combos = []
    for values in itertools.product(*(grid[name] for name in names)):
        point = dict(zip(names, values))
        data = base.model_dump(by_alias=True, exclude_none=True)
        if "alpha" in point:
            data["curve"]["alpha"] = point["alpha"]
        if "k" in point:
            data["curve"]["k"] = point["k"]
        if "lambda" in point:
            data["controller"]["lambda"] = point["lambda"]
            data["controller"]["enabled"] = True
        combos.append((point, validate_config(data, source=f"grid point {point}")))
    return combos
