"""
File outputs: trace CSV, key=value fit summaries and sweep tables.
"""
import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Union

import pandas as pd
from dotenv import dotenv_values

from services.kernel_service import KernelBoundCheck
from services.solver_service import DecayTrace

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
TRACE_COLUMNS = ["t", "l_t", "norm_u_phys", "energy_ref", "control_U"]
BOUND_COLUMNS = ["t", "l_t", "max_p", "max_q", "bound"]
SWEEP_COLUMNS = ["alpha", "k", "lambda", "regime", "rate", "beta", "r_squared", "exp_rate"]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else FLOAT_FORMAT % value
    return str(getattr(value, "value", value))


def _write_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return path


def trace_frame(trace: DecayTrace) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": trace.times(),
            "l_t": trace.lengths(),
            "norm_u_phys": trace.norms(),
            "energy_ref": trace.energies(),
            "control_U": trace.controls(),
        },
        columns=TRACE_COLUMNS,
    )


def write_trace_csv(trace: DecayTrace, path: Union[str, Path]) -> Path:
    """One row per sample; control_U is empty for uncontrolled runs."""
    path = _write_table(trace_frame(trace), path)
    logger.info("wrote %d trace rows to %s", len(trace.samples), path)
    return path


def write_bound_table(times: Iterable[float], checks: list[KernelBoundCheck], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame(
        [
            {"t": t, "l_t": c.l_value, "max_p": c.max_p, "max_q": c.max_q, "bound": c.bound}
            for t, c in zip(times, checks)
        ],
        columns=BOUND_COLUMNS,
    )
    return _write_table(frame, path)


def write_sweep_table(rows: list[dict], path: Union[str, Path]) -> Path:
    """Rows are written in the order given; an empty list leaves only the header."""
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    path = _write_table(frame, path)
    logger.info("wrote %d sweep rows to %s", len(rows), path)
    return path


def write_summary(summary: dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(f"{key}={format_value(value)}\n" for key, value in summary.items())
    path.write_text(text, encoding="utf-8")
    return path


def read_summary(path: Union[str, Path]) -> dict[str, Optional[str]]:
    return dict(dotenv_values(path))
