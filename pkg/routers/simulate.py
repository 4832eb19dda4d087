import asyncio
import math

from fastapi import APIRouter, HTTPException, status

from exceptions import ConfigError
from schemas import RunConfig, RunResponse, TraceRow
from services import config_service, report_service, scenario_service

router = APIRouter()


@router.post("/run", response_model=RunResponse)
async def run(config: RunConfig):
    """Run a configuration and return its fit summary and trace rows.

    Nothing is written to disk; the output section of the config is ignored.
    Tabulated data is read from the server filesystem, so it is CLI-only.
    """
    if config.initial.kind == "custom":
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="initial.kind = custom is only available from the command line",
        )
    result = await asyncio.to_thread(scenario_service.run_config, config)
    summary = {key: report_service.format_value(value) for key, value in result.summary.items()}
    rows = []
    if result.trace is not None:
        for sample in result.trace.samples:
            control = sample.control
            rows.append(
                TraceRow(
                    t=sample.t,
                    l_t=sample.length,
                    norm_u_phys=sample.norm,
                    energy_ref=sample.energy,
                    control_U=None if control is None or math.isnan(control) else control,
                )
            )
    return RunResponse(summary=summary, trace=rows)


@router.get("/presets/{name}")
async def get_preset(name: str):
    try:
        config = config_service.preset(name)
    except ConfigError as exc:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=str(exc))
    return config.model_dump(mode="json", by_alias=True)
