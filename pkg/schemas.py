from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.boundary_service import BoundaryCurve
from services.kernel_service import KernelParams
from services.solver_service import SchemeConfig


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["simulate", "kernel_check"] = "simulate"


class ControllerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    enabled: bool = False
    lam: Optional[float] = Field(None, gt=0, alias="lambda")
    tol: float = Field(1e-12, gt=0, le=1e-6)
    max_terms: int = Field(200, ge=20)

    @model_validator(mode="after")
    def lambda_when_enabled(self) -> "ControllerSpec":
        if self.enabled and self.lam is None:
            raise ValueError("missing key 'lambda' in [controller] while enabled = true")
        return self

    def kernel_params(self) -> KernelParams:
        if self.lam is None:
            raise ValueError("controller has no lambda")
        return KernelParams(lam=self.lam, tol=self.tol, max_terms=self.max_terms)


class InitialSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["analytic", "sine", "custom"] = "analytic"
    amplitude: float = 1.0
    path: Optional[str] = Field(None, description="Two-column y,value table for kind = custom")

    @model_validator(mode="after")
    def path_for_custom(self) -> "InitialSpec":
        if self.kind == "custom" and not self.path:
            raise ValueError("missing key 'path' in [initial] for kind = custom")
        return self


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trace_path: str = "trace.csv"
    summary_path: str = "summary.txt"
    n_samples: int = Field(100, ge=2, le=100000, description="Uniformly spaced trace samples")


class RunConfig(BaseModel):
    """A complete run: geometry, scheme, controller, datum and outputs."""

    model_config = ConfigDict(extra="forbid")

    run: RunSpec = Field(default_factory=RunSpec)
    curve: BoundaryCurve = Field(default_factory=BoundaryCurve)
    scheme: SchemeConfig
    controller: ControllerSpec = Field(default_factory=ControllerSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)


class TraceRow(BaseModel):
    t: float
    l_t: float
    norm_u_phys: float
    energy_ref: float
    control_U: Optional[float] = None


class RunResponse(BaseModel):
    summary: dict[str, Optional[str]]
    trace: list[TraceRow] = []


class KernelCheckResponse(BaseModel):
    lam: float
    l_value: float
    max_p: float
    max_q: float
    bound: float
    residual_p: float
    residual_q: float
    residual_order_p: float
    residual_order_q: float
