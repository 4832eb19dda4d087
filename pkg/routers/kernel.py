import asyncio
import math

from fastapi import APIRouter, Query

from schemas import KernelCheckResponse
from services.kernel_service import KernelKind, KernelParams, kernel_bound_check, kernel_pde_residual

router = APIRouter()

RESOLUTIONS = (64, 128)


def _check(lam: float, l_value: float) -> KernelCheckResponse:
    params = KernelParams(lam=lam)
    bound = kernel_bound_check(params, l_value)
    residuals = {}
    for kind in KernelKind:
        coarse, fine = (kernel_pde_residual(params, n, kind, l_value=l_value) for n in RESOLUTIONS)
        residuals[kind] = (fine, math.log2(coarse / fine) if fine > 0 else 0.0)
    return KernelCheckResponse(
        lam=lam,
        l_value=l_value,
        max_p=bound.max_p,
        max_q=bound.max_q,
        bound=bound.bound,
        residual_p=residuals[KernelKind.FORWARD][0],
        residual_q=residuals[KernelKind.INVERSE][0],
        residual_order_p=residuals[KernelKind.FORWARD][1],
        residual_order_q=residuals[KernelKind.INVERSE][1],
    )


@router.get("/check", response_model=KernelCheckResponse)
async def check(
    lam: float = Query(..., gt=0, description="Target damping rate lambda"),
    l: float = Query(..., gt=0, description="Domain length"),
):
    """Empirical kernel maxima against sqrt(lam) e^(sqrt(lam) l), plus PDE residuals."""
    return await asyncio.to_thread(_check, lam, l)
