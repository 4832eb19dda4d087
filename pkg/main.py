import logging
import os

from dotenv import load_dotenv
from fastapi import FastAPI, Request, status
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

load_dotenv()

logging.basicConfig(level=os.getenv("HEATLAB_LOG_LEVEL", "INFO").upper())

from exceptions import ConfigError, DivergenceError, DomainError, KernelRangeError
from routers import kernel, simulate

app = FastAPI(title="Growing-Domain Heat Equation Lab")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": jsonable_encoder(exc.errors())},
    )


@app.exception_handler(ConfigError)
@app.exception_handler(DomainError)
@app.exception_handler(KernelRangeError)
async def rejected_input_handler(request: Request, exc: Exception):
    return JSONResponse(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, content={"detail": str(exc)})


@app.exception_handler(DivergenceError)
async def divergence_handler(request: Request, exc: DivergenceError):
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": str(exc), "t": exc.t},
    )


app.include_router(simulate.router, prefix="/simulate", tags=["simulate"])
app.include_router(kernel.router, prefix="/kernel", tags=["kernel"])


@app.get("/")
async def root():
    return {"status": "ok"}
