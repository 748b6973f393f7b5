#!/usr/bin/env python3
"""
HTTP surface for interactive use of the simulator.
Responses for failures use the {"success": false, "error": {...}} envelope.
"""
import logging
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import ConfigError, ParameterError, SlackReclaimError
from .experiment import ExperimentConfig, check_orderings, run
from .powermodel import PRESET_TABLES, preset, resolve_cpu
from .reclaim import Algorithm, reclaim_schedule
from .report import summary_tables
from .scheduler import Priority, list_schedule, slack_windows
from .settings import settings
from .taskgraph import STRUCTURED_COMM, TaskGraph, gen_gauss_jordan, gen_lu, gen_random, levels_for_size

logging.basicConfig(level=str(settings.get_config("log_level")).upper())
logger = logging.getLogger(__name__)

SERVICE_NAME = "slackreclaim"

app = FastAPI(title="Slack Reclamation Simulator", version=__version__)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class GenerateRequest(BaseModel):
    family: str = Field(default="random", pattern="^(random|lu|gauss_jordan)$")
    size: Optional[int] = Field(default=None, ge=1)
    levels: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    comm: Optional[float] = Field(default=None, ge=0)
    jitter: bool = False


class ScheduleRequest(BaseModel):
    graph: TaskGraph
    n_processors: int = Field(ge=1)
    priority: Priority = Priority.FIFO
    cpu: str = Field(default_factory=lambda: settings.get_config("cpu"))


class ReclaimRequest(ScheduleRequest):
    algorithm: Algorithm = Algorithm.MFS


def _error(status: int, error: SlackReclaimError) -> JSONResponse:
    return JSONResponse(status_code=status, content={"success": False, "error": error.to_dict()})


@app.exception_handler(SlackReclaimError)
async def simulator_error_handler(request: Request, exc: SlackReclaimError) -> JSONResponse:
    logger.warning(f"{request.method} {request.url.path}: {exc.code} {exc.message}")
    return _error(422 if isinstance(exc, ConfigError) else 400, exc)


@app.exception_handler(RequestValidationError)
async def request_error_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
    first = exc.errors()[0] if exc.errors() else {"loc": (), "msg": "invalid request"}
    field = ".".join(str(part) for part in first["loc"])
    return _error(422, ConfigError(f"{field}: {first['msg']}"))


@app.get("/health")
async def health():
    return {
        "service": SERVICE_NAME,
        "status": "healthy",
        "version": __version__,
        "presets": sorted(PRESET_TABLES),
    }


@app.get("/presets/{name}")
async def get_preset(name: str):
    return preset(name).model_dump()


@app.post("/graphs/generate")
def generate_graph(body: GenerateRequest):
    if body.family == "random":
        if body.size is None:
            raise ParameterError("random graphs need 'size'")
        graph = gen_random(body.size, body.seed)
    else:
        if body.levels is None and body.size is None:
            raise ParameterError("structured graphs need 'levels' or 'size'")
        levels = body.levels or levels_for_size(body.size)
        comm = body.comm if body.comm is not None else STRUCTURED_COMM
        generator = gen_lu if body.family == "lu" else gen_gauss_jordan
        graph = generator(levels, comm=comm, seed=body.seed if body.jitter else None)
    return graph.model_dump(mode="json")


@app.post("/schedule")
def schedule_graph(body: ScheduleRequest):
    model = resolve_cpu(body.cpu)
    schedule = list_schedule(body.graph, body.n_processors, model, body.priority)
    windows = slack_windows(schedule, body.graph)
    return {
        "success": True,
        "schedule": schedule.model_dump(mode="json"),
        "windows": [window.model_dump(mode="json") for window in windows],
    }


@app.post("/reclaim")
def reclaim(body: ReclaimRequest):
    model = resolve_cpu(body.cpu)
    schedule = list_schedule(body.graph, body.n_processors, model, body.priority)
    baseline = reclaim_schedule(schedule, body.graph, model, Algorithm.NONE)
    reclaimed = reclaim_schedule(schedule, body.graph, model, body.algorithm)
    reclaimed.revalidate(body.graph)
    return {
        "success": True,
        "reclaimed": reclaimed.model_dump(mode="json"),
        "baseline_energy": baseline.total_energy,
        "savings_pct": 100.0 * (1.0 - reclaimed.total_energy / baseline.total_energy),
    }


def _table_payload(tables) -> Dict[str, List[Dict[str, Any]]]:
    return {name: frame.reset_index().to_dict("records") for name, frame in tables.items()}


@app.post("/experiments")
def run_experiment(config: ExperimentConfig):
    if config.output_csv is not None:
        raise ConfigError("output_csv is not accepted over HTTP")
    result = run(config)
    orderings = check_orderings(result)
    return {
        "success": True,
        "records": [record.model_dump(mode="json") for record in result.records],
        "failures": [failure.model_dump() for failure in result.failures],
        "summary": _table_payload(summary_tables(result)),
        "orderings": orderings.model_dump(),
    }


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host=settings.get_config("host"), port=settings.get_int("port"))
