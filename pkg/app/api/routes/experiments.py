from fastapi import APIRouter, HTTPException

from app.schemas.report import ExperimentReport, RunRequest, ScheduleRequest, ScheduleResponse
from app.services.experiment import run_experiment
from app.services.network import Network
from app.services.scenario import ScenarioError, parse_scenario, with_overrides

router = APIRouter()


@router.post(
    "/runs",
    response_model=ExperimentReport,
    summary="Run an experiment",
    description="Simulate the scenario for each seed and return per-run flow statistics and the cross-seed summary. "
    "Nothing is written to disk.",
)
def create_run(body: RunRequest):
    try:
        scenario = with_overrides(parse_scenario(body.scenario), duration=body.duration)
        seeds = body.seeds or [scenario.seed]
        return run_experiment(scenario, seeds)
    except ScenarioError as e:
        raise HTTPException(status_code=422, detail={"message": str(e), "line": e.line})
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post(
    "/schedule",
    response_model=ScheduleResponse,
    summary="Dump the base schedule",
    description="Build the scenario's base slotframe (shared cells and best-effort staircase) and render it as a grid.",
)
def dump_schedule(body: ScheduleRequest):
    try:
        network = Network(parse_scenario(body.scenario))
    except ScenarioError as e:
        raise HTTPException(status_code=422, detail={"message": str(e), "line": e.line})
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    slotframe = network.slotframe
    return ScheduleResponse(
        slotframe_length=slotframe.length, channel_count=slotframe.channel_count, grid=slotframe.render_grid()
    )
