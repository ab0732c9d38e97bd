from app.schemas.report import (
    ExperimentReport,
    FlowStats,
    RunReport,
    RunRequest,
    ScheduleRequest,
    ScheduleResponse,
)
from app.schemas.scenario import Mode, Scenario

__all__ = [
    "ExperimentReport",
    "FlowStats",
    "Mode",
    "RunReport",
    "RunRequest",
    "Scenario",
    "ScheduleRequest",
    "ScheduleResponse",
]
