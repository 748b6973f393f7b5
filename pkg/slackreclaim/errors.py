#!/usr/bin/env python3
"""
Error types for the slack reclamation simulator.
Every error carries a machine readable code, same envelope as the HTTP layer.
"""
from typing import Any, Dict, List, Optional


class SlackReclaimError(Exception):
    code = "SLACKRECLAIM_ERROR"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message}


class ParameterError(SlackReclaimError, ValueError):
    code = "INVALID_PARAMETER"


class ConfigError(SlackReclaimError):
    code = "CONFIG_INVALID"


class GraphFormatError(SlackReclaimError):
    """Malformed graph file; names the offending line and/or field."""
    code = "GRAPH_FORMAT"

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class GraphValidationError(SlackReclaimError):
    code = "GRAPH_INVALID"


class CycleError(GraphValidationError):
    code = "GRAPH_CYCLE"

    def __init__(self, cycle: List[int]):
        path = " -> ".join(str(node) for node in cycle)
        super().__init__(f"task graph contains a cycle: {path}")
        self.cycle = cycle


class DegenerateFitError(SlackReclaimError):
    code = "DEGENERATE_FIT"


class InfeasibleWindowError(SlackReclaimError):
    code = "INFEASIBLE_WINDOW"


class LPInfeasibleError(SlackReclaimError):
    code = "LP_INFEASIBLE"

    def __init__(self, message: str, side: str):
        super().__init__(message)
        self.side = side


class ScheduleViolationError(SlackReclaimError):
    code = "SCHEDULE_VIOLATION"


class TaskReclaimError(SlackReclaimError):
    code = "TASK_RECLAIM"

    def __init__(self, task_id: int, cause: SlackReclaimError):
        super().__init__(f"task {task_id}: {cause.message}")
        self.task_id = task_id
        self.cause = cause

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        payload["task_id"] = self.task_id
        payload["cause"] = self.cause.code
        return payload
