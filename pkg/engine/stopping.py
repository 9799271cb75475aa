"""Inner-to-outer transitions and run termination."""

from dataclasses import dataclass
from utils.compat import StrEnum

from engine.config import EngineConfig
from engine.state import EngineState
from models.core import ResidualReport
from models.errors import ParameterError


class Decision(StrEnum):
    """What the engine does after a sweep."""

    CONTINUE_INNER = "continue-inner"
    GO_OUTER = "go-outer"
    TERMINATE = "terminate"


class RunStatus(StrEnum):
    """Why a run ended. RUNNING only appears on non-terminal verdicts."""

    RUNNING = "running"
    OPTIMAL = "optimal"
    BUDGET = "budget"
    MAX_OUTER = "max_outer"


@dataclass(frozen=True)
class StopVerdict:
    decision: Decision
    status: RunStatus = RunStatus.RUNNING


def inner_satisfied(report: ResidualReport, k: int, v: int, cfg: EngineConfig) -> bool:
    """Whether the inner loop of outer iteration k may end after sweep v.

    B1 and B2 wait for the dual residual, B3 and B4 also stop at their sweep cap.
    """
    dual = report.dual_inf_norm
    match cfg.criterion:
        case "B1":
            return dual <= cfg.eps_dual
        case "B2":
            return dual <= cfg.eps_dual_at(k)
        case "B3":
            return v >= cfg.vmax_at(k) or dual <= cfg.eps_dual
        case "B4":
            return v >= cfg.vmax or dual <= cfg.eps_dual
    raise ParameterError(f"Unknown stopping criterion: {cfg.criterion}")


def stopping_check(state: EngineState, cfg: EngineConfig) -> StopVerdict:
    """Decide the next step from the residuals of the latest sweep.

    Args:
        state: State whose residuals were measured after the latest sweep
        cfg: Engine settings holding the tolerances and limits

    Returns:
        StopVerdict: TERMINATE with a final status, GO_OUTER, or CONTINUE_INNER

    Raises:
        ParameterError: The state carries no residuals
    """
    report = state.residuals
    if report is None:
        raise ParameterError("stopping_check needs residuals for the current sweep")
    # budget wins ties
    if state.total_inner >= cfg.max_total_inner:
        return StopVerdict(Decision.TERMINATE, RunStatus.BUDGET)
    if report.primal_inf_norm <= cfg.eps_pri and report.dual_inf_norm <= cfg.eps_dual:
        return StopVerdict(Decision.TERMINATE, RunStatus.OPTIMAL)
    if inner_satisfied(report, state.k, state.v, cfg):
        if state.k >= cfg.max_outer:
            return StopVerdict(Decision.TERMINATE, RunStatus.MAX_OUTER)
        return StopVerdict(Decision.GO_OUTER)
    return StopVerdict(Decision.CONTINUE_INNER)
