"""Mode-switching policy: intervene/cede predicates and quantile threshold tuning.

Control enters supervisor mode when a state is too novel or too risky,
and returns to autonomous mode only when both the robot/human action
discrepancy and the risk are low (hysteresis: the exit bar sits below the
entry bar). Thresholds are tuned from observed score distributions given
an intervention budget rather than hand-set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .critic import RiskCritic
from .ensemble import EnsemblePolicy, discrepancy

AUTONOMOUS = "autonomous"
SUPERVISOR = "supervisor"

CAUSE_NOVELTY = "novelty"
CAUSE_RISK = "risk"
CAUSE_EXTERNAL = "external"


@dataclass(frozen=True)
class GateThresholds:
    risk_intervene: float  # enter supervisor mode above this risk
    risk_cede: float  # return to autonomous mode below this risk
    novelty_intervene: float
    discrepancy_cede: float
    budget: float  # target fraction of timesteps that trigger a switch

    def as_dict(self) -> dict:
        return {
            "risk_intervene": self.risk_intervene,
            "risk_cede": self.risk_cede,
            "novelty_intervene": self.novelty_intervene,
            "discrepancy_cede": self.discrepancy_cede,
            "budget": self.budget,
        }


def nearest_rank_quantile(values, q: float) -> float:
    """Nearest-rank quantile: the ceil(q*n)-th order statistic (1-based), min at q=0.

    Returned thresholds are always actual observed scores, which keeps
    calibration checks exact.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("quantile of an empty list")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level {q} outside [0, 1]")
    # snap near-integer products before ceil so float error cannot shift the rank
    rank = math.ceil(round(q * vals.size, 9))
    rank = min(max(rank, 1), vals.size)
    return float(np.sort(vals)[rank - 1])


def tune_thresholds(
    risk_scores,
    novelty_scores,
    supervisor_discrepancies,
    budget: float,
) -> GateThresholds:
    """Set the switching surface from observed scores and the intervention budget.

    Intervene thresholds sit at the (1 - budget)-quantile of risk and
    novelty over states the robot policy has visited; the cede risk bar is
    the median of the same risk scores, and the cede discrepancy bar is
    the mean discrepancy on supervisor-visited states.
    """
    if len(supervisor_discrepancies) == 0:
        raise ValueError("no supervisor discrepancies to tune on")
    if not 0.0 <= budget <= 1.0:
        raise ValueError(f"budget {budget} outside [0, 1]")
    return GateThresholds(
        risk_intervene=nearest_rank_quantile(risk_scores, 1.0 - budget),
        risk_cede=nearest_rank_quantile(risk_scores, 0.5),
        novelty_intervene=nearest_rank_quantile(novelty_scores, 1.0 - budget),
        discrepancy_cede=float(np.mean(np.asarray(supervisor_discrepancies, dtype=np.float64))),
        budget=budget,
    )


def intervene_scores(
    novelty: float,
    risk: float,
    thresholds: GateThresholds,
    use_novelty: bool = True,
    use_risk: bool = True,
) -> str | None:
    """Why a switch to supervisor mode fires at these scores, or None.

    Novelty is checked first; risk only matters on non-novel states.
    """
    if use_novelty and novelty > thresholds.novelty_intervene:
        return CAUSE_NOVELTY
    if use_risk and risk > thresholds.risk_intervene:
        return CAUSE_RISK
    return None


def cede_scores(
    action_discrepancy: float,
    risk: float,
    thresholds: GateThresholds,
    use_novelty: bool = True,
    use_risk: bool = True,
) -> bool:
    """Whether supervisor mode may hand back control given current scores.

    The discrepancy clause is the supervisor-mode analog of the novelty
    check, so each ablation flag drops its clause from both predicates.
    """
    ok = True
    if use_novelty:
        ok = ok and action_discrepancy < thresholds.discrepancy_cede
    if use_risk:
        ok = ok and risk < thresholds.risk_cede
    return ok


def intervene(
    state: np.ndarray,
    ensemble: EnsemblePolicy,
    critic: RiskCritic,
    thresholds: GateThresholds,
) -> bool:
    """True iff the state's novelty or the executed action's risk exceeds its bar."""
    nov = ensemble.novelty(state)
    rk = critic.risk(state, ensemble.action(state))
    return intervene_scores(nov, rk, thresholds) is not None


def cede(
    state: np.ndarray,
    human_action: np.ndarray,
    ensemble: EnsemblePolicy,
    critic: RiskCritic,
    thresholds: GateThresholds,
) -> bool:
    """True iff the robot agrees with the human action and the state is low-risk."""
    a_r = ensemble.action(state)
    d = discrepancy(a_r, human_action)
    rk = critic.risk(state, a_r)
    return cede_scores(d, rk, thresholds)


def advance_mode(mode: str, intervene_result: bool, cede_result: bool) -> str:
    """State machine: autonomous -> supervisor on intervene, back only on cede."""
    if mode == AUTONOMOUS:
        return SUPERVISOR if intervene_result else AUTONOMOUS
    if mode == SUPERVISOR:
        return AUTONOMOUS if cede_result else SUPERVISOR
    raise ValueError(f"unknown mode {mode!r}")
