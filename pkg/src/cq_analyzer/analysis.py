"""Run the individual analyses over one system, capturing per-section errors.

Each section is rendered to a plain dict (the single representation both
report formats consume).  Numerical failures inside one analysis do not
abort the others: the section becomes ``{"error": ..., "error_kind": ...}``
and the exit-code mapping treats it as inconclusive.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import ToolConfig
from .dependence import ReconstructionError, classify_dependence, image_dimension_probe
from .expr import DomainEvaluationError
from .kkt import MissingObjectiveError, kkt_report
from .model import ConstraintDomainError, ConstraintSystem, active_set, evaluate_point
from .rank import SubsetGuardError, check_rcrcq
from .tangent import InfeasibleBasePointError, abadie_verdict

__all__ = ["ALL_ANALYSES", "exit_code_for", "run_analyses", "summary_line"]

ALL_ANALYSES = ("rcrcq", "abadie", "dependence", "kkt")

_CAPTURED = (
    ConstraintDomainError,
    DomainEvaluationError,
    ReconstructionError,
    SubsetGuardError,
    InfeasibleBasePointError,
    MissingObjectiveError,
)


def _run_rcrcq(sys: ConstraintSystem, x0: np.ndarray, cfg: ToolConfig) -> dict:
    pd = evaluate_point(sys, x0)
    aset = active_set(pd, cfg.tol_active)
    return check_rcrcq(sys, x0, aset, cfg.sampler(x0), cfg.tol_rank).to_dict()


def _run_abadie(sys: ConstraintSystem, x0: np.ndarray, cfg: ToolConfig) -> dict:
    return abadie_verdict(sys, x0, cfg).to_dict()


def _run_dependence(sys: ConstraintSystem, x0: np.ndarray, cfg: ToolConfig) -> dict:
    functions = list(sys.all_constraints)
    if not functions:
        return {"error": "the system has no constraint functions", "error_kind": "empty"}
    from .dependence import FitConfig

    sampler = cfg.sampler(x0)
    verdict = classify_dependence(
        functions, x0, sampler, cfg.tol_rank,
        FitConfig(degree=cfg.fit_degree, tolerance_rel=cfg.fit_tolerance_rel),
    )
    section = verdict.to_dict()
    section["image_dimension"] = image_dimension_probe(
        functions, x0, sampler, cfg.tol_rank
    )
    return section


def _run_kkt(sys: ConstraintSystem, x0: np.ndarray, cfg: ToolConfig) -> dict:
    return kkt_report(sys, x0, cfg).to_dict()


_RUNNERS = {
    "rcrcq": _run_rcrcq,
    "abadie": _run_abadie,
    "dependence": _run_dependence,
    "kkt": _run_kkt,
}


def run_analyses(
    sys: ConstraintSystem,
    x0: Sequence[float],
    cfg: ToolConfig,
    which: Sequence[str],
) -> dict:
    x0 = np.asarray(x0, dtype=float)
    sections: dict = {}
    for name in which:
        if name not in _RUNNERS:
            raise ValueError(f"unknown analysis '{name}'")
        try:
            sections[name] = _RUNNERS[name](sys, x0, cfg)
        except _CAPTURED as err:
            sections[name] = {"error": str(err), "error_kind": type(err).__name__}
    return sections


def _section_code(name: str, section: Optional[dict]) -> int:
    if section is None:
        return 0
    if "error" in section:
        return 2
    if name == "rcrcq":
        return {"certified-by-sampling": 0, "refuted": 1, "inconclusive": 2}[
            section["verdict"]
        ]
    if name == "abadie":
        return {"consistent": 0, "violated": 1, "inconclusive": 2}[section["verdict"]]
    if name == "dependence":
        return {
            "independent": 0,
            "dependent-with-relation": 0,
            "crc-failed-inconclusive": 2,
        }[section["sense"]]
    if name == "kkt":
        return 0 if section["dual_feasible"] else 1
    return 0


def exit_code_for(sections: dict) -> int:
    """0 = certified/consistent, 1 = refuted/violated, 2 = inconclusive."""
    codes = [_section_code(name, section) for name, section in sections.items()]
    if 1 in codes:
        return 1
    if 2 in codes:
        return 2
    return 0


def summary_line(sections: dict) -> str:
    parts = []
    for name, section in sections.items():
        if section is None:
            continue
        if "error" in section:
            parts.append(f"{name}=error")
        elif name == "kkt":
            parts.append(
                f"kkt={'multipliers-exist' if section['dual_feasible'] else 'dual-infeasible'}"
            )
        elif name == "dependence":
            parts.append(f"dependence={section['sense']}")
        else:
            parts.append(f"{name}={section['verdict']}")
    return " ".join(parts)
