"""Lagrange multipliers and the linearized primal/dual pair at a candidate point.

Multipliers are the coefficients expressing -grad h_0(x0) over the active
gradient rows with non-negative weights on inequalities; inactive
inequalities receive zero (complementary slackness).  When the active rows
are dependent the multiplier set is a polytope and its minimal-Euclidean-norm
element is returned, flagged as such.

The linearized primal minimizes <grad h_0(x0), d> over the linearized cone.
Its value is zero exactly when the multiplier decomposition exists (the dual
is feasible); otherwise it is unbounded below and an explicit descent
certificate d in the cone with <grad h_0, d> < 0 is produced and verified
before being reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cones import (
    ConeCoefficients,
    build_linearized_cone,
    cone_member,
    dual_cone_member,
    dual_cone_residual_direction,
)
from .config import ToolConfig
from .model import (
    ActiveSet,
    ConstraintSystem,
    active_set,
    evaluate_point,
    feasibility_check,
)
from .rank import RcrcqReport, numerical_rank
from .tangent import AbadieReport, abadie_verdict

__all__ = [
    "CandidateReport",
    "KktReport",
    "MissingObjectiveError",
    "compute_multipliers",
    "kkt_report",
    "linearized_primal_value",
    "stationarity_residual",
    "verify_candidate",
]

PRIMAL_ZERO = "zero"
PRIMAL_UNBOUNDED = "unbounded-below"


class MissingObjectiveError(ValueError):
    """The analysis needs an objective and the system has none."""


@dataclass(frozen=True)
class KktReport:
    """Multiplier existence, stationarity residual, and the linearized LP pair."""

    multipliers: Optional[tuple[tuple[int, float], ...]]  # all constraints, index order
    active_coefficients: Optional[ConeCoefficients]
    stationarity: float            # ||grad h0 + sum lambda_i grad h_i|| at the result
    dual_feasible: bool
    primal_value: str              # "zero" | "unbounded-below"
    descent_certificate: Optional[tuple[float, ...]]
    descent_slope: Optional[float]  # <grad h0, d> for the certificate
    minimal_norm_selected: bool
    active_indices: tuple[int, ...]
    tolerance_used: float

    def multiplier_dict(self) -> Optional[dict[int, float]]:
        return dict(self.multipliers) if self.multipliers is not None else None

    def to_dict(self) -> dict:
        return {
            "dual_feasible": self.dual_feasible,
            "multipliers": (
                {str(i): v for i, v in self.multipliers}
                if self.multipliers is not None
                else None
            ),
            "stationarity_residual": self.stationarity,
            "primal_value": self.primal_value,
            "descent_certificate": (
                list(self.descent_certificate)
                if self.descent_certificate is not None
                else None
            ),
            "descent_slope": self.descent_slope,
            "minimal_norm_selected": self.minimal_norm_selected,
            "active_indices": list(self.active_indices),
            "tolerance_used": self.tolerance_used,
        }


def compute_multipliers(
    sys: ConstraintSystem, x0: Sequence[float], aset: ActiveSet, tol: float
) -> Optional[tuple[tuple[int, float], ...]]:
    """Full multiplier vector at x0, or None when the dual cone excludes -grad h0.

    Coefficients over inactive inequalities are set to zero.  With dependent
    active rows the minimal-norm element of the multiplier polytope is
    returned.
    """
    report = kkt_report_for_active_set(sys, x0, aset, tol)
    return report.multipliers


def kkt_report_for_active_set(
    sys: ConstraintSystem, x0: Sequence[float], aset: ActiveSet, tol: float
) -> KktReport:
    if sys.objective is None:
        raise MissingObjectiveError("the constraint system has no objective")
    x0 = np.asarray(x0, dtype=float)
    pd = evaluate_point(sys, x0)
    cone = build_linearized_cone(pd, aset)
    target = -pd.objective_gradient
    coeffs = dual_cone_member(cone, target, tol)

    active_rows_idx = cone.eq_indices + cone.ineq_indices
    if active_rows_idx:
        rows = np.vstack([cone.eq_rows, cone.ineq_rows])
        unique = numerical_rank(rows, tol).rank == rows.shape[0]
    else:
        unique = True

    if coeffs is None:
        residual_dir = dual_cone_residual_direction(cone, target)
        norm = float(np.linalg.norm(residual_dir))
        d = residual_dir / norm
        slope = float(pd.objective_gradient @ d)
        # The certificate is only reported once verified explicitly.
        if not cone_member(cone, d, tol) or slope >= 0.0:
            raise RuntimeError(
                "internal error: descent certificate failed verification "
                f"(member={cone_member(cone, d, tol)}, slope={slope})"
            )
        return KktReport(
            multipliers=None,
            active_coefficients=None,
            stationarity=norm,
            dual_feasible=False,
            primal_value=PRIMAL_UNBOUNDED,
            descent_certificate=tuple(float(v) for v in d),
            descent_slope=slope,
            minimal_norm_selected=False,
            active_indices=tuple(aset.indices),
            tolerance_used=tol,
        )

    lam = coeffs.as_dict()
    full = tuple(
        (i, float(lam.get(i, 0.0))) for i in range(1, sys.n_constraints + 1)
    )
    total = pd.objective_gradient.copy()
    for i, v in full:
        total = total + v * pd.row(i)
    stationarity = float(np.linalg.norm(total))
    return KktReport(
        multipliers=full,
        active_coefficients=coeffs,
        stationarity=stationarity,
        dual_feasible=True,
        primal_value=PRIMAL_ZERO,
        descent_certificate=None,
        descent_slope=None,
        minimal_norm_selected=not unique,
        active_indices=tuple(aset.indices),
        tolerance_used=tol,
    )


def kkt_report(sys: ConstraintSystem, x0: Sequence[float], cfg: ToolConfig) -> KktReport:
    """KKT analysis with the active set taken at cfg.tol_active."""
    pd = evaluate_point(sys, np.asarray(x0, dtype=float))
    aset = active_set(pd, cfg.tol_active)
    return kkt_report_for_active_set(sys, x0, aset, cfg.tol_cone)


def stationarity_residual(
    sys: ConstraintSystem, x0: Sequence[float], lam: dict[int, float] | Sequence[tuple[int, float]]
) -> float:
    """||grad h0(x0) + sum_i lambda_i grad h_i(x0)||_2 for given multipliers."""
    if sys.objective is None:
        raise MissingObjectiveError("the constraint system has no objective")
    pairs = dict(lam).items() if not isinstance(lam, dict) else lam.items()
    pd = evaluate_point(sys, np.asarray(x0, dtype=float))
    total = pd.objective_gradient.copy()
    for i, v in pairs:
        total = total + v * pd.row(i)
    return float(np.linalg.norm(total))


def linearized_primal_value(
    sys: ConstraintSystem, x0: Sequence[float], aset: ActiveSet, tol: float = 1e-8
) -> tuple[str, object]:
    """("zero", multipliers) or ("unbounded-below", descent direction d).

    The primal minimizes <grad h0(x0), d> over the linearized cone; d = 0 is
    optimal exactly when the dual decomposition of -grad h0 exists.
    """
    report = kkt_report_for_active_set(sys, x0, aset, tol)
    if report.primal_value == PRIMAL_ZERO:
        return PRIMAL_ZERO, report.multipliers
    return PRIMAL_UNBOUNDED, report.descent_certificate


@dataclass(frozen=True)
class CandidateReport:
    """Bundled RCRCQ / Abadie / KKT verdicts for one candidate point."""

    rcrcq: RcrcqReport
    abadie: AbadieReport
    kkt: Optional[KktReport]
    assert_local_min: bool
    contradiction: bool
    notes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "rcrcq": self.rcrcq.to_dict(),
            "abadie": self.abadie.to_dict(),
            "kkt": self.kkt.to_dict() if self.kkt is not None else None,
            "assert_local_min": self.assert_local_min,
            "contradiction": self.contradiction,
            "notes": list(self.notes),
        }


def verify_candidate(
    sys: ConstraintSystem, x0: Sequence[float], cfg: ToolConfig
) -> CandidateReport:
    """Bundle the three analyses and check the asserted-minimum implication.

    If the constant-rank qualification is certified and the caller asserts
    x0 is a local minimum, multipliers must exist; their absence is flagged
    as a contradiction (it indicts the assertion, the sampling, or the
    tolerances, and the note says so).  The local-minimum property itself is
    never verified here.
    """
    x0 = np.asarray(x0, dtype=float)
    pd = evaluate_point(sys, x0)
    feas = feasibility_check(pd, cfg.tol_feas)
    if not feas.feasible:
        raise ValueError(f"candidate point infeasible: violations {feas.violations}")
    abadie = abadie_verdict(sys, x0, cfg)
    rcrcq = abadie.rcrcq
    kkt = kkt_report(sys, x0, cfg) if sys.objective is not None else None

    notes = []
    contradiction = False
    if kkt is not None and cfg.assert_local_min:
        if rcrcq.verdict == "certified-by-sampling" and not kkt.dual_feasible:
            contradiction = True
            notes.append(
                "constant rank certified and the point is asserted to be a "
                "local minimum, yet no multipliers exist: the assertion, the "
                "sampling, or the tolerances must be wrong"
            )
    if kkt is not None and not kkt.dual_feasible and rcrcq.verdict == "refuted":
        notes.append(
            "no multipliers and the constant-rank qualification is refuted: "
            "multiplier existence is not implied for this point"
        )
    return CandidateReport(
        rcrcq=rcrcq,
        abadie=abadie,
        kkt=kkt,
        assert_local_min=cfg.assert_local_min,
        contradiction=contradiction,
        notes=tuple(notes),
    )
