import numpy as np
import pytest

from cq_analyzer.cones import cone_member
from cq_analyzer.config import ToolConfig
from cq_analyzer.kkt import (
    MissingObjectiveError,
    compute_multipliers,
    kkt_report,
    linearized_primal_value,
    stationarity_residual,
    verify_candidate,
)
from cq_analyzer.model import ConstraintSystem, active_set, evaluate_point
from cq_analyzer.tangent import abadie_verdict

CFG = ToolConfig()


def make(objective=None, eqs=(), ins=(), variables=("x1", "x2")):
    return ConstraintSystem.from_strings("sys", variables, objective, eqs, ins)


def aset_for(sys, x0, tol=1e-8):
    return active_set(evaluate_point(sys, x0), tol)


def test_multipliers_orthant_corner():
    # min x1 + x2 s.t. -x1 <= 0, -x2 <= 0 at the origin: lambda = (1, 1).
    sys = make(objective="x1 + x2", ins=["-x1", "-x2"])
    x0 = [0.0, 0.0]
    lam = dict(compute_multipliers(sys, x0, aset_for(sys, x0), 1e-8))
    assert lam[1] == pytest.approx(1.0, abs=1e-9)
    assert lam[2] == pytest.approx(1.0, abs=1e-9)
    assert stationarity_residual(sys, x0, lam) <= 1e-12


def test_multipliers_duplicate_constraint_minimal_norm():
    # min x1 s.t. -x1 <= 0, -2 x1 <= 0 at 0: the multiplier polytope is
    # {l1 + 2 l2 = 1, l >= 0}; its minimal-norm element is (0.2, 0.4).
    sys = make(objective="x1", ins=["-x1", "-2*x1"], variables=("x1",))
    x0 = [0.0]
    report = kkt_report(sys, x0, CFG)
    lam = report.multiplier_dict()
    assert lam[1] == pytest.approx(0.2, abs=1e-8)
    assert lam[2] == pytest.approx(0.4, abs=1e-8)
    assert report.minimal_norm_selected
    assert report.stationarity <= 1e-10


def test_multipliers_sign_obstruction_empty():
    # min x1 s.t. x1 <= 0 at 0: -grad h0 = (-1) needs lambda = -1 < 0.
    sys = make(objective="x1", ins=["x1"], variables=("x1",))
    report = kkt_report(sys, [0.0], CFG)
    assert report.multipliers is None
    assert not report.dual_feasible
    assert report.primal_value == "unbounded-below"


def test_multipliers_inactive_get_zero():
    sys = make(objective="x1 + x2", ins=["-x1", "-x2", "x1 - 5"])
    x0 = [0.0, 0.0]
    lam = dict(compute_multipliers(sys, x0, aset_for(sys, x0), 1e-8))
    assert lam[3] == 0.0


def test_multipliers_equality_sign_free():
    # min -x1 s.t. circle at (1, 0): -grad h0 = (1, 0) = 0.5 * (2, 0).
    sys = make(objective="-x1", eqs=["x1^2 + x2^2 - 1"])
    report = kkt_report(sys, [1.0, 0.0], CFG)
    lam = report.multiplier_dict()
    assert lam[1] == pytest.approx(0.5, abs=1e-9)
    assert not report.minimal_norm_selected


def test_missing_objective_raises():
    sys = make(eqs=["x1"])
    with pytest.raises(MissingObjectiveError):
        kkt_report(sys, [0.0, 0.0], CFG)


def test_stationarity_zero_lambda_gives_gradient_norm():
    sys = make(objective="3*x1 + 4*x2")
    assert stationarity_residual(sys, [0.0, 0.0], {}) == pytest.approx(5.0)


def test_stationarity_perturbation_orthogonal_rows():
    # Orthogonal active rows: perturbing one multiplier by delta moves the
    # residual by exactly |delta| * |row|.
    sys = make(objective="x1 + x2", ins=["-x1", "-x2"])
    x0 = [0.0, 0.0]
    lam = dict(compute_multipliers(sys, x0, aset_for(sys, x0), 1e-8))
    base = stationarity_residual(sys, x0, lam)
    for delta in (1e-3, -2e-2):
        bumped = dict(lam)
        bumped[1] += delta
        expected = np.hypot(base, 0.0) + 0.0  # base ~ 0
        assert stationarity_residual(sys, x0, bumped) == pytest.approx(
            abs(delta), abs=1e-9
        )


def test_primal_value_zero_with_certificate():
    sys = make(objective="x1 + x2", ins=["-x1", "-x2"])
    x0 = [0.0, 0.0]
    value, certificate = linearized_primal_value(sys, x0, aset_for(sys, x0))
    assert value == "zero"
    assert dict(certificate)[1] == pytest.approx(1.0, abs=1e-9)


def test_primal_unbounded_with_descent_certificate():
    sys = make(objective="x1", ins=["x1"], variables=("x1",))
    x0 = [0.0]
    value, d = linearized_primal_value(sys, x0, aset_for(sys, x0))
    assert value == "unbounded-below"
    assert d[0] == pytest.approx(-1.0, abs=1e-9)


def test_primal_zero_objective_gradient():
    sys = make(objective="x1^2 + x2^2", eqs=["x1"])
    x0 = [0.0, 0.0]
    value, lam = linearized_primal_value(sys, x0, aset_for(sys, x0))
    assert value == "zero"
    assert all(abs(v) <= 1e-10 for _, v in lam)


def test_duality_equivalence_across_cases():
    cases = [
        make(objective="x1 + x2", ins=["-x1", "-x2"]),
        make(objective="x1", ins=["-x1", "-2*x1"], variables=("x1",)),
        make(objective="x1", ins=["x1"], variables=("x1",)),
        make(objective="-x1", eqs=["x1^2 + x2^2 - 1"]),
        make(objective="x1^2 + x2^2", eqs=["x1 + x2", "2*x1 + 2*x2"]),
    ]
    points = [[0.0, 0.0], [0.0], [0.0], [1.0, 0.0], [0.0, 0.0]]
    for sys, x0 in zip(cases, points):
        report = kkt_report(sys, x0, CFG)
        assert report.dual_feasible == (report.primal_value == "zero")
        assert report.dual_feasible == (report.multipliers is not None)


def test_complementarity_on_active_sets():
    sys = make(objective="x1 + x2", ins=["-x1", "-x2", "x1 - 5"])
    x0 = [0.0, 0.0]
    pd = evaluate_point(sys, x0)
    lam = dict(compute_multipliers(sys, x0, aset_for(sys, x0), 1e-8))
    for i in (1, 2, 3):
        assert abs(lam[i] * pd.value(i)) <= 1e-10 * (1.0 + abs(pd.value(i)))


def test_weak_duality_on_sampled_cone_directions():
    # With multipliers present, every sampled cone direction has
    # <grad h0, d> >= -tol: d = 0 is optimal for the linearized primal.
    sys = make(objective="x1 + x2", ins=["-x1", "-x2"])
    x0 = [0.0, 0.0]
    report = abadie_verdict(sys, x0, CFG)
    kkt = kkt_report(sys, x0, CFG)
    assert kkt.dual_feasible
    pd = evaluate_point(sys, x0)
    from cq_analyzer.cones import sample_cone_directions

    sample = sample_cone_directions(report.cone, 32, seed=3)
    for d in sample.directions:
        assert float(pd.objective_gradient @ d) >= -1e-9


def test_objective_scaling_scales_multipliers():
    for c in (0.1, 1.0, 10.0):
        sys = make(objective=f"{c}*(x1 + x2)", ins=["-x1", "-x2"])
        report = kkt_report(sys, [0.0, 0.0], CFG)
        lam = report.multiplier_dict()
        assert lam[1] == pytest.approx(c, rel=1e-8)
        assert lam[2] == pytest.approx(c, rel=1e-8)
        assert report.primal_value == "zero"
    for c in (0.1, 1.0, 10.0):
        sys = make(objective=f"{c}*x1", ins=["x1"], variables=("x1",))
        assert kkt_report(sys, [0.0], CFG).primal_value == "unbounded-below"


def test_verify_candidate_stationary_unconstrained_minimum():
    sys = make(objective="x1^2 + x2^2", eqs=["x1 + x2", "2*x1 + 2*x2"])
    report = verify_candidate(sys, [0.0, 0.0], CFG.with_options(assert_local_min=True))
    assert report.rcrcq.verdict == "certified-by-sampling"
    assert report.kkt.dual_feasible
    assert not report.contradiction
    lam = report.kkt.multiplier_dict()
    assert all(abs(v) <= 1e-10 for v in lam.values())


def test_verify_candidate_rank_refuted_no_contradiction():
    # min x1 over {x1^2 <= 0} = {0}: x0 = 0 is the (unique) minimizer, the
    # constant-rank hypothesis fails, and no multipliers exist; with the
    # hypothesis unmet this is not a contradiction.
    sys = make(objective="x1", ins=["x1^2"], variables=("x1",))
    report = verify_candidate(sys, [0.0], CFG.with_options(assert_local_min=True))
    assert report.rcrcq.verdict == "refuted"
    assert report.kkt.multipliers is None
    assert not report.contradiction
    assert any("refuted" in n for n in report.notes)


def test_verify_candidate_licq_all_positive():
    sys = make(objective="-x1", eqs=["x1^2 + x2^2 - 1"])
    report = verify_candidate(sys, [1.0, 0.0], CFG.with_options(assert_local_min=True))
    assert report.rcrcq.verdict == "certified-by-sampling"
    assert report.abadie.verdict == "consistent"
    assert report.kkt.dual_feasible
    assert not report.contradiction


def test_descent_certificate_is_cone_member():
    sys = make(objective="x1 + 0.5*x2", ins=["x1"], variables=("x1", "x2"))
    x0 = [0.0, 0.0]
    report = kkt_report(sys, x0, CFG)
    assert report.primal_value == "unbounded-below"
    d = np.array(report.descent_certificate)
    pd = evaluate_point(sys, x0)
    from cq_analyzer.cones import build_linearized_cone

    cone = build_linearized_cone(pd, aset_for(sys, x0))
    assert cone_member(cone, d, 1e-8)
    assert float(pd.objective_gradient @ d) < 0.0
