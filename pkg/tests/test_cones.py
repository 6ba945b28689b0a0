import itertools

import numpy as np
import pytest
from numpy.random import PCG64, Generator

from cq_analyzer.cones import (
    LinearizedCone,
    build_linearized_cone,
    cone_member,
    dual_cone_member,
    dual_cone_residual_direction,
    kernel_basis,
    nonneg_lstsq,
    sample_cone_directions,
)
from cq_analyzer.model import ConstraintSystem, active_set, evaluate_point


def make_cone(eq_rows, ineq_rows, n=None):
    eq = np.asarray(eq_rows, dtype=float).reshape(len(eq_rows), -1) if eq_rows else None
    ineq = (
        np.asarray(ineq_rows, dtype=float).reshape(len(ineq_rows), -1)
        if ineq_rows
        else None
    )
    if n is None:
        n = (eq if eq is not None else ineq).shape[1]
    return LinearizedCone(
        eq_rows=eq if eq is not None else np.zeros((0, n)),
        ineq_rows=ineq if ineq is not None else np.zeros((0, n)),
        eq_indices=tuple(range(1, (len(eq_rows) if eq_rows else 0) + 1)),
        ineq_indices=tuple(
            range(
                (len(eq_rows) if eq_rows else 0) + 1,
                (len(eq_rows) if eq_rows else 0) + (len(ineq_rows) if ineq_rows else 0) + 1,
            )
        ),
        base_point=np.zeros(n),
    )


def cone_from_system(eqs=(), ins=(), variables=("x1", "x2"), x0=(0.0, 0.0)):
    sys = ConstraintSystem.from_strings("sys", variables, None, eqs, ins)
    pd = evaluate_point(sys, list(x0))
    return build_linearized_cone(pd, active_set(pd, 1e-8))


# ---------------------------------------------------------------------------
# build / membership
# ---------------------------------------------------------------------------


def test_build_no_constraints_gives_whole_space():
    cone = cone_from_system()
    assert cone.eq_rows.shape == (0, 2)
    assert cone.ineq_rows.shape == (0, 2)
    assert cone_member(cone, [3.0, -4.0], 1e-8)


def test_build_keeps_zero_row_for_x_squared():
    cone = cone_from_system(ins=["x^2"], variables=("x",), x0=(0.0,))
    assert cone.ineq_rows.shape == (1, 1)
    assert cone.ineq_rows[0, 0] == 0.0
    # Gamma = R: every direction is a member.
    assert cone_member(cone, [1.0], 1e-8)
    assert cone_member(cone, [-1.0], 1e-8)


def test_build_excludes_inactive_rows():
    cone = cone_from_system(eqs=["x1"], ins=["x2", "x1 - 5"])
    assert cone.eq_indices == (1,)
    assert cone.ineq_indices == (2,)
    assert np.array_equal(cone.eq_rows, [[1.0, 0.0]])
    assert np.array_equal(cone.ineq_rows, [[0.0, 1.0]])


def test_member_zero_direction_always():
    cone = make_cone([[1.0, 1.0]], [[0.0, -1.0]])
    assert cone_member(cone, [0.0, 0.0], 1e-8)


def test_member_equality_row_hand_values():
    cone = make_cone([[1.0, 1.0]], [])
    assert cone_member(cone, [1.0, -1.0], 1e-8)
    assert not cone_member(cone, [1.0, 0.0], 1e-8)


def test_member_closed_under_scaling_and_addition():
    cone = make_cone([[1.0, 1.0, 0.0]], [[0.0, 0.0, 1.0], [-1.0, 1.0, 0.0]])
    rng = Generator(PCG64(3))
    members = []
    while len(members) < 20:
        d = rng.standard_normal(3)
        d[1] = -d[0] if rng.uniform() < 0.5 else d[1]
        if cone_member(cone, d, 1e-8):
            members.append(d)
    for d in members:
        for factor in (0.0, 0.5, 2.0, 10.0):
            assert cone_member(cone, factor * d, 1e-8)
    for d1, d2 in itertools.combinations(members[:8], 2):
        assert cone_member(cone, d1 + d2, 1e-8)


# ---------------------------------------------------------------------------
# nonneg_lstsq against a brute-force active-set enumeration oracle
# ---------------------------------------------------------------------------


def nnls_oracle(a, b):
    """Exact NNLS by enumerating all sign-support sets (tiny instances only)."""
    m, n = a.shape
    best = (np.zeros(n), np.linalg.norm(b))
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            cols = list(support)
            sol, *_ = np.linalg.lstsq(a[:, cols], b, rcond=None)
            if np.any(sol < -1e-12):
                continue
            x = np.zeros(n)
            x[cols] = np.clip(sol, 0.0, None)
            r = np.linalg.norm(b - a @ x)
            if r < best[1] - 1e-12:
                best = (x, r)
    return best


def test_nnls_frozen_instance():
    # Unconstrained solution (-0.5, 3); clipping the first coordinate gives
    # x = (0, 3) with residual 1 (checked by hand).
    a = np.array([[2.0, 0.0], [0.0, 1.0]])
    b = np.array([-1.0, 3.0])
    x, rnorm = nonneg_lstsq(a, b)
    assert np.allclose(x, [0.0, 3.0], atol=1e-12)
    assert rnorm == pytest.approx(1.0, abs=1e-12)


def test_nnls_matches_enumeration_oracle():
    rng = Generator(PCG64(99))
    for k in range(60):
        m, n = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        a = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
        x, rnorm = nonneg_lstsq(a, b)
        assert np.all(x >= 0.0)
        _, oracle_norm = nnls_oracle(a, b)
        assert rnorm <= oracle_norm + 1e-9, (k, a, b, x)


def test_nnls_zero_rhs():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    x, rnorm = nonneg_lstsq(a, np.zeros(2))
    assert np.array_equal(x, np.zeros(2))
    assert rnorm == 0.0


# ---------------------------------------------------------------------------
# dual_cone_member
# ---------------------------------------------------------------------------


def test_dual_member_zero_vector():
    cone = make_cone([[1.0, 0.0]], [[0.0, -1.0]])
    coeffs = dual_cone_member(cone, [0.0, 0.0], 1e-8)
    assert coeffs is not None
    assert all(abs(v) <= 1e-10 for _, v in coeffs.values)


def test_dual_member_hand_expansion():
    cone = make_cone([], [[-1.0, 0.0], [0.0, -1.0]])
    coeffs = dual_cone_member(cone, [-1.0, -1.0], 1e-8)
    assert coeffs is not None
    lam = coeffs.as_dict()
    assert lam[1] == pytest.approx(1.0, abs=1e-9)
    assert lam[2] == pytest.approx(1.0, abs=1e-9)


def test_dual_member_sign_obstruction():
    cone = make_cone([], [[-1.0, 0.0]])
    assert dual_cone_member(cone, [1.0, 0.0], 1e-8) is None


def test_dual_member_minimal_norm_duplicate_rows():
    # rows (-1) and (-2); v = -1 has solutions {l1 + 2 l2 = 1, l >= 0};
    # min |l| is the projection (0.2, 0.4) (closed form; grid-checked below).
    cone = make_cone([], [[-1.0], [-2.0]])
    coeffs = dual_cone_member(cone, [-1.0], 1e-8)
    lam = coeffs.as_dict()
    assert lam[1] == pytest.approx(0.2, abs=1e-8)
    assert lam[2] == pytest.approx(0.4, abs=1e-8)
    grid = [(l1, (1.0 - l1) / 2.0) for l1 in np.linspace(0.0, 1.0, 2001)]
    best = min(grid, key=lambda p: p[0] ** 2 + p[1] ** 2)
    assert best[0] == pytest.approx(lam[1], abs=1e-3)


def test_dual_member_free_equality_coefficient():
    cone = make_cone([[2.0, 0.0]], [])
    coeffs = dual_cone_member(cone, [-1.0, 0.0], 1e-8)
    assert coeffs is not None
    assert coeffs.as_dict()[1] == pytest.approx(-0.5, abs=1e-9)


def test_dual_member_no_rows():
    cone = make_cone([], [], n=2)
    assert dual_cone_member(cone, [0.0, 0.0], 1e-8) is not None
    assert dual_cone_member(cone, [1.0, 0.0], 1e-8) is None


def corpus_cones():
    from cq_analyzer.corpus import CORPUS, load_case
    from cq_analyzer.model import ConstraintDomainError

    cones = []
    for name in sorted(CORPUS):
        _, pf = load_case(name)
        sys = pf.to_system()
        try:
            pd = evaluate_point(sys, pf.x0)
        except ConstraintDomainError:
            continue
        cones.append(build_linearized_cone(pd, active_set(pd, 1e-8)))
    return cones


def test_farkas_consistency_property():
    # Whenever v decomposes over the rows, <v, d> <= tol for every sampled
    # member d of the cone; checked on hand-made cones and every corpus cone.
    cones = [
        make_cone([[1.0, 1.0, 0.0]], [[0.0, 0.0, 1.0]]),
        make_cone([], [[-1.0, 0.0], [0.0, -1.0]]),
        make_cone([[1.0, 0.0]], [[0.0, -1.0]]),
    ] + corpus_cones()
    rng = Generator(PCG64(21))
    for cone in cones:
        n = cone.dimension
        sample = sample_cone_directions(cone, 24, seed=5)
        for _ in range(100):
            v = rng.standard_normal(n)
            coeffs = dual_cone_member(cone, v, 1e-8)
            if coeffs is None:
                continue
            for d in sample.directions:
                assert float(v @ d) <= 1e-6


def test_residual_direction_certifies_exclusion():
    cone = make_cone([], [[-1.0, 0.0]])
    v = np.array([1.0, 0.5])
    assert dual_cone_member(cone, v, 1e-8) is None
    r = dual_cone_residual_direction(cone, v)
    assert np.linalg.norm(r) > 1e-6
    assert cone_member(cone, r / np.linalg.norm(r), 1e-8)
    assert float(v @ r) > 0.0


# ---------------------------------------------------------------------------
# kernel_basis
# ---------------------------------------------------------------------------


def test_kernel_single_unit_row():
    basis = kernel_basis(np.array([[1.0, 0.0]]), 1e-8)
    assert basis.shape == (1, 2)
    assert abs(basis[0] @ np.array([0.0, 1.0])) == pytest.approx(1.0, abs=1e-12)


def test_kernel_dependent_rows():
    basis = kernel_basis(np.array([[1.0, 1.0], [2.0, 2.0]]), 1e-8)
    assert basis.shape == (1, 2)
    expected = np.array([1.0, -1.0]) / np.sqrt(2.0)
    assert abs(basis[0] @ expected) == pytest.approx(1.0, abs=1e-12)


def test_kernel_full_rank_empty():
    assert kernel_basis(np.eye(3), 1e-8).shape == (0, 3)


def test_kernel_empty_rows_identity():
    assert np.array_equal(kernel_basis(np.zeros((0, 3)), 1e-8), np.eye(3))


def test_kernel_orthogonal_to_rows():
    rng = Generator(PCG64(31))
    for _ in range(30):
        rows = rng.standard_normal((2, 4))
        rows[1] = 2 * rows[0] if rng.uniform() < 0.3 else rows[1]
        basis = kernel_basis(rows, 1e-8)
        sigma_max = np.linalg.svd(rows, compute_uv=False)[0]
        for vec in basis:
            assert np.max(np.abs(rows @ vec)) <= 1e-8 * sigma_max
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# sample_cone_directions
# ---------------------------------------------------------------------------


def test_sample_whole_space():
    cone = make_cone([], [], n=3)
    sample = sample_cone_directions(cone, 10, seed=42)
    assert len(sample.directions) == 10
    assert not sample.trivial
    for d in sample.directions:
        assert cone_member(cone, d, 1e-8)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)


def test_sample_projects_onto_equality_kernel():
    cone = make_cone([[1.0, 0.0]], [])
    sample = sample_cone_directions(cone, 8, seed=42)
    assert sample.directions
    for d in sample.directions:
        assert abs(d[0]) <= 1e-8


def test_sample_trivial_cone_flagged():
    cone = make_cone([[1.0, 0.0], [0.0, 1.0]], [])
    sample = sample_cone_directions(cone, 8, seed=42)
    assert sample.directions == ()
    assert sample.trivial


def test_sample_halfline_includes_kernel_vector_flip():
    cone = make_cone([], [[-1.0], [-2.0]])
    sample = sample_cone_directions(cone, 8, seed=42)
    assert len(sample.directions) == 1
    assert sample.directions[0][0] == pytest.approx(1.0)
    assert sample.stalled  # only one distinct direction exists


def test_sample_deterministic():
    cone = make_cone([[1.0, 1.0, 0.0]], [[0.0, 0.0, 1.0]])
    a = sample_cone_directions(cone, 12, seed=7)
    b = sample_cone_directions(cone, 12, seed=7)
    assert len(a.directions) == len(b.directions)
    for p, q in zip(a.directions, b.directions):
        assert np.array_equal(p, q)
