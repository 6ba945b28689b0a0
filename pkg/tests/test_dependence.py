import math

import pytest

from cq_analyzer.dependence import (
    ReconstructionError,
    classify_dependence,
    image_dimension_probe,
    laszlo_test,
    reconstruct_dependent,
    witness_check,
)
from cq_analyzer.expr import parse
from cq_analyzer.rank import NeighborhoodSampler

TORNADO = ["x^3 * sin(1/x)", "x^3 * cos(1/x)", "x^3"]


def fns(texts, names):
    return [parse(t, names) for t in texts]


def sampler_at(center, **kw):
    return NeighborhoodSampler(center=tuple(center), **kw)


# ---------------------------------------------------------------------------
# classify_dependence
# ---------------------------------------------------------------------------


def test_classify_coordinate_projections_independent():
    verdict = classify_dependence(
        fns(["x1", "x2"], ["x1", "x2"]), [0.0, 0.0], sampler_at([0.0, 0.0]), 1e-8
    )
    assert verdict.sense == "independent"
    assert verdict.rank_k == 2 and verdict.kappa == 2
    assert not verdict.laszlo_at_point


def test_classify_affine_pair_dependent():
    verdict = classify_dependence(
        fns(["x1", "2*x1 + 3"], ["x1", "x2"]), [0.0, 0.0], sampler_at([0.0, 0.0]), 1e-8
    )
    assert verdict.sense == "dependent-with-relation"
    assert verdict.rank_k == 1
    assert verdict.pivot_indices == (1,)
    fitted = verdict.reconstructions[0]
    assert fitted.cross_validated_residual <= 1e-8
    for y in (-0.5, 0.0, 0.03, 0.4):
        assert fitted.predict([y]) == pytest.approx(2 * y + 3, abs=1e-8)


def test_classify_axis_squares_inconclusive():
    verdict = classify_dependence(
        fns(["x1^2", "x2^2"], ["x1", "x2"]), [0.0, 0.0], sampler_at([0.0, 0.0]), 1e-8
    )
    assert verdict.sense == "crc-failed-inconclusive"
    assert verdict.crc.verdict == "refuted"


def test_classify_requires_functions():
    with pytest.raises(ValueError):
        classify_dependence([], [0.0], sampler_at([0.0]), 1e-8)


# ---------------------------------------------------------------------------
# reconstruct_dependent
# ---------------------------------------------------------------------------


def test_reconstruct_identity_map():
    functions = fns(["x1 + x2", "x1 + x2"], ["x1", "x2"])
    fitted = reconstruct_dependent(
        functions, [0.0, 0.0], (1,), 2, sampler_at([0.0, 0.0])
    )
    assert fitted.cross_validated_residual <= 1e-12
    assert fitted.predict([0.37]) == pytest.approx(0.37, abs=1e-10)


def test_reconstruct_square_relation_at_generic_point():
    functions = fns(["x1", "x1^2"], ["x1", "x2"])
    x0 = [1.0, 0.0]
    verdict = classify_dependence(functions, x0, sampler_at(x0), 1e-8)
    assert verdict.sense == "dependent-with-relation"
    assert verdict.pivot_indices == (1,)
    fitted = verdict.reconstructions[0]
    assert fitted.cross_validated_residual <= 1e-9
    for y in (0.93, 1.0, 1.08):
        assert fitted.predict([y]) == pytest.approx(y**2, abs=1e-9)


def test_reconstruct_sin_composition_small_radius():
    # Cubic surrogate of sin on |y| <= ~1.4e-2; Taylor remainder |y|^5/120
    # bounds the best cubic error far below the asserted 1e-7.
    functions = fns(["x1 + x2", "sin(x1 + x2)"], ["x1", "x2"])
    s = sampler_at([0.0, 0.0], radii=(1e-2, 1e-3, 1e-4))
    fitted = reconstruct_dependent(functions, [0.0, 0.0], (1,), 2, s)
    assert fitted.training_radius == 1e-2
    assert fitted.cross_validated_residual <= 1e-7
    assert fitted.predict([0.01]) == pytest.approx(math.sin(0.01), abs=1e-7)


def test_reconstruct_failure_carries_residual():
    # sin over a radius-1 ball is not a cubic to 1e-6: the fit must refuse.
    functions = fns(["x1 + x2", "sin(x1 + x2)"], ["x1", "x2"])
    s = sampler_at([0.0, 0.0], radii=(1.0, 0.5))
    with pytest.raises(ReconstructionError) as exc:
        reconstruct_dependent(functions, [0.0, 0.0], (1,), 2, s)
    assert exc.value.residual > exc.value.bound


def test_reconstruct_rejects_pivot_target():
    functions = fns(["x1", "x1^2"], ["x1", "x2"])
    with pytest.raises(ValueError):
        reconstruct_dependent(functions, [1.0, 0.0], (1,), 1, sampler_at([1.0, 0.0]))


def test_reconstruction_consistency_on_fresh_samples():
    cases = [
        (["x1", "2*x1 + 3"], ["x1", "x2"], [0.0, 0.0]),
        (["x1", "x1^2"], ["x1", "x2"], [1.0, 0.0]),
        (["x1 + x2", "sin(x1 + x2)"], ["x1", "x2"], [0.0, 0.0]),
    ]
    for texts, names, x0 in cases:
        functions = fns(texts, names)
        radii = (1e-2, 1e-3, 1e-4)
        fitted = reconstruct_dependent(
            functions, x0, (1,), 2, sampler_at(x0, radii=radii, seed=42)
        )
        fresh = sampler_at(x0, radii=radii, seed=4242)
        allowed = 10.0 * max(fitted.cross_validated_residual, 1e-14)
        for p in fresh.points():
            y = [functions[0].evaluate(p)]
            assert abs(fitted.predict(y) - functions[1].evaluate(p)) <= allowed


# ---------------------------------------------------------------------------
# laszlo_test
# ---------------------------------------------------------------------------


def test_laszlo_tornado_true_at_origin():
    # All three derivatives vanish at 0 (rank 0 < 3); the two oscillating
    # rows are unevaluable there and counted as absent, reproducing rank 0.
    assert laszlo_test(fns(TORNADO, ["x"]), [0.0], 1e-8)


def test_laszlo_tornado_true_nearby_too():
    # Three functions of one variable: gradient rank is at most 1 < 3.
    assert laszlo_test(fns(TORNADO, ["x"]), [0.01], 1e-8)


def test_laszlo_coordinate_projections_false():
    functions = fns(["x1", "x2"], ["x1", "x2"])
    for x in ([0.0, 0.0], [0.3, -0.2], [5.0, 5.0]):
        assert not laszlo_test(functions, x, 1e-8)


def test_laszlo_cusp_true_at_zero_false_elsewhere():
    functions = fns(["t^3", "t^2"], ["t"])
    assert laszlo_test(functions, [0.0], 1e-8)
    assert laszlo_test(functions, [0.5], 1e-8)  # rank 1 < 2 away from 0 as well


# ---------------------------------------------------------------------------
# image_dimension_probe
# ---------------------------------------------------------------------------


def test_image_probe_full_rank_pair():
    assert (
        image_dimension_probe(
            fns(["x1", "x2"], ["x1", "x2"]), [0.0, 0.0], sampler_at([0.0, 0.0])
        )
        == 2
    )


def test_image_probe_repeated_function():
    assert (
        image_dimension_probe(
            fns(["x1", "x1"], ["x1", "x2"]), [0.0, 0.0], sampler_at([0.0, 0.0])
        )
        == 1
    )


def test_image_probe_tornado_curve():
    # The image is a curve in R^3; the center value is unevaluable at 0 so
    # the probe centers on the sample mean.
    assert image_dimension_probe(fns(TORNADO, ["x"]), [0.0], sampler_at([0.0])) == 1


# ---------------------------------------------------------------------------
# witness_check
# ---------------------------------------------------------------------------


def test_witness_cusp_relation_zero_residual():
    # y1^2 - y2^3 composed with (t^3, t^2) is t^6 - t^6 = 0 identically.
    # Note the orientation: y1^3 - y2^2 composed in listed order would give
    # t^9 - t^4, which is NOT identically zero.
    relation = parse("y1^2 - y2^3", ["y1", "y2"])
    residual = witness_check(relation, fns(["t^3", "t^2"], ["t"]), sampler_at([0.0]))
    assert residual <= 1e-14


def test_witness_equal_functions():
    relation = parse("y1 - y2", ["y1", "y2"])
    functions = fns(["x1 + x2", "x1 + x2"], ["x1", "x2"])
    assert witness_check(relation, functions, sampler_at([0.0, 0.0])) == 0.0


def test_witness_clear_failure():
    relation = parse("y1 + 1", ["y1", "y2"])
    functions = fns(["x1", "x2"], ["x1", "x2"])
    residual = witness_check(relation, functions, sampler_at([0.0, 0.0]))
    assert residual >= 0.9


def test_witness_arity_mismatch():
    relation = parse("y1", ["y1"])
    with pytest.raises(ValueError):
        witness_check(relation, fns(["x1", "x2"], ["x1", "x2"]), sampler_at([0.0, 0.0]))


# ---------------------------------------------------------------------------
# cross-cutting properties
# ---------------------------------------------------------------------------


def test_independent_implies_laszlo_false_at_point():
    cases = [
        (["x1", "x2"], ["x1", "x2"], [0.0, 0.0]),
        (["x1 + x2", "x1 - x2"], ["x1", "x2"], [0.3, 0.1]),
    ]
    for texts, names, x0 in cases:
        functions = fns(texts, names)
        verdict = classify_dependence(functions, x0, sampler_at(x0), 1e-8)
        assert verdict.sense == "independent"
        assert not verdict.laszlo_at_point


def test_local_stability_of_dependence():
    # Dependent at x0 stays dependent at every smallest-radius sample point.
    functions = fns(["x1", "2*x1 + 3"], ["x1", "x2"])
    base = sampler_at([0.0, 0.0])
    verdict = classify_dependence(functions, [0.0, 0.0], base, 1e-8)
    assert verdict.sense == "dependent-with-relation"
    _, smallest_layer = base.points_by_radius()[-1]
    for p in smallest_layer:
        shifted = classify_dependence(
            functions, p, sampler_at(p, radii=(1e-4, 1e-5, 1e-6)), 1e-8
        )
        assert shifted.sense == "dependent-with-relation"


def test_dependent_implies_laszlo_true_on_neighborhood():
    functions = fns(["x1", "2*x1 + 3"], ["x1", "x2"])
    s = sampler_at([0.0, 0.0])
    verdict = classify_dependence(functions, [0.0, 0.0], s, 1e-8)
    assert verdict.sense == "dependent-with-relation"
    for p in s.points():
        assert laszlo_test(functions, p, 1e-8)
