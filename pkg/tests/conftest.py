import numpy as np
from numpy.random import PCG64, Generator

from cq_analyzer.expr import DomainEvaluationError, finite_diff_gradient


def random_domain_points(e, count, seed, low=0.1, high=2.0):
    """Seeded points with |x_j| in [low, high]; rejects domain failures.

    The lower bound keeps points away from singular sets (1/x near 0) so the
    central-difference truncation error stays far below the comparison
    tolerance.
    """
    rng = Generator(PCG64(seed))
    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        assert attempts < 50 * count, "could not find enough domain-valid points"
        x = rng.uniform(low, high, size=e.dimension)
        x *= np.where(rng.uniform(size=e.dimension) < 0.5, -1.0, 1.0)
        try:
            e.gradient(x)
            finite_diff_gradient(e, x, 1e-6)
        except DomainEvaluationError:
            continue
        points.append(x)
    return points
