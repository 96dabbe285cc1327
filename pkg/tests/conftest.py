"""Shared helpers: seeded random sequences, models and point sets."""

import numpy as np

from spherecov import (
    CauchyTemporal,
    GegenbauerBasis,
    LineFactor,
    SchoenbergSequence,
    SpaceTimeModel,
    SphereFactor,
)


def random_sequence(rng, max_degree, scale_range=(0.5, 3.0)):
    """Random valid coefficient sequence of the given degree."""
    coeffs = rng.dirichlet(np.ones(max_degree + 1))
    scale = float(rng.uniform(*scale_range))
    return SchoenbergSequence(scale=scale, coefficients=coeffs)


def random_model(
    rng,
    max_factors=3,
    max_degree=8,
    max_terms=6,
    nugget=0.0,
    sphere_dims=(1, 2, 3),
):
    """Random valid model: mixed sphere/line factors, Cauchy temporal factors.

    Temporal assignments are shared or per-index at random; weights come
    from a Dirichlet draw so they are positive and sum to 1.
    """
    n_factors = int(rng.integers(1, max_factors + 1))
    factors = []
    for _ in range(n_factors):
        if rng.random() < 0.65:
            dim = int(rng.choice(sphere_dims))
            factors.append(SphereFactor(GegenbauerBasis(dim, max_degree)))
        else:
            factors.append(LineFactor())

    n_terms = int(rng.integers(1, max_terms + 1))
    keys = set()
    while len(keys) < n_terms:
        keys.add(tuple(int(k) for k in rng.integers(0, max_degree + 1, size=n_factors)))
    keys = sorted(keys)
    weights = rng.dirichlet(np.ones(len(keys)))
    coefficients = dict(zip(keys, weights))

    temporal = []
    for pos, fac in enumerate(factors):
        if isinstance(fac, LineFactor):
            if rng.random() < 0.5:
                temporal.append(CauchyTemporal(float(rng.uniform(0.3, 3.0))))
            else:
                used = {key[pos] for key in keys}
                temporal.append(
                    {idx: CauchyTemporal(float(rng.uniform(0.3, 3.0))) for idx in used}
                )
    return SpaceTimeModel(
        factors=factors,
        coefficients=coefficients,
        scale=float(rng.uniform(0.5, 3.0)),
        nugget=nugget,
        temporal=temporal,
    )
