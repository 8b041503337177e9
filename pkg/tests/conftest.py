import math

import numpy as np
import pytest

from toruskit.tfseries import SeriesContext, TaylorFourierSeries

GOLDEN_MEAN = (1.0 + math.sqrt(5.0)) / 2.0
GOLDEN_FREQ = 2.0 - GOLDEN_MEAN  # (3 - sqrt 5)/2, the canonical test torus
NOBLE_FREQ = 1.0 / (2.0 + 1.0 / (5.0 + 1.0 / (3.0 + 1.0 / GOLDEN_MEAN)))

GOLDEN_OMEGA_STAR = 0.3870821721708347  # Newton-inverted forcing, eps=0.03, eta=0.1
BASIN_OMEGA = 0.3867364938443934  # two-attractor case, eps=0.028, eta=0.05


@pytest.fixture
def pend_ctx():
    return SeriesContext(n1=1, n2=1, K=2, trunc_fourier=12, trunc_action=2)


@pytest.fixture
def wide_ctx():
    # enough action-degree headroom that double brackets are not truncated
    return SeriesContext(n1=1, n2=1, K=2, trunc_fourier=16, trunc_action=6)


def random_sparse_series(ctx, rng, n_terms=6, kmax=3, scale=0.1, max_degree=2):
    """Random real series: hermitian pairs of sparse monomials."""
    terms = []
    for _ in range(n_terms):
        j = tuple(
            int(rng.integers(0, max_degree + 1)) if i == 0 else 0
            for i in range(ctx.n1)
        )
        if sum(j) > ctx.trunc_action:
            continue
        k = tuple(int(rng.integers(-kmax, kmax + 1)) for _ in range(ctx.n))
        c = complex(rng.normal(), rng.normal()) * scale
        terms.append((j, k, c))
        terms.append((j, tuple(-x for x in k), c.conjugate()))
    return TaylorFourierSeries.from_terms(ctx, terms, check_reality=False)
