import numpy as np
import pytest

from discres.fitting import Dataset, FittedModel, ModelSpec


def make_dataset(y, x=None):
    """Dataset with an intercept and one continuous covariate."""
    y = np.asarray(y)
    n = y.size
    if x is None:
        x = np.linspace(-1.0, 1.0, n)
    return Dataset(design=np.column_stack([np.ones(n), x]), outcomes=y)


def manual_model(family, coef_blocks, blocks):
    """FittedModel at hand-picked coefficients, bypassing the optimizer."""
    spec = ModelSpec(family, blocks)
    coefs = tuple(np.asarray(b, dtype=float) for b in coef_blocks)
    return FittedModel(
        spec=spec,
        coefficients=coefs,
        loglik=0.0,
        standard_errors=tuple(np.full(len(b), np.nan) for b in coef_blocks),
        converged=True,
        iterations=0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(42)
