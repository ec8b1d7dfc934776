import pytest

from fkgising import BOND_DILUTED, RANDOM_FIELD, SITE_DILUTED, ModelSpec

MASTER_SEED = 20240001


def spec_for(family: str, **kwargs) -> ModelSpec:
    """Generic parameter point for each family, overridable per test."""
    if family == RANDOM_FIELD:
        base = dict(beta=0.8, h=0.3, b=1.0)
    else:
        base = dict(beta=0.8, h=0.3, J=1.0, p=0.7)
    base.update(kwargs)
    return ModelSpec(family, **base)


@pytest.fixture(params=[RANDOM_FIELD, BOND_DILUTED, SITE_DILUTED])
def family(request):
    return request.param
