import pytest

from h4bp.dynamics import make_params
from h4bp.verify import REFERENCE_MU, Context


@pytest.fixture(scope="session")
def params():
    return make_params(REFERENCE_MU)


@pytest.fixture(scope="session")
def families():
    """Families at the reference mass parameter, each traced at most once per session."""
    return Context()
