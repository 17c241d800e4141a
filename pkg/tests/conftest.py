import pytest

from enclave import defaults
from enclave.simulation import Platform


@pytest.fixture
def platform() -> Platform:
    p = Platform.build(seed=7)
    defaults.provision_user(p.access, p.store, "alice")
    defaults.provision_user(p.access, p.store, "bob")
    return p
