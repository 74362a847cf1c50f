import pytest

from perfmodel import MachineProfile, get_signature


@pytest.fixture
def dtrsm_variant():
    return get_signature("dtrsm").parse_variant("side=L,uplo=L,transA=N,alpha=1")


@pytest.fixture
def profile():
    return MachineProfile(largest_cache_bytes=256 * 1024)
