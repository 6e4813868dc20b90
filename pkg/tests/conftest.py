import pytest

from predrt.workload import from_lists


@pytest.fixture
def chain3():
    # a -> b -> c, unit costs, 10 us each
    return from_lists("chain3", [("a", 1.0, 10.0, []), ("a", 1.0, 10.0, [0]),
                                 ("a", 1.0, 10.0, [1])])
