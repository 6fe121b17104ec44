import numpy as np
import pytest

from sfonline.metric import Instance


def line_instance(positions, label="line"):
    """Instance from integer positions on a line, pairs in id order."""
    p = np.asarray(positions, dtype=np.int64)
    assert len(p) % 2 == 0
    dist = np.abs(p[:, None] - p[None, :])
    n = len(p) // 2
    demands = tuple((2 * t - 2, 2 * t - 1) for t in range(1, n + 1))
    return Instance(n=n, dist=dist, demands=demands, label=label)


@pytest.fixture
def w1():
    """Worked 4-terminal example: a,b at 0,1; c,d at 10,14; pairs (a,b),(c,d).

    Hand facts used throughout the suite: pair levels 0 and 2; optimum cost
    5 = 1 + 4 (the merged single-group tree on the line costs 14); hierarchy
    at t=2 has C_1 = {ab},{c},{d} and C_3 = {ab},{cd}.
    """
    return line_instance([0, 1, 10, 14], label="W1")
