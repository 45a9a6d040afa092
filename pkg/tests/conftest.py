import numpy as np
import pytest
from hypothesis import strategies as st

from nerobust.data import DatasetUnavailable, SbmSpec, load_dataset, sbm_generate
from nerobust.graph import Graph


def random_graph(n, p, rng):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return Graph(n, zip(iu[keep].tolist(), ju[keep].tolist()))


def path(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def star(leaves):
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def sbm(blocks, p_in, p_out, seed=0):
    return sbm_generate(SbmSpec(blocks, p_in, p_out, seed))


@st.composite
def graphs(draw, max_nodes=50, min_nodes=1):
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not pairs:
        return Graph(n)
    chosen = draw(st.lists(st.sampled_from(pairs), max_size=min(len(pairs), 150), unique=True))
    return Graph(n, chosen)


def real_dataset(name):
    """Load a registered dataset or skip when it cannot be obtained here."""
    try:
        return load_dataset(name)
    except DatasetUnavailable as exc:
        pytest.skip(f"dataset unavailable: {exc}")


@pytest.fixture(autouse=True, scope="session")
def _quiet_cache(tmp_path_factory):
    # keep test downloads out of the user's cache unless one is configured
    import os

    os.environ.setdefault("NEROBUST_DATA_DIR", str(tmp_path_factory.mktemp("cache")))
    yield
