from pathlib import Path

import numpy as np
import pytest

from hierssl.graphcore import simple_graph


def random_graph(n, m, seed, feature_dim=6, attrs=False):
    """Connected-ish random simple graph: a random spanning path plus uniform extra edges."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    pairs = {tuple(sorted((int(perm[i]), int(perm[i + 1])))) for i in range(n - 1)}
    while len(pairs) < m:
        u, v = rng.integers(0, n, 2)
        if u != v:
            pairs.add((int(min(u, v)), int(max(u, v))))
    feats = rng.standard_normal((n, feature_dim))
    edge_attrs = None
    if attrs:
        edge_attrs = np.abs(rng.standard_normal((len(pairs), 2))) + 0.1
    return simple_graph(n, sorted(pairs), features=feats, edge_attrs=edge_attrs,
                        community=rng.integers(0, 3, n), n_communities=3)


@pytest.fixture
def small_graph():
    return random_graph(30, 80, 0, attrs=True)


QUICK_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "quick.yaml"


@pytest.fixture(scope="session")
def quick_config():
    from hierssl.protocol import RunConfig
    return RunConfig.from_file(QUICK_CONFIG)


@pytest.fixture(scope="session")
def small_ref(quick_config):
    """Reference graph of the smoke config (about 130 nodes) with its task bundle."""
    from hierssl.protocol import reference_graph
    return reference_graph(quick_config.gen, 3)


# criterion number -> (passed, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
