import numpy as np
import pytest

from landaudelta import invariants


@pytest.mark.parametrize("module, name, fn", invariants.CHECKS,
                         ids=[f"{m}:{n}" for m, n, _ in invariants.CHECKS])
def test_registered_invariant(module, name, fn):
    ok, detail = fn(np.random.default_rng(0))
    assert ok, detail


def test_every_module_has_checks():
    mods = {m for m, _, _ in invariants.CHECKS}
    assert mods == {"specfun", "geometry", "landau", "bie", "spectral", "toeplitz", "capacity", "approx", "cli"}


def test_run_all_filters_modules():
    lines = []
    res = invariants.run_all(modules=["geometry"], report=lines.append)
    assert {r[0] for r in res} == {"geometry"} and len(lines) == len(res)
    assert all(r[2] for r in res)
