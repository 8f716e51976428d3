import functools

import numpy as np
import pytest

from capillary.spaceform import SpaceForm
from capillary.surfaces import SurfaceSpec, make_surface

KS = (-1, 0, 1)


@functools.lru_cache(maxsize=None)
def surface(family, K=0, R=1.0, n=2, **params):
    """Cached factory so expensive patches are built once per session."""
    params = {k: (np.array(v) if isinstance(v, tuple) else v) for k, v in params.items()}
    return make_surface(SurfaceSpec(family, K, R, n, params))


def rel_rho(K, frac=0.6, R=1.0):
    return frac * SpaceForm(K, R).r_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] C{key:<2} {title}: {detail}")
