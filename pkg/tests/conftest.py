"""Shared fixtures.

The expensive objects (pipelines, disk families, conjugate pairs) are
session scoped; every pipeline memoizes its own tables, so tests that
share a fixture share the underlying numerics as well.
"""

from __future__ import annotations

import math

import pytest

import sflab


@pytest.fixture(scope="session")
def system() -> sflab.SystemSpec:
    return sflab.system_from_dict({})


@pytest.fixture(scope="session")
def pipe(system) -> sflab.SystemPipeline:
    return sflab.SystemPipeline(system)


@pytest.fixture(scope="session")
def disks(pipe) -> sflab.DiskFamily:
    return pipe.disks()


@pytest.fixture(scope="session")
def pair(system):
    """Aligned pipelines for the default system and a rescaled conjugate."""
    g_system, conj = sflab.make_conjugate_system(system, rho=0.8, omega=0.7, mu=1.0)
    pipelines = sflab.PairPipelines(system, g_system)
    pipelines.align_plans()
    return pipelines, conj


@pytest.fixture(scope="session")
def pipe_rational() -> sflab.SystemPipeline:
    spec = sflab.system_from_dict({"theta": 2.0 * math.pi / 5.0}, label="rational")
    return sflab.SystemPipeline(spec)
