"""Shared fixtures: the two benchmark plants with their certificates."""

import numpy as np
import pytest

from delay_etc.benchmarks import (
    example1_phi,
    example1_system,
    example2_certificate,
    example2_lipschitz,
    example2_phi,
    example2_system,
)
from delay_etc.certificate import derive_linear_certificate
from delay_etc.settings import Settings
from delay_etc.systems import Example2Params
from delay_etc.tuner import linear_lipschitz_constants


@pytest.fixture
def ex1_system():
    return example1_system()


@pytest.fixture
def ex1_linear_cert(ex1_system):
    return derive_linear_certificate(ex1_system)


@pytest.fixture
def ex1_cert(ex1_linear_cert):
    return ex1_linear_cert.cert


@pytest.fixture
def ex1_consts(ex1_system, ex1_cert):
    return linear_lipschitz_constants(ex1_system, ex1_cert)


@pytest.fixture
def ex1_phi():
    return example1_phi((1.0, 1.0))


@pytest.fixture
def ex2_system():
    return example2_system()


@pytest.fixture
def ex2_cert():
    return example2_certificate().cert


@pytest.fixture
def ex2_consts():
    return example2_lipschitz(Example2Params())


@pytest.fixture
def ex2_phi():
    return example2_phi()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def settings(tmp_path):
    return Settings(log_level="WARNING", out_dir=tmp_path / "out", max_workers=2)
