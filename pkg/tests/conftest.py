from __future__ import annotations

import pytest

from printplan import datasets


@pytest.fixture(scope="session")
def nine_parts():
    return datasets.load_builtin("nine_parts")


@pytest.fixture(scope="session")
def twenty_parts():
    return datasets.load_builtin("twenty_parts")


@pytest.fixture(scope="session")
def time_study_parts():
    return datasets.load_builtin("fifteen_parts_time_study")


@pytest.fixture(scope="session")
def area_study_parts():
    return datasets.load_builtin("fifteen_parts_area_study")
