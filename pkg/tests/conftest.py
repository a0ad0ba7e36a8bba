"""Shared fixtures: a small rendered room reused across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from planefill.synthetic import make_room_bundle, write_demo_scene


@pytest.fixture(scope="session")
def room():
    """(bundle, empty_image) for a 240x180 furnished room with ground truth."""
    return make_room_bundle(240, 180)


@pytest.fixture(scope="session")
def room_bundle(room):
    return room[0]


@pytest.fixture(scope="session")
def room_truth(room):
    return room[1]


@pytest.fixture(scope="session")
def demo_scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo_scene")
    write_demo_scene(out)
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
