import numpy as np
import pytest

import flownav as fn


@pytest.fixture(scope="session")
def golden_scene():
    """Scene, mapping, and instruction for the fixed golden seed."""
    smap, mapping = fn.gen_scene(fn.SceneSpec(rng_seed=42))
    instruction = fn.gen_instruction(smap, mapping, 42)
    return smap, mapping, instruction


@pytest.fixture(scope="session")
def golden_annotation(golden_scene):
    smap, mapping, instruction = golden_scene
    return fn.annotate(smap, mapping, instruction.spec, rng_seed=42)


def random_mask(shape, rng, p_free=0.7):
    """Random free mask guaranteed to contain both free and blocked pixels."""
    while True:
        m = rng.random(shape) < p_free
        if m.any() and (~m).any():
            return m


def open_room(h, w, wall=1):
    """Free rectangle with a solid wall border; True = free."""
    m = np.zeros((h, w), dtype=bool)
    m[wall:-wall, wall:-wall] = True
    return m
