import numpy as np
import pytest

from v2vchan.scene import Material, Scene, Surface


@pytest.fixture
def concrete():
    return Material("concrete", 5.0, 0.01, False, 0.4)


@pytest.fixture
def pec():
    return Material("metal", 1.0, 0.0, True, 0.1)


def big_wall(y: float, material: Material, normal_sign: int = 1,
             extent: float = 1000.0, tag: str = "wall") -> Surface:
    """Large vertical wall in the plane y=const; normal along +/-y."""
    e = extent
    if normal_sign > 0:
        verts = [(-e, y, -e), (-e, y, e), (e, y, e), (e, y, -e)]
    else:
        verts = [(-e, y, -e), (e, y, -e), (e, y, e), (-e, y, e)]
    return Surface(verts, material, tag=tag)


@pytest.fixture
def single_wall_scene(pec):
    return Scene([big_wall(0.0, pec)])
