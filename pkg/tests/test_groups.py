import math

import numpy as np
import pytest

from manitest import InvalidParams, make_group
from manitest.groups import KINDS


def test_kinds_dims_and_default_steps():
    dims = {"rot": 1, "trans": 2, "dilrot": 2, "sim": 4}
    for kind in KINDS:
        group = make_group(kind)
        assert group.dim == dims[kind]
        assert all(s > 0 for s in group.steps)
    assert make_group("trans").steps == (0.5, 0.5)
    assert make_group("rot").steps == (math.pi / 20,)
    assert make_group("dilrot").steps == (0.1, math.pi / 20)
    assert make_group("sim").steps == (0.1, math.pi / 20, 0.5, 0.5)


def test_make_group_rejects_bad_input():
    with pytest.raises(InvalidParams):
        make_group("affine")
    with pytest.raises(InvalidParams):
        make_group("trans", (0.5,))
    with pytest.raises(InvalidParams):
        make_group("trans", (0.5, -0.5))


def test_apply_identity():
    for kind in KINDS:
        group = make_group(kind)
        assert group.apply(group.identity, (1.3, -2.7)) == pytest.approx((1.3, -2.7))


def test_apply_quarter_turn():
    group = make_group("rot")
    x, y = group.apply((math.pi / 2,), (1.0, 0.0))
    # counter-clockwise in the mathematical frame (x right, y up)
    assert x == pytest.approx(0.0, abs=1e-12)
    assert y == pytest.approx(1.0)


def test_apply_similarity_scale_then_translate():
    group = make_group("sim")
    assert group.apply((2.0, 0.0, 1.0, 0.0), (1.0, 1.0)) == pytest.approx((3.0, 2.0))


def test_apply_rejects_nonpositive_scale():
    with pytest.raises(InvalidParams):
        make_group("dilrot").apply((0.0, 0.1), (1.0, 1.0))
    with pytest.raises(InvalidParams):
        make_group("sim").invert((-1.0, 0.0, 0.0, 0.0))


def test_invert_examples():
    trans = make_group("trans")
    assert trans.invert((2.0, -3.0)) == (-2.0, 3.0)
    rot = make_group("rot")
    assert rot.invert((0.0,)) == (0.0,)
    sim = make_group("sim")
    assert sim.invert(sim.identity) == pytest.approx(sim.identity)


def test_invert_round_trip_on_random_points():
    rng = np.random.default_rng(17)
    for kind in KINDS:
        group = make_group(kind)
        for _ in range(25):
            params = rng.uniform(-1.0, 1.0, group.dim)
            if group.scale_axis is not None:
                params[group.scale_axis] = rng.uniform(0.4, 2.5)
            inv = group.invert(tuple(params))
            for _ in range(4):
                pt = tuple(rng.uniform(-10.0, 10.0, 2))
                back = group.apply(params, group.apply(inv, pt))
                assert abs(back[0] - pt[0]) < 1e-9
                assert abs(back[1] - pt[1]) < 1e-9


def test_translation_composition_is_parameter_addition():
    group = make_group("trans")
    rng = np.random.default_rng(2)
    for _ in range(20):
        p1 = tuple(rng.uniform(-5, 5, 2))
        p2 = tuple(rng.uniform(-5, 5, 2))
        pt = tuple(rng.uniform(-5, 5, 2))
        composed = group.apply(p1, group.apply(p2, pt))
        direct = group.apply((p1[0] + p2[0], p1[1] + p2[1]), pt)
        assert composed == pytest.approx(direct)


def test_similarity_composition_closure():
    # the composition of two similarities must again be of the form
    # x -> a R(theta) x + t: equal-norm orthogonal columns
    group = make_group("sim")
    rng = np.random.default_rng(4)
    for _ in range(20):
        p1 = (rng.uniform(0.5, 2.0), rng.uniform(-3, 3),
              rng.uniform(-2, 2), rng.uniform(-2, 2))
        p2 = (rng.uniform(0.5, 2.0), rng.uniform(-3, 3),
              rng.uniform(-2, 2), rng.uniform(-2, 2))
        origin = np.array(group.apply(p1, group.apply(p2, (0.0, 0.0))))
        e1 = np.array(group.apply(p1, group.apply(p2, (1.0, 0.0)))) - origin
        e2 = np.array(group.apply(p1, group.apply(p2, (0.0, 1.0)))) - origin
        assert np.dot(e1, e2) == pytest.approx(0.0, abs=1e-9)
        assert np.linalg.norm(e1) == pytest.approx(np.linalg.norm(e2))
        assert np.linalg.norm(e1) == pytest.approx(p1[0] * p2[0])


def test_point_from_lattice_examples():
    trans = make_group("trans")
    pt = trans.point_from_lattice((2, -1))
    assert pt.params == (1.0, -0.5)
    assert pt.valid

    dilrot = make_group("dilrot")
    pt = dilrot.point_from_lattice((1, 1))
    nat = dilrot.natural(pt.params)
    assert nat[0] == pytest.approx(1.1)
    assert nat[1] == pytest.approx(math.pi / 20)

    identity = trans.point_from_lattice((0, 0))
    assert identity.params == (0.0, 0.0)


def test_point_from_lattice_marks_invalid_scale():
    dilrot = make_group("dilrot")
    assert dilrot.point_from_lattice((-9, 0)).valid
    assert not dilrot.point_from_lattice((-10, 0)).valid
    assert not dilrot.point_from_lattice((-11, 0)).valid


def test_point_from_lattice_injective_on_valid_points():
    group = make_group("dilrot")
    seen = {}
    for i in range(-9, 10):
        for j in range(-10, 11):
            pt = group.point_from_lattice((i, j))
            assert pt.params not in seen
            seen[pt.params] = (i, j)


def test_natural_offset_duality():
    sim = make_group("sim")
    pt = sim.point_from_lattice((3, 2, -1, 4))
    assert pt.params == (3 * 0.1, 2 * (math.pi / 20), -1 * 0.5, 4 * 0.5)
    nat = sim.natural(pt.params)
    assert nat[0] == pytest.approx(1.3)
    assert nat[1:] == pytest.approx(pt.params[1:])
