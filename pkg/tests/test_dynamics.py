"""Vector helpers, state containers, and the fixed-step integrator."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmtrack.dynamics import (
    Snapshot,
    SwarmState,
    VehicleState,
    centroid,
    centroid_velocity,
    heading_vector,
    rk4_unicycle_arrays,
    rotate90,
    scalar_product,
    step,
    vec2,
    wrap_angle,
    wrap_angles,
)

finite_angles = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


# --------------------------------------------------------------------------
# angle wrapping


@given(finite_angles)
def test_wrap_angle_in_range(theta):
    r = wrap_angle(theta)
    assert -math.pi < r <= math.pi


@given(finite_angles)
@settings(max_examples=200)
def test_wrap_angle_preserves_angle_mod_2pi(theta):
    r = wrap_angle(theta)
    k = (theta - r) / (2.0 * math.pi)
    assert abs(k - round(k)) < 1e-9


@given(st.floats(min_value=-math.pi + 1e-12, max_value=math.pi, allow_nan=False))
def test_wrap_angle_identity_in_range(theta):
    assert wrap_angle(theta) == theta


def test_wrap_angle_boundary():
    # convention: (-pi, pi], so both +pi and -pi map to +pi
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.0) == 0.0


def test_wrap_angles_matches_scalar():
    th = np.array([0.0, 4.0, -4.0, 7.5, -7.5, math.pi, -math.pi, 100.0])
    vec = wrap_angles(th)
    for a, b in zip(th, vec):
        assert b == pytest.approx(wrap_angle(a), abs=1e-12)
    assert np.all(vec > -math.pi) and np.all(vec <= math.pi)


# --------------------------------------------------------------------------
# planar algebra


def test_vec2_and_norm():
    a = vec2(3, 4)
    assert a.dtype == np.float64
    assert np.linalg.norm(a) == 5.0
    assert scalar_product(a, a) == 25.0


@given(
    st.floats(-1e3, 1e3, allow_nan=False),
    st.floats(-1e3, 1e3, allow_nan=False),
)
@settings(max_examples=50)
def test_rotate90_orthogonal(x, y):
    a = vec2(x, y)
    assert abs(scalar_product(a, rotate90(a))) <= 1e-12 * (1.0 + x * x + y * y)
    # two quarter turns = point reflection
    np.testing.assert_allclose(rotate90(rotate90(a)), -a, atol=1e-15)


def test_scalar_product_polar_identity():
    # <v_k e^{i th_k}, v_j e^{i th_j}> = v_k v_j cos(th_j - th_k)
    vk, tk, vj, tj = 2.0, 0.3, 5.0, -1.1
    a = vec2(vk * math.cos(tk), vk * math.sin(tk))
    b = vec2(vj * math.cos(tj), vj * math.sin(tj))
    assert scalar_product(a, b) == pytest.approx(vk * vj * math.cos(tj - tk), abs=1e-12)


# --------------------------------------------------------------------------
# state containers


def test_vehicle_state_validates_speed():
    with pytest.raises(ValueError, match="speed must be positive"):
        VehicleState(id=1, position=(0, 0), heading=0.0, speed=0.0)
    with pytest.raises(ValueError, match="speed must be positive"):
        VehicleState(id=2, position=(0, 0), heading=0.0, speed=-3.0)


def test_vehicle_state_wraps_heading():
    v = VehicleState(id=1, position=(1, 2), heading=3.0 * math.pi, speed=1.0)
    assert v.heading == pytest.approx(math.pi)
    hv = heading_vector(v)
    np.testing.assert_allclose(hv, [-1.0, 0.0], atol=1e-12)


def test_swarm_state_requires_contiguous_ids():
    mk = lambda i: VehicleState(id=i, position=(i, 0), heading=0.0, speed=1.0)
    SwarmState(vehicles=(mk(1), mk(2), mk(3)))  # fine
    with pytest.raises(ValueError, match="contiguous"):
        SwarmState(vehicles=(mk(1), mk(3)))
    with pytest.raises(ValueError, match="contiguous"):
        SwarmState(vehicles=(mk(2), mk(1)))
    with pytest.raises(ValueError):
        SwarmState(vehicles=())


def test_snapshot_centroid_and_velocity():
    snap = Snapshot(
        speeds=[1.0, 2.0],
        headings=[0.0, math.pi / 2],
        positions=[[0.0, 0.0], [4.0, 2.0]],
    )
    np.testing.assert_allclose(snap.centroid(), [2.0, 1.0])
    np.testing.assert_allclose(snap.centroid_velocity(), [0.5, 1.0], atol=1e-15)
    hv = snap.heading_vectors()
    np.testing.assert_allclose(hv[0], [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(hv[1], [0.0, 2.0], atol=1e-15)


def test_swarm_centroid_helpers_match_snapshot():
    vehicles = tuple(
        VehicleState(id=i + 1, position=(i, -i), heading=0.4 * i, speed=1.0 + i)
        for i in range(4)
    )
    swarm = SwarmState(vehicles=vehicles)
    np.testing.assert_allclose(centroid(swarm), swarm.snapshot().centroid())
    np.testing.assert_allclose(
        centroid_velocity(swarm), swarm.snapshot().centroid_velocity()
    )
    assert not swarm.snapshot().stale.any()


# --------------------------------------------------------------------------
# integrator


def _exact_arc(x0, y0, th0, v, u, t):
    """Closed-form unicycle state under a constant turn rate."""
    if u == 0.0:
        return x0 + v * t * math.cos(th0), y0 + v * t * math.sin(th0), th0
    th = th0 + u * t
    r = v / u
    return (
        x0 + r * (math.sin(th) - math.sin(th0)),
        y0 - r * (math.cos(th) - math.cos(th0)),
        th,
    )


def test_rk4_single_step_matches_arc():
    v, u, dt = 10.0, 0.5, 0.01
    x, y, th = rk4_unicycle_arrays(
        np.array([1.0]), np.array([-2.0]), np.array([0.3]), np.array([v]), np.array([u]), dt
    )
    ex, ey, eth = _exact_arc(1.0, -2.0, 0.3, v, u, dt)
    assert x[0] == pytest.approx(ex, abs=1e-12)
    assert y[0] == pytest.approx(ey, abs=1e-12)
    assert th[0] == pytest.approx(eth, abs=0.0)  # heading update is exact


def test_rk4_100_steps_follow_arc():
    v, u, dt = 3.0, 0.8, 0.05
    x, y, th = np.array([0.0]), np.array([0.0]), np.array([1.0])
    for _ in range(100):
        x, y, th = rk4_unicycle_arrays(x, y, th, np.array([v]), np.array([u]), dt)
    ex, ey, eth = _exact_arc(0.0, 0.0, 1.0, v, u, 100 * dt)
    assert x[0] == pytest.approx(ex, abs=1e-7)
    assert y[0] == pytest.approx(ey, abs=1e-7)
    assert th[0] == pytest.approx(wrap_angle(eth), abs=1e-12)


def test_rk4_zero_control_goes_straight():
    x, y, th = rk4_unicycle_arrays(
        np.array([0.0]), np.array([0.0]), np.array([0.7]), np.array([2.0]),
        np.array([0.0]), 0.25,
    )
    assert x[0] == pytest.approx(0.5 * math.cos(0.7), abs=1e-15)
    assert y[0] == pytest.approx(0.5 * math.sin(0.7), abs=1e-15)
    assert th[0] == 0.7


@given(
    st.floats(-3.0, 3.0, allow_nan=False),
    st.floats(-2.0, 2.0, allow_nan=False),
    st.floats(0.5, 5.0, allow_nan=False),
)
@settings(max_examples=50)
def test_rk4_heading_stays_wrapped(th0, u, v):
    _, _, th = rk4_unicycle_arrays(
        np.zeros(1), np.zeros(1), np.array([th0]), np.array([v]), np.array([u]), 2.0
    )
    assert -math.pi < th[0] <= math.pi


def test_step_displacement_bounded_by_speed():
    swarm = SwarmState(
        vehicles=(
            VehicleState(id=1, position=(0, 0), heading=0.2, speed=4.0),
            VehicleState(id=2, position=(5, 5), heading=-1.0, speed=1.5),
        )
    )
    dt = 0.1
    after = step(swarm, [0.3, -0.2], dt)
    for before_v, after_v in zip(swarm.vehicles, after.vehicles):
        d = np.linalg.norm(after_v.position - before_v.position)
        assert d <= before_v.speed * dt + 1e-12
        assert d >= 0.99 * before_v.speed * dt  # tiny turn, nearly straight
        assert after_v.speed == before_v.speed
        assert after_v.id == before_v.id
    assert after.time == pytest.approx(swarm.time + dt)


def test_step_validates_inputs():
    swarm = SwarmState(
        vehicles=(VehicleState(id=1, position=(0, 0), heading=0.0, speed=1.0),)
    )
    with pytest.raises(ValueError, match="dt"):
        step(swarm, [0.0], 0.0)
    with pytest.raises(ValueError, match="controls"):
        step(swarm, [0.0, 1.0], 0.1)
