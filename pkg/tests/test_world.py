import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clutter_mpc.arm import ArmModel, forward_kinematics, point_jacobian
from clutter_mpc.world import (
    Obstacle,
    SimulationFault,
    WorldConfig,
    WorldState,
    contact_forces,
    detect_contacts,
    mechanical_energy,
    simulate_outer_step,
    skin_reading,
    step_inner,
    taxel_layout,
    update_movable,
)

ARM = ArmModel()
R = ARM.link_radius


def segment_distance(a, b, c):
    # closed form, written independently of the kernel
    ab = b - a
    t = np.clip(np.dot(c - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return np.linalg.norm(a + t * ab - c)


def contact_torque(world, arm=ARM):
    tau = np.zeros(arm.n_joints)
    contacts = detect_contacts(world, arm)
    for c, f in zip(contacts, contact_forces(contacts, world.obstacles)):
        tau += point_jacobian(arm, world.theta, c.link_index, c.point).T @ f
    return tau


# ---- contacts -------------------------------------------------------------

def test_far_obstacle_gives_no_contacts():
    world = WorldState.at_rest(np.zeros(3), [Obstacle((1.8, 0.0), 0.01)])
    assert detect_contacts(world, ARM) == []


def test_end_cap_overlap_depth():
    obstacle = Obstacle((0.8 + R + 0.01 - 0.005, 0.0), 0.01)
    contacts = detect_contacts(WorldState.at_rest(np.zeros(3), [obstacle]), ARM)
    assert len(contacts) == 1
    c = contacts[0]
    assert c.link_index == 2
    assert c.depth == pytest.approx(0.005, abs=1e-12)
    np.testing.assert_allclose(c.normal, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(c.point, [0.8 + R, 0.0], atol=1e-12)


def test_random_scenes_match_distance_oracle():
    rng = np.random.default_rng(3)
    for _ in range(300):
        theta = rng.uniform(ARM.joint_min, ARM.joint_max)
        obstacles = [Obstacle(tuple(rng.uniform([-0.8, -0.8], [0.8, 0.8])), rng.uniform(0.005, 0.05))
                     for _ in range(8)]
        world = WorldState.at_rest(theta, obstacles)
        P = forward_kinematics(ARM, theta)
        expected = {}
        for i in range(3):
            for o, ob in enumerate(obstacles):
                d = segment_distance(P[i], P[i + 1], np.array(ob.center))
                if d < R + ob.radius:
                    expected[(i, o)] = R + ob.radius - d
        got = {(c.link_index, c.obstacle_id): c for c in detect_contacts(world, ARM)}
        assert set(got) == set(expected)
        for key, depth in expected.items():
            c = got[key]
            assert abs(c.depth - depth) < 1e-12
            assert np.linalg.norm(c.normal) == pytest.approx(1.0)
            # the contact point is on the capsule surface, the normal points at the obstacle
            to_center = np.array(obstacles[key[1]].center) - c.point
            assert float(to_center @ c.normal) == pytest.approx(obstacles[key[1]].radius - c.depth, abs=1e-12)


def test_contact_force_law():
    ob = Obstacle((0.5, 0.0), 0.01)
    world = WorldState.at_rest(np.zeros(3), [ob])
    (c,) = detect_contacts(world, ARM)
    (f,) = contact_forces([c], [ob])
    np.testing.assert_allclose(f, 5000.0 * c.depth * c.normal)
    assert np.linalg.norm(f) == pytest.approx(5000 * (R + 0.01))


@pytest.mark.parametrize("depth", [0.0, 0.001, 0.005])
def test_force_linear_in_depth(depth):
    from clutter_mpc.world import RawContact
    c = RawContact(0, np.zeros(2), np.array([0.6, 0.8]), depth, 0)
    (f,) = contact_forces([c], [Obstacle((0, 0), 0.01)])
    np.testing.assert_allclose(f, 5000 * depth * np.array([0.6, 0.8]))


# ---- movable obstacles ----------------------------------------------------

@pytest.mark.parametrize("force,moves", [(1.5, False), (2.0, False), (4.0, True)])
def test_update_movable_threshold(force, moves):
    ob = Obstacle((0.3, 0.2), 0.01, "movable")
    out = update_movable(ob, [0.0, force], 0.001)
    if moves:
        np.testing.assert_allclose(np.subtract(out.center, ob.center), [0.0, 1e-4], atol=1e-15)
    else:
        assert out.center == ob.center


def test_update_movable_rejects_fixed():
    with pytest.raises(ValueError):
        update_movable(Obstacle((0, 0), 0.01), [5.0, 0.0], 0.001)


def test_movable_push_is_reaction_to_contact_forces():
    theta = np.array([0.0, 0.3, 0.2])
    P = forward_kinematics(ARM, theta)
    mid = 0.5 * (P[1] + P[2])
    normal = np.array([-np.sin(0.3), np.cos(0.3)])
    ob = Obstacle(tuple(mid + (R + 0.01 - 0.002) * normal), 0.01, "movable")
    world = WorldState.at_rest(theta, [ob])
    contacts = detect_contacts(world, ARM)
    net = np.sum(contact_forces(contacts, world.obstacles), axis=0)
    expected = update_movable(ob, net, 0.001)
    after = step_inner(world, ARM, 0.001)
    np.testing.assert_allclose(after.obstacles[0].center, expected.center, atol=1e-15)
    assert after.obstacles[0].center != ob.center


# ---- skin -----------------------------------------------------------------

def test_layout_tiles_edges_and_caps():
    layout = taxel_layout(ARM, 0.01)
    for i, length in enumerate(ARM.link_lengths):
        mine = layout.link == i
        for edge in (0, 1):
            assert np.sum(mine & (layout.edge == edge)) == round(length / 0.01)
        for edge in (2, 3):
            assert np.sum(mine & (layout.edge == edge)) == round(np.pi * R / 0.01)
    np.testing.assert_allclose(np.linalg.norm(layout.local_normal, axis=1), 1.0)
    # every taxel centre lies on the capsule surface
    for t in range(len(layout)):
        x, y = layout.local_pos[t]
        length = ARM.link_lengths[layout.link[t]]
        d = np.hypot(x - np.clip(x, 0.0, length), y)
        assert d == pytest.approx(R)


def test_contact_free_skin_is_zero():
    skin = skin_reading(WorldState.at_rest(np.zeros(3)), ARM)
    assert len(skin) == len(taxel_layout(ARM, 0.01))
    assert all(r.normal_force == 0.0 for r in skin)
    assert skin_reading(WorldState.at_rest(np.zeros(3)), ARM, active_only=True) == []


def test_single_contact_reported_by_one_taxel():
    depth = 3.0 / 5000.0
    ob = Obstacle((0.45, R + 0.01 - depth), 0.01)
    skin = skin_reading(WorldState.at_rest(np.zeros(3), [ob]), ARM)
    nonzero = [r for r in skin if r.normal_force > 0]
    assert len(nonzero) == 1
    assert nonzero[0].normal_force == pytest.approx(3.0)
    assert sum(r.normal_force for r in skin) == pytest.approx(3.0)
    assert nonzero[0].taxel_id[:2] == (1, 0)


def test_two_contacts_use_nearest_taxels():
    depth = 0.002
    obstacles = [Obstacle((0.34, -(R + 0.01 - depth)), 0.01), Obstacle((0.47, -(R + 0.01 - depth)), 0.01)]
    world = WorldState.at_rest(np.zeros(3), obstacles)
    skin = skin_reading(world, ARM)
    nonzero = [r for r in skin if r.normal_force > 0]
    assert len(nonzero) == 2
    # brute-force nearest taxel among all taxels of the touched link
    for c in detect_contacts(world, ARM):
        same_link = [r for r in skin if r.taxel_id[0] == c.link_index]
        best = min(same_link, key=lambda r: np.sum((r.center - c.point) ** 2))
        assert best.normal_force == pytest.approx(5000 * c.depth)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_skin_conserves_normal_force(seed, n):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(ARM.joint_min, ARM.joint_max)
    P = forward_kinematics(ARM, theta)
    obstacles = []
    for _ in range(n):
        i = rng.integers(0, 3)
        base = P[i] + rng.uniform() * (P[i + 1] - P[i])
        obstacles.append(Obstacle(tuple(base + rng.normal(0, 0.02, 2)), 0.01))
    world = WorldState.at_rest(theta, obstacles)
    contacts = detect_contacts(world, ARM)
    total = sum(np.linalg.norm(f) for f in contact_forces(contacts, obstacles))
    skin = skin_reading(world, ARM)
    assert sum(r.normal_force for r in skin) == pytest.approx(total, rel=1e-12, abs=1e-12)
    assert all(r.normal_force >= 0 for r in skin)
    assert all(np.linalg.norm(r.normal) == pytest.approx(1.0) for r in skin)


# ---- dynamics -------------------------------------------------------------

def test_equilibrium_is_stationary():
    world = WorldState.at_rest(np.array([0.3, -0.4, 1.0]))
    after = step_inner(world, ARM, 0.001)
    np.testing.assert_array_equal(after.theta, world.theta)
    np.testing.assert_array_equal(after.theta_dot, world.theta_dot)
    out, skin = simulate_outer_step(world, ARM, np.zeros(3))
    np.testing.assert_array_equal(out.theta, world.theta)
    assert skin == []


def test_step_response_has_little_overshoot():
    theta0 = np.array([0.0, 0.0, 1.0])
    step = np.array([0.05, -0.04, 0.03])
    world = WorldState(theta0, np.zeros(3), theta0 + step)
    traj = []
    for _ in range(3000):
        world = step_inner(world, ARM, 0.001)
        traj.append(world.theta - theta0)
    traj = np.array(traj)
    # decoupled second-order oracle: overshoot relative to the commanded step
    overshoot = np.max(traj / step, axis=0) - 1.0
    assert np.all(overshoot < 0.05)
    np.testing.assert_allclose(traj[-1], step, atol=1e-4)


def test_step_response_tracks_critically_damped_solution():
    theta0 = np.array([0.0, 0.0, 1.0])
    step = np.array([0.05, -0.04, 0.03])
    world = WorldState(theta0, np.zeros(3), theta0 + step)
    wn = np.sqrt(ARM.joint_stiffness / ARM.inertia)
    err = 0.0
    for k in range(1, 1001):
        world = step_inner(world, ARM, 0.001)
        t = k * 0.001
        exact = step * (1 - (1 + wn * t) * np.exp(-wn * t))
        err = max(err, np.max(np.abs(world.theta - theta0 - exact) / np.abs(step)))
    assert err < 0.05


def test_static_contact_balance():
    theta = np.array([0.2, 0.4, 0.6])
    P = forward_kinematics(ARM, theta)
    mid = 0.5 * (P[1] + P[2])
    normal = np.array([-np.sin(0.6), np.cos(0.6)])
    ob = Obstacle(tuple(mid + (R + 0.01 + 0.001) * normal), 0.01)
    world = WorldState(theta, np.zeros(3), theta + np.array([0.0, 0.05, 0.0]), [ob])
    for _ in range(500):
        world, _ = simulate_outer_step(world, ARM, np.zeros(3))
    assert detect_contacts(world, ARM), "arm should be pressed against the obstacle"
    residual = ARM.joint_stiffness * (world.phi - world.theta) - contact_torque(world)
    assert np.max(np.abs(residual)) < 1e-3


def test_outer_step_bookkeeping_and_convergence():
    world = WorldState.at_rest(np.array([0.1, 0.2, 0.3]))
    world, _ = simulate_outer_step(world, ARM, np.array([0.01, -0.01, 0.02]))
    assert world.time == pytest.approx(0.01, abs=1e-15)
    np.testing.assert_allclose(world.phi, [0.11, 0.19, 0.32])
    for _ in range(300):
        world, _ = simulate_outer_step(world, ARM, np.zeros(3))
    assert np.linalg.norm(world.phi - world.theta) < 1e-3


def test_virtual_trajectory_clamped_to_limits():
    world = WorldState.at_rest(np.array([1.99, 0.0, 0.01]))
    world, _ = simulate_outer_step(world, ARM, np.array([0.05, 0.0, -0.05]))
    np.testing.assert_allclose(world.phi, [2.0, 0.0, 0.0])
    for _ in range(100):
        world, _ = simulate_outer_step(world, ARM, np.zeros(3))
        assert np.all(world.theta >= ARM.joint_min) and np.all(world.theta <= ARM.joint_max)


def test_theta_hard_clamped():
    world = WorldState(np.array([1.999, 0.0, 0.5]), np.array([5.0, 0.0, 0.0]), np.array([2.0, 0.0, 0.5]))
    world = step_inner(world, ARM, 0.001)
    assert world.theta[0] == 2.0
    assert world.theta_dot[0] == 0.0


def test_non_finite_state_faults():
    world = WorldState(np.array([0.0, np.nan, 0.0]), np.zeros(3), np.zeros(3))
    with pytest.raises(SimulationFault):
        step_inner(world, ARM)


def test_energy_non_increasing_with_contacts():
    rng = np.random.default_rng(11)
    for _ in range(5):
        theta = rng.uniform(ARM.joint_min + 0.3, ARM.joint_max - 0.3)
        P = forward_kinematics(ARM, theta)
        obstacles = [Obstacle(tuple(P[i] + 0.5 * (P[i + 1] - P[i]) + rng.normal(0, 0.02, 2)), 0.01)
                     for i in range(3)]
        world = WorldState(theta, rng.normal(0, 0.5, 3), theta + rng.normal(0, 0.05, 3), obstacles)
        e = mechanical_energy(world, ARM)
        for _ in range(2000):
            world = step_inner(world, ARM, 0.001)
            e_next = mechanical_energy(world, ARM)
            assert e_next <= e + 1e-6
            e = e_next


def test_determinism():
    rng = np.random.default_rng(5)
    obstacles = [Obstacle((0.4, 0.05), 0.01, "movable"), Obstacle((0.35, -0.1), 0.01)]
    dphis = rng.normal(0, 0.01, (200, 3))

    def run():
        world = WorldState.at_rest(np.array([-0.3, 0.5, 0.8]), obstacles)
        thetas = []
        for d in dphis:
            world, _ = simulate_outer_step(world, ARM, d)
            thetas.append(world.theta.tobytes() + np.array(world.obstacles[0].center).tobytes())
        return thetas

    assert run() == run()


def test_world_config_outer_period():
    assert WorldConfig().dt_outer == pytest.approx(0.01)


@pytest.mark.parametrize("kwargs", [{"radius": 0.0}, {"kind": "rolling"}, {"surface_stiffness": -1.0}])
def test_invalid_obstacles(kwargs):
    with pytest.raises(ValueError):
        Obstacle((0.0, 0.0), **{"radius": 0.01, **kwargs})
