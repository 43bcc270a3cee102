import math

import numpy as np
import pytest

from jtenergy.model import (MACRO, SMALL, Association, InvalidInstanceError, NetworkInstance,
                            PhysicalConstants, TopologySpec, compute_gains, generate_instance,
                            hex_sites, initial_association, path_loss_db, sample_in_hexagon)


@pytest.mark.parametrize("kind, d, expected", [
    (MACRO, 1000.0, 128.1),
    (MACRO, 100.0, 128.1 - 37.6),
    (SMALL, 1000.0, 140.7),
    (SMALL, 100.0, 140.7 - 36.7),
])
def test_path_loss_hand_values(kind, d, expected):
    assert path_loss_db(kind, d) == pytest.approx(expected, abs=1e-12)


def test_path_loss_clamps_short_distances():
    assert path_loss_db(MACRO, 0.0) == path_loss_db(MACRO, 10.0)
    assert path_loss_db(SMALL, 3.0) == path_loss_db(SMALL, 10.0)
    assert path_loss_db(MACRO, 10.0) > 0


def test_path_loss_unknown_kind():
    with pytest.raises(ValueError):
        path_loss_db("femto", 100.0)


def test_noise_power_from_psd():
    phys = PhysicalConstants()
    assert phys.noise_power_w == pytest.approx(10 ** -17.4 * 1e-3 * 180e3, rel=1e-12)


def test_default_instance_dimensions():
    inst = generate_instance(TopologySpec(rng_seed=3))
    assert (inst.n_cells, inst.n_ues) == (21, 210)
    assert inst.cell_kind.count(MACRO) == 7
    assert inst.cell_kind[:7] == (MACRO,) * 7
    np.testing.assert_array_equal(inst.power_max[:7], 0.2)
    np.testing.assert_array_equal(inst.power_max[7:], 0.05)


def test_same_seed_is_bit_identical():
    a = generate_instance(TopologySpec(rng_seed=11), demand_bps=2e5)
    b = generate_instance(TopologySpec(rng_seed=11), demand_bps=2e5)
    assert a.gain.tobytes() == b.gain.tobytes()
    assert a.ue_xy.tobytes() == b.ue_xy.tobytes()
    c = generate_instance(TopologySpec(rng_seed=12), demand_bps=2e5)
    assert a.gain.tobytes() != c.gain.tobytes()


def test_zero_shadowing_gains_depend_only_on_positions():
    inst = generate_instance(TopologySpec(rng_seed=5))
    args = (inst.cell_xy, inst.cell_kind, inst.ue_xy)
    g1 = compute_gains(*args, np.random.default_rng(1), 2.0, 0.0, 0.0)
    g2 = compute_gains(*args, np.random.default_rng(999), 2.0, 0.0, 0.0)
    np.testing.assert_array_equal(g1, g2)


def test_gains_in_unit_interval():
    for seed in range(5):
        g = generate_instance(TopologySpec(rng_seed=seed)).gain
        assert np.all(g > 0) and np.all(g < 1)


def test_hex_sites_neighbours_at_isd():
    sites = hex_sites(7, 500.0)
    np.testing.assert_allclose(sites[0], 0.0, atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(sites[1:], axis=1), 500.0, rtol=1e-12)
    d = np.linalg.norm(sites[:, None] - sites[None], axis=2)
    assert d[d > 1e-9].min() == pytest.approx(500.0, rel=1e-12)


def test_hex_sites_second_ring():
    sites = hex_sites(19, 100.0)
    assert len({(round(x, 6), round(y, 6)) for x, y in sites}) == 19
    r = np.sort(np.linalg.norm(sites, axis=1))
    np.testing.assert_allclose(r[1:7], 100.0, rtol=1e-12)
    np.testing.assert_allclose(r[7:13], 100.0 * math.sqrt(3), rtol=1e-12)
    np.testing.assert_allclose(r[13:], 200.0, rtol=1e-12)


def test_samples_fall_inside_hexagon():
    rng = np.random.default_rng(0)
    radius = 100.0
    pts = sample_in_hexagon(rng, (50.0, -20.0), radius, 2000) - (50.0, -20.0)
    x, y = np.abs(pts[:, 0]), np.abs(pts[:, 1])
    assert np.all(y <= radius * math.sqrt(3) / 2 + 1e-9)
    assert np.all(y <= math.sqrt(3) * (radius - x) + 1e-9)


@pytest.mark.parametrize("field, value", [
    ("macro_count", 0), ("ues_per_hexagon", 0), ("inter_site_distance_m", 0.0),
    ("inter_site_distance_m", -5.0), ("small_per_macro", -1),
])
def test_invalid_topology(field, value):
    with pytest.raises(InvalidInstanceError, match=field):
        TopologySpec(**{field: value})


def test_instance_invariants():
    ok = dict(gain=[[0.5]], noise_power=1.0, ru_bandwidth=1.0, ru_count=1, demand_min=[1.0],
              power_max=[1.0])
    NetworkInstance(**ok)
    for key, bad in [("gain", [[0.0]]), ("gain", [[np.inf]]), ("demand_min", [0.0]),
                     ("power_max", [-1.0]), ("noise_power", 0.0)]:
        with pytest.raises(InvalidInstanceError):
            NetworkInstance(**{**ok, key: bad})


def test_instance_arrays_are_read_only():
    inst = generate_instance(TopologySpec(rng_seed=1, macro_count=1, ues_per_hexagon=3))
    with pytest.raises(ValueError):
        inst.gain[0, 0] = 1.0


def test_association_requires_service_for_every_ue():
    with pytest.raises(InvalidInstanceError):
        Association(np.array([[1, 0], [0, 0]], dtype=np.uint8))


def test_association_views_agree():
    k = np.array([[1, 0, 1], [1, 1, 0]], dtype=np.uint8)
    a = Association(k)
    for j in range(3):
        for i in a.serving_cells(j):
            assert j in a.served_ues(i)
    assert a.jt_links == 1
    assert not a.is_single_serving
    b = a.with_link(1, 2)
    assert b.jt_links == 2 and a.jt_links == 1


def _inst(gain, pmax):
    gain = np.asarray(gain, dtype=float)
    return NetworkInstance(gain=gain, noise_power=1.0, ru_bandwidth=1.0, ru_count=1,
                           demand_min=np.ones(gain.shape[1]), power_max=pmax)


def test_initial_association_argmax():
    inst = _inst([[0.1], [0.3]], [1.0, 1.0])
    np.testing.assert_array_equal(initial_association(inst).kappa[:, 0], [0, 1])


def test_initial_association_weighs_power_caps():
    inst = _inst([[0.2], [0.3]], [1.0, 0.5])
    np.testing.assert_array_equal(initial_association(inst).kappa[:, 0], [1, 0])


def test_initial_association_tie_goes_to_lowest_index():
    inst = _inst([[0.2], [0.1], [0.2]], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(initial_association(inst).kappa[:, 0], [1, 0, 0])


def test_initial_association_single_serving():
    rng = np.random.default_rng(4)
    inst = _inst(rng.uniform(0.01, 1, size=(5, 20)), rng.uniform(0.1, 1, size=5))
    a = initial_association(inst)
    np.testing.assert_array_equal(a.kappa.sum(axis=0), 1)
    assert a.is_single_serving
