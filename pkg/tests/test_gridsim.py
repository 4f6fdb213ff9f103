import dataclasses as dc
import math

import numpy as np
import pytest

from gridid.diffcore import Rng, rk4_integrate
from gridid.gridsim import (DYNAMICS, GRIDS, Dataset, Network, NetworkError, ScenarioError,
                            SyncGenParams, SynchronverterParams, build_scenario, grid_description,
                            reduce, sample_dataset, simulate, steady_state)
from gridid.gridsim.model import Dynamics


def with_pm0(model, pm0):
    g = model.generators[0]
    return dc.replace(model, generators=(dc.replace(g, params=dc.replace(g.params, P_m0=pm0)),)
                      + model.generators[1:])


# ---------------------------------------------------------------------------
# scenarios


def test_ieee118_fast_has_only_g1_synchronous():
    m = build_scenario("ieee118", "fast")
    assert [g.name for g in m.generators] == ["G1"]
    sites = [s["name"] for s in grid_description("ieee118")["sites"]]
    assert sorted(i.name for i in m.inverters) == sorted(n for n in sites if n != "G1")


@pytest.mark.parametrize("dyn,names", [("medium", ["G1", "G7", "G5"]),
                                       ("slow", ["G1", "G7", "G5", "G17", "G14", "G18"])])
def test_ieee118_synchronous_sets(dyn, names):
    assert [g.name for g in build_scenario("ieee118", dyn).generators] == names


def test_smib_slow_is_a_single_machine():
    m = build_scenario("smib", "slow", Rng(4))
    assert m.n_gen == 1 and m.n_inv == 0
    assert m.generators[0].params.m == 0.8 and m.generators[0].params.d == 0.15
    assert not m.generators[0].params.governor


def test_cigre_jitter_range_and_topology():
    base = SynchronverterParams(**{k: v for k, v in grid_description("cigre14")["inverter"].items()})
    ref = build_scenario("cigre14", "medium", Rng(1))
    seen = set()
    for seed in range(1000):
        m = build_scenario("cigre14", "medium", Rng(seed))
        assert m.network == ref.network
        assert [i.bus for i in m.inverters] == [i.bus for i in ref.inverters]
        for inv in m.inverters:
            for f in ("J_c", "d_c"):
                r = getattr(inv.params, f) / getattr(base, f)
                assert 0.8 <= r <= 1.2
            seen.add(inv.params.J_c)
    a = [i.params.J_c for i in build_scenario("cigre14", "medium", Rng(1)).inverters]
    b = [i.params.J_c for i in build_scenario("cigre14", "medium", Rng(2)).inverters]
    assert a != b and len(seen) > 1000


def test_unknown_labels():
    with pytest.raises(ScenarioError):
        build_scenario("ieee9", "fast")
    with pytest.raises(ScenarioError):
        build_scenario("smib", "sluggish")
    with pytest.raises(ScenarioError):
        build_scenario("cigre14", "fast")  # jittered grid without an rng


def test_parameter_validation():
    with pytest.raises(ValueError):
        SyncGenParams(m=0.0, d=0.1)
    with pytest.raises(ValueError):
        SynchronverterParams(J_c=-1.0)
    with pytest.raises(ValueError):
        SynchronverterParams(R_f=-0.1)


# ---------------------------------------------------------------------------
# equilibrium


def test_smib_equilibrium_angle():
    m = with_pm0(build_scenario("smib", "fast"), 0.05)
    x = steady_state(m)
    assert x[0] == pytest.approx(math.asin(0.05 / 0.2), abs=1e-9)
    assert abs(x[0] - 0.25268) < 1e-5 and x[1] == 0.0


@pytest.mark.parametrize("grid", GRIDS)
def test_steady_state_derivative_vanishes(grid):
    m = build_scenario(grid, "medium", Rng(0))
    dyn = Dynamics(m)
    x = steady_state(m)
    assert np.abs(dyn.rhs(x, dyn.P_m0)).max() < 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("grid", GRIDS)
def test_unperturbed_simulation_does_not_drift(grid):
    m = build_scenario(grid, "fast", Rng(0))
    x0 = steady_state(m)
    _, X = simulate(m, x0, 0.0, 5.0, states=True)
    assert np.abs(X - x0).max() < 1e-7
    assert np.abs(X - x0).max() < 1e-9 or grid != "smib"


# ---------------------------------------------------------------------------
# simulation


def test_smib_settles_on_post_step_equilibrium():
    tr = simulate(build_scenario("smib", "fast"), None, -0.1, 60.0)
    assert abs(tr.delta[-1, 0] - math.asin(-0.1 / 0.2)) < 1e-3
    assert abs(tr.delta[-1, 0] + 0.5236) < 1e-3


def test_smib_matches_standalone_swing_integration(smib_traj):
    m, d, B = 0.2, 0.15, 0.2

    def f(t, x):
        return np.array([x[1], (-0.1 - d * x[1] - B * math.sin(x[0])) / m])

    dt = smib_traj.meta["dt"]
    stride = int(round(smib_traj.record_dt / dt))
    t, X = rk4_integrate(f, [0.0, 0.0], 0.0, 5.0, dt, stride=stride)
    assert np.array_equal(t, smib_traj.times)
    assert np.abs(X[:, 0] - smib_traj.delta[:, 0]).max() < 1e-10
    assert np.abs(X[:, 1] - smib_traj.domega[:, 0]).max() < 1e-10


def test_first_sample_is_at_rest(smib_traj):
    m = build_scenario("smib", "fast")
    dyn = Dynamics(m)
    x0 = np.array([smib_traj.delta[0, 0], smib_traj.domega[0, 0]])
    assert np.abs(dyn.rhs(x0, dyn.P_m0)).max() < 1e-8
    assert np.all(np.diff(smib_traj.times) > 0)


@pytest.mark.slow
def test_ieee118_fast_frequency_bounded():
    tr = simulate(build_scenario("ieee118", "fast"), None, -0.1, 5.0)
    assert np.all(np.isfinite(tr.domega)) and np.all(np.isfinite(tr.inv_domega))
    assert np.abs(tr.domega_pu).max() < 0.05


@pytest.mark.slow
def test_power_balance_every_step():
    m = build_scenario("bus3", "fast")
    dyn = Dynamics(m)
    _, X = simulate(m, None, -0.1, 2.0, states=True)
    assert max(abs(dyn.power_balance(x)) for x in X) < 1e-8


@pytest.mark.slow
def test_more_virtual_inertia_never_deepens_the_nadir():
    m = build_scenario("bus3", "fast")
    nadirs = [np.abs(simulate(m.with_inverter_params(J_c=J), None, -0.1, 5.0).domega[:, 0]).max()
              for J in (0.005, 0.01, 0.02, 0.04, 0.08)]
    assert all(b <= a for a, b in zip(nadirs, nadirs[1:]))


def test_step_reading_adds_to_pre_step_power():
    m = with_pm0(build_scenario("smib", "fast"), 0.05)
    a = simulate(m, None, -0.15, 1.0, reading="step")
    b = simulate(m, None, -0.1, 1.0, reading="absolute")
    assert a.P_m[0] == pytest.approx(-0.1, abs=1e-15)
    assert np.abs(a.delta - b.delta).max() < 1e-12


# ---------------------------------------------------------------------------
# sampling


def test_sample_counts(smib_traj):
    assert sample_dataset(smib_traj, 20.0, 5.0).n == 100
    assert sample_dataset(smib_traj, 2.0, 5.0).n == 10


def test_noise_free_samples_are_trajectory_values(smib_traj):
    ds = sample_dataset(smib_traj, 20.0, 5.0)
    idx = np.arange(100) * 50
    assert np.array_equal(ds.t, smib_traj.times[idx])
    assert np.array_equal(ds.delta, smib_traj.delta[idx, 0] - smib_traj.delta0[0])
    assert np.array_equal(ds.domega, smib_traj.domega[idx, 0])


def test_normalisation_maps_to_unit_box_and_inverts(smib_data):
    for name in ("t", "delta", "domega"):
        z = smib_data.norm.encode(name, getattr(smib_data, name))
        assert z.min() == pytest.approx(-1.0) and z.max() == pytest.approx(1.0)
        assert np.allclose(smib_data.norm.decode(name, z), getattr(smib_data, name), atol=1e-15)


def test_sampling_errors(smib_traj):
    with pytest.raises(ValueError):
        sample_dataset(smib_traj, 0.3, 5.0)
    with pytest.raises(ValueError):
        sample_dataset(smib_traj, 20.0, 6.0)
    with pytest.raises(ValueError):
        sample_dataset(smib_traj, 20.0, 5.0, noise_sigma=0.01)
    with pytest.raises(ValueError):
        sample_dataset(smib_traj, 0.2, 5.0)


def test_noise_is_seeded(smib_traj):
    a = sample_dataset(smib_traj, 20.0, 5.0, 0.01, Rng(3))
    b = sample_dataset(smib_traj, 20.0, 5.0, 0.01, Rng(3))
    c = sample_dataset(smib_traj, 20.0, 5.0, 0.01, Rng(4))
    assert np.array_equal(a.delta, b.delta) and not np.array_equal(a.delta, c.delta)
    assert np.std(a.delta - sample_dataset(smib_traj, 20.0, 5.0).delta) == pytest.approx(0.01, rel=0.3)


def test_dataset_determinism():
    def make(seed):
        m = build_scenario("cigre14", "fast", Rng(seed))
        return sample_dataset(simulate(m, None, -0.1, 1.0), 20.0, 1.0, 0.001, Rng(seed))
    a, b = make(5), make(5)
    for k in ("t", "P_m", "delta", "domega"):
        assert np.array_equal(getattr(a, k), getattr(b, k))
    assert a.norm == b.norm


def test_dataset_file_roundtrip(tmp_path, smib_data):
    csv_path, side = smib_data.save(tmp_path / "d.csv")
    assert csv_path.read_text().splitlines()[0] == "t,P_m,delta,domega"
    back = Dataset.load(csv_path)
    for k in ("t", "P_m", "delta", "domega"):
        assert np.array_equal(getattr(back, k), getattr(smib_data, k))
    assert back.norm == smib_data.norm and back.meta["scenario"] == "smib-fast"


def test_coi_channel_on_single_machine_equals_g1(smib_traj):
    a = sample_dataset(smib_traj, 20.0, 5.0, channel="G1")
    b = sample_dataset(smib_traj, 20.0, 5.0, channel="coi")
    assert np.allclose(a.delta, b.delta, atol=1e-15) and np.allclose(a.domega, b.domega, atol=1e-15)


# ---------------------------------------------------------------------------
# network


def test_network_rejects_disconnected_or_bad_branches():
    with pytest.raises(NetworkError):
        Network(3, [(0, 1, 1.0)], [], None)
    with pytest.raises(NetworkError):
        Network(2, [(0, 1, -1.0)], [], None)


def test_kron_reduction_preserves_injections():
    # random lossless ring with constant-admittance loads, two source buses
    r = np.random.default_rng(0)
    n = 6
    branches = [(k, (k + 1) % n, float(r.uniform(2, 8))) for k in range(n)]
    loads = [(k, float(r.uniform(0.05, 0.2)), float(r.uniform(-0.1, 0.0))) for k in (2, 3, 5)]
    net = Network(n, branches, loads, None)
    red = reduce(net, [0, 4], [0.3, 0.3], [1])
    E = np.exp(1j * r.uniform(-0.3, 0.3, 2))
    I_inv = np.array([0.05 - 0.02j])
    I_K, V_I = red.solve(E, I_inv)
    V = red.bus_voltages(E, I_inv)
    # full nodal check: Y V = injected currents
    Y = net.bus_admittance()
    inj = Y @ V
    # source currents enter through their reactances
    for k, (bus, x) in enumerate(((0, 0.3), (4, 0.3))):
        assert inj[bus] == pytest.approx((E[k] - V[bus]) / (1j * x), abs=1e-12)
        assert I_K[k] == pytest.approx((E[k] - V[bus]) / (1j * x), abs=1e-12)
    assert inj[1] == pytest.approx(I_inv[0], abs=1e-12)
    for bus in (2, 3, 5):
        assert abs(inj[bus]) < 1e-12
    assert V_I[0] == pytest.approx(V[1], abs=1e-12)
    P_src = (E * np.conj(I_K)).real.sum() + (V[1] * np.conj(I_inv[0])).real
    assert P_src == pytest.approx(red.load_power(V), abs=1e-12)


@pytest.mark.parametrize("grid", GRIDS)
def test_bundled_grids_are_connected(grid):
    for dyn in DYNAMICS:
        m = build_scenario(grid, dyn, Rng(0))
        assert m.network.connected()
