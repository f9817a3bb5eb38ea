from __future__ import annotations

import numpy as np
import pytest

from toricsim.energy import BathSpec, DisorderSpec, EnergyModel, InteractionSpec
from toricsim.kmc import (OBSERVABLES, DynamicsConfig, Schedule, Simulator, build_instance, ensemble_run,
                          instance_seed, run_trajectory, trajectory_seed)
from toricsim.lattice import LatticeSpec, build_square

from oracles import MasterEquation

COL = {name: i for i, name in enumerate(OBSERVABLES)}


def run_many(sim, times, n, offset=0):
    return np.stack([sim.run(times, offset + s) for s in range(n)])


def test_schedule_log_density():
    s = Schedule.log(0.01, 100.0, per_decade=64)
    assert s.sample_times[0] == 0.0
    assert len(s.sample_times) == 1 + 4 * 64 + 1
    assert s.t_end == pytest.approx(100.0)


def test_schedule_rejects_unsorted():
    with pytest.raises(ValueError):
        Schedule(np.array([0.0, 2.0, 1.0]))


def test_initial_sample():
    sim = Simulator(EnergyModel.uniform(build_square(4), 1.0), BathSpec())
    out = sim.run(np.array([0.0, 1.0]), 3)
    assert out[0].tolist() == [0, 0, 1, 1, 1, 1]


def test_seeds_are_pure():
    assert trajectory_seed(7, 3) == trajectory_seed(7, 3)
    assert trajectory_seed(7, 3) != trajectory_seed(7, 4)
    assert instance_seed(7, 3, 1) != instance_seed(7, 3, 2)


def test_constant_rate_matches_independent_spins():
    # every spin flips at rate gamma0 regardless of state, so
    # P(flipped) = (1 - exp(-2 t)) / 2 and <z> = exp(-2 t |Z|)
    code = build_square(8)
    sim = Simulator(EnergyModel.uniform(code, 0.0), BathSpec("constant_rate"))
    times = np.array([0.0, 0.005, 0.05, 0.3])
    runs = run_many(sim, times, 2000)
    p = (1 - np.exp(-2 * times)) / 2
    m, se = runs[:, :, COL["errors"]].mean(0), runs[:, :, COL["errors"]].std(0) / np.sqrt(len(runs))
    assert np.all(np.abs(m - code.num_spins * p)[1:] < 3 * se[1:])
    # short-time slope 2 L^2 gamma0
    assert m[1] / times[1] == pytest.approx(2 * 8 ** 2, rel=0.1)
    z = runs[:, :, COL["z1"]].mean(0)
    zse = runs[:, :, COL["z1"]].std(0) / np.sqrt(len(runs))
    expected = np.exp(-2 * times * len(code.logicals["Z1"]))
    assert np.all(np.abs(z - expected)[1:] < 3 * zse[1:] + 1e-12)


@pytest.mark.parametrize("case", ["constant", "ohmic_a0", "ohmic_alpha1"])
def test_small_master_equation(case):
    code = build_square(2)
    J = np.array([1.0, -1.0, 0.5, -2.0])
    if case == "constant":
        J, A, alpha, bath = np.zeros(4), 0.0, 0.0, BathSpec("constant_rate")
    elif case == "ohmic_a0":
        A, alpha, bath = 0.5, 0.0, BathSpec("ohmic", T=1.0)
    else:
        A, alpha, bath = 0.5, 1.0, BathSpec("ohmic", T=0.7)
    me = MasterEquation(code, J, A, alpha, bath)
    model = EnergyModel(code, J, InteractionSpec(A, alpha))
    times = np.array([0.0, 0.1, 0.5, 2.0])
    runs = run_many(Simulator(model, bath), times, 4000)
    for name, table in (("anyons", me.anyons), ("errors", me.errors), ("z1", me.z[:, 0])):
        exact = np.array([table @ me.distribution(t) for t in times])
        x = runs[:, :, COL[name]]
        se = x.std(0) / np.sqrt(len(x))
        assert np.all(np.abs(x.mean(0) - exact)[1:] <= 3 * se[1:]), (name, x.mean(0), exact)


def test_direct_scheme_agrees_with_rate_classes():
    code = build_square(2)
    J = np.array([1.0, -1.0, 0.5, -2.0])
    model = EnergyModel(code, J, InteractionSpec(0.5))
    bath = BathSpec("ohmic", T=1.0)
    me = MasterEquation(code, J, 0.5, 0.0, bath)
    times = np.array([0.0, 0.5])
    sim = Simulator(model, bath, force_direct=True)
    assert not sim.use_classes
    runs = run_many(sim, times, 4000)
    exact = me.anyons @ me.distribution(0.5)
    x = runs[:, 1, COL["anyons"]]
    assert abs(x.mean() - exact) <= 3 * x.std() / np.sqrt(len(x))


def test_gibbs_stationary_histogram():
    code = build_square(2)
    J = np.full(4, 1.0)
    bath = BathSpec("ohmic", T=1.0)
    me = MasterEquation(code, J, 0.0, 0.0, bath)
    gibbs = me.gibbs(1.0)
    runs = run_many(Simulator(EnergyModel(code, J), bath), np.array([0.0, 25.0]), 4000)
    N = runs[:, 1, COL["anyons"]]
    for n in (0, 2, 4):
        p_exact = gibbs[me.anyons == n].sum()
        p_hat = (N == n).mean()
        se = np.sqrt(p_exact * (1 - p_exact) / len(N))
        assert abs(p_hat - p_exact) <= 3 * se


def test_cutoff_respected():
    code = build_square(8)
    model = EnergyModel(code, np.full(code.num_plaquettes, -2.0), InteractionSpec(N_max=2))
    runs = run_many(Simulator(model, BathSpec("ohmic", T=1.0)), Schedule.log(0.01, 10, 16).sample_times, 20)
    assert runs[:, :, COL["anyons"]].max() <= 2


def test_zero_cutoff_is_frozen():
    code = build_square(4)
    model = EnergyModel.uniform(code, 1.0, InteractionSpec(N_max=0))
    out = Simulator(model, BathSpec()).run(np.array([0.0, 1.0, 10.0]), 0)
    assert (out[:, COL["anyons"]] == 0).all() and (out[:, COL["z1_ec"]] == 1).all()


def test_anyon_count_even_and_parities_valid():
    code = build_square(8)
    runs = run_many(Simulator(EnergyModel.uniform(code, 0.5), BathSpec()), Schedule.log(0.01, 5, 8).sample_times, 10)
    assert (runs[:, :, COL["anyons"]] % 2 == 0).all()
    assert set(np.unique(runs[:, :, COL["z1_ec"]])) <= {-1.0, 1.0}


def test_uncorrected_parity_decays():
    code = build_square(8)
    ts = ensemble_run(DynamicsConfig(LatticeSpec(8), BathSpec("constant_rate")), Schedule.log(0.001, 1, 8), 400, 1)
    z = ts.observable("z")
    assert z[0] == 1.0
    assert np.all(np.diff(z) <= 3 * ts.stderr["z1"][1:] + 0.02)
    assert abs(z[-1]) < 0.1


def test_ensemble_worker_independent():
    cfg = DynamicsConfig(LatticeSpec(8, "random", 0.5), BathSpec("ohmic", T=1.0),
                         DisorderSpec("ising", 2.0), InteractionSpec(0.5), n_instances=3)
    sched = Schedule.log(0.01, 1.0, 8)
    a = ensemble_run(cfg, sched, 12, master_seed=5, workers=1)
    b = ensemble_run(cfg, sched, 12, master_seed=5, workers=3)
    for name in OBSERVABLES:
        assert a.mean[name].tobytes() == b.mean[name].tobytes()
        assert a.stderr[name].tobytes() == b.stderr[name].tobytes()


def test_single_trajectory_ensemble():
    cfg = DynamicsConfig(LatticeSpec(4), BathSpec("ohmic", T=1.0))
    sched = Schedule.log(0.01, 1.0, 8)
    ts = ensemble_run(cfg, sched, 1, master_seed=9)
    one = run_trajectory(build_instance(cfg, 9, 0), cfg.bath, sched, trajectory_seed(9, 0))
    for name in OBSERVABLES:
        np.testing.assert_array_equal(ts.mean[name], one.mean[name])


def test_observable_helpers():
    cfg = DynamicsConfig(LatticeSpec(4), BathSpec("ohmic", T=1.0))
    ts = ensemble_run(cfg, Schedule.log(0.01, 1.0, 4), 5, master_seed=2)
    np.testing.assert_allclose(ts.observable("z_ec"), ts.per_trajectory("z_ec").mean(0))
    np.testing.assert_allclose(ts.observable("f"), ts.mean["errors"] / 32)
    assert ts.observable_stderr("z_ec").shape == ts.times.shape
