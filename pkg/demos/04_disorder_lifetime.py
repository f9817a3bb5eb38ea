"""Memory lifetime of a thermal toric code with random onsite energies.

Anyons are created, hop and annihilate through contact with an Ohmic bath
at k_B T = 1.  Each plaquette costs +sigma or -sigma.  With a repulsive
constant interaction, moderate disorder traps anyons and lengthens the
lifetime; without interactions it only helps create them.  Small systems
and few trajectories keep this to a couple of minutes.
"""
from __future__ import annotations

from toricsim.analysis import lifetime_ci
from toricsim.energy import BathSpec, DisorderSpec, InteractionSpec
from toricsim.kmc import DynamicsConfig, Schedule, ensemble_run
from toricsim.lattice import LatticeSpec

schedule = Schedule.log(0.01, 30.0, per_decade=16)
for A in (0.5, 0.0):
    print(f"interaction A = {A}")
    for sigma in (0.0, 2.0, 3.5, 8.0):
        cfg = DynamicsConfig(LatticeSpec(12), BathSpec("ohmic", T=1.0), DisorderSpec("ising", sigma),
                             InteractionSpec(A))
        ts = ensemble_run(cfg, schedule, n_traj=100, master_seed=5)
        tau, (lo, hi) = lifetime_ci(ts)
        print(f"  sigma={sigma:4.1f}  tau={tau.tau:6.3f} ({lo:.3f} .. {hi:.3f})  "
              f"final anyon count {ts.observable('anyons')[-1]:.1f}")
