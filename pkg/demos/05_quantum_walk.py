"""Coherent hopping of a single anyon.

On a clean lattice the wave packet spreads ballistically, its width
growing linearly in time.  Random plaquette shapes slow the spread down,
and strong onsite disorder stops it altogether.
"""
from __future__ import annotations

import warnings

import numpy as np

from toricsim.lattice import LatticeSpec
from toricsim.qwalk import BoundaryWarning, WalkSpec, run_walk_ensemble

warnings.simplefilter("ignore", BoundaryWarning)
times = tuple(np.geomspace(0.01, 100, 41))

clean = run_walk_ensemble(WalkSpec(LatticeSpec(32), times=times))
print(f"clean square lattice: exponent {clean.exponent:.2f}")

mixed = run_walk_ensemble(WalkSpec(LatticeSpec(32, "random", 0.5), times=times, samples=5, seed=1))
print(f"random lattice, p_mix = 0.5: exponent {mixed.exponent:.2f}")

frozen = run_walk_ensemble(WalkSpec(LatticeSpec(16), sigma=250.0, times=times, samples=20, seed=2))
print(f"sigma/h = 250: spread at the last times {np.round(frozen.mean[-4:], 2)}")
