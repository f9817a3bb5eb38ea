"""Square and randomized toric codes, side by side."""
from __future__ import annotations

import numpy as np

from toricsim.lattice import LatticeSpec, build_code, dual, validate

# The square code on an 8x8 torus: 128 spins, 64 four-body plaquettes.
square = build_code(LatticeSpec(8))
print("square:", square.num_spins, "spins,", square.num_plaquettes, "plaquettes")
print("plaquette sizes:", np.unique(square.plaquette_sizes(), return_counts=True))

# Randomized codes remove one spin from every other vertical edge.  Each
# affected pair of plaquettes is either split into two 3-body checks or
# merged into a single 6-body check, with probability p_mix for the merge.
for p_mix in (0.0, 0.5, 1.0):
    code = build_code(LatticeSpec(8, "random", p_mix, seed=1))
    sizes, counts = np.unique(code.plaquette_sizes(), return_counts=True)
    print(f"p_mix={p_mix}: plaquette sizes {dict(zip(sizes.tolist(), counts.tolist()))}")

# The validator checks commutation, even overlaps, logical pairing and
# that exactly two qubits are encoded.
code = build_code(LatticeSpec(12, "random", 0.3, seed=7))
print(validate(code))

# Exchanging plaquettes and stars maps p_mix to 1 - p_mix.
d = dual(code)
print("plaquette sizes of the dual:", np.unique(d.plaquette_sizes(), return_counts=True))
