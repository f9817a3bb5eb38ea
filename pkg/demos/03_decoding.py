"""Decode one error pattern by hand."""
from __future__ import annotations

import numpy as np

from toricsim.decoder import Decoder, anyons_of, knn_graph
from toricsim.lattice import build_square

code = build_square(8)
decoder = Decoder(code)

# Flip two neighbouring vertical edges.  The plaquette between them sees
# both flips, so only the two end plaquettes are excited.
error = np.zeros(code.num_spins, dtype=np.uint8)
error[[3, 5]] = 1
anyons = anyons_of(code, error)
print("anyons at plaquettes", anyons.tolist())

# The decoder pairs anyons along shortest paths found by breadth-first
# search and picks the pairing of minimum total length.
graph = knn_graph(code, anyons)
print("candidate edges (i, j, length):", graph.edges())
correction = decoder.decode(anyons)
print("pairs:", correction.pairs, "correction spins:", correction.spins.tolist())
print("logical parities after correction:", decoder.corrected_parities(error))

# A string that wraps around the torus leaves no anyons but flips a logical.
wrap = np.zeros(code.num_spins, dtype=np.uint8)
wrap[code.logicals["X1"]] = 1
print("anyons of a wrapping string:", anyons_of(code, wrap).tolist())
print("parities:", decoder.corrected_parities(wrap))

# At a higher density the pairing becomes ambiguous and sometimes fails.
rng = np.random.default_rng(3)
fails = 0
for _ in range(200):
    e = (rng.random(code.num_spins) < 0.12).astype(np.uint8)
    fails += decoder.corrected_parities(e) != (1, 1)
print(f"logical failures at f = 0.12 on L = 8: {fails}/200")
