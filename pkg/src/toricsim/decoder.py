"""Minimum-weight perfect-matching decoder for plaquette syndromes.

Anyons are joined by shortest strings in the plaquette graph (two plaquettes
are adjacent when they share a spin, each step costs one flip).  Each anyon
runs a breadth-first search until ``k`` other anyons are found; every anyon
at the distance of the k-th one is kept as well, so the graph does not
depend on neighbour ordering.  If the sparse graph has no perfect matching
``k`` is doubled, ending at the complete graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .blossom import NoPerfectMatching, min_weight_perfect_matching_kernel

DEFAULT_K = 10


class InvalidSyndrome(ValueError):
    """Syndrome with an odd number of anyons or out-of-range ids."""


@njit(cache=True)
def syndrome_kernel(ptr, spins, error):
    P = ptr.shape[0] - 1
    occ = np.zeros(P, np.uint8)
    for p in range(P):
        s = 0
        for k in range(ptr[p], ptr[p + 1]):
            s ^= error[spins[k]]
        occ[p] = s
    return occ


@njit(cache=True)
def knn_kernel(adj_ptr, adj_nbr, adj_via, anyons, k):
    """Sparse anyon graph from per-anyon BFS.

    Returns ``(ei, ej, w, path_ptr, path_spins)`` where edge ``e`` joins
    anyons ``ei[e] < ej[e]`` (indices into ``anyons``) with a string of
    ``w[e]`` spins ``path_spins[path_ptr[e]:path_ptr[e + 1]]``.
    """
    P = adj_ptr.shape[0] - 1
    n = anyons.shape[0]
    label = np.full(P, -1, np.int64)
    for i in range(n):
        label[anyons[i]] = i
    stamp = np.full(P, -1, np.int64)
    dist = np.zeros(P, np.int64)
    parent = np.zeros(P, np.int64)
    parent_spin = np.zeros(P, np.int64)
    queue = np.empty(P, np.int64)

    # per-source findings (target index, distance, plaquette) for dedup
    found_ptr = np.zeros(n + 1, np.int64)
    cap = max(16, n * (k + 4))
    found_t = np.empty(cap, np.int64)
    nfound = 0

    ei_l = np.empty(cap, np.int64)
    ej_l = np.empty(cap, np.int64)
    w_l = np.empty(cap, np.int64)
    pptr_l = np.zeros(cap + 1, np.int64)
    pcap = max(64, cap * 8)
    pool = np.empty(pcap, np.int64)
    ne = 0

    for i in range(n):
        src = anyons[i]
        head = 0
        tail = 0
        queue[tail] = src
        tail += 1
        stamp[src] = i
        dist[src] = 0
        got = 0
        shell = -1
        while head < tail:
            u = queue[head]
            head += 1
            if shell >= 0 and dist[u] >= shell:
                break
            for a in range(adj_ptr[u], adj_ptr[u + 1]):
                v = adj_nbr[a]
                if stamp[v] == i:
                    continue
                stamp[v] = i
                dist[v] = dist[u] + 1
                parent[v] = u
                parent_spin[v] = adj_via[a]
                queue[tail] = v
                tail += 1
                j = label[v]
                if j < 0:
                    continue
                if shell >= 0 and dist[v] > shell:
                    continue
                got += 1
                if got == k:
                    shell = dist[v]
                if nfound == found_t.shape[0]:
                    tmp = np.empty(2 * nfound, np.int64)
                    tmp[:nfound] = found_t[:nfound]
                    found_t = tmp
                found_t[nfound] = j
                nfound += 1
                # an edge towards an earlier source is skipped if that source
                # already reached this one
                if j < i:
                    dup = False
                    for q in range(found_ptr[j], found_ptr[j + 1]):
                        if found_t[q] == i:
                            dup = True
                            break
                    if dup:
                        continue
                if ne == ei_l.shape[0]:
                    m2 = 2 * ne
                    t1 = np.empty(m2, np.int64)
                    t1[:ne] = ei_l[:ne]
                    ei_l = t1
                    t2 = np.empty(m2, np.int64)
                    t2[:ne] = ej_l[:ne]
                    ej_l = t2
                    t3 = np.empty(m2, np.int64)
                    t3[:ne] = w_l[:ne]
                    w_l = t3
                    t4 = np.zeros(m2 + 1, np.int64)
                    t4[:ne + 1] = pptr_l[:ne + 1]
                    pptr_l = t4
                d = dist[v]
                if pptr_l[ne] + d > pool.shape[0]:
                    tmp = np.empty(2 * (pptr_l[ne] + d), np.int64)
                    tmp[:pptr_l[ne]] = pool[:pptr_l[ne]]
                    pool = tmp
                ei_l[ne] = min(i, j)
                ej_l[ne] = max(i, j)
                w_l[ne] = d
                pos = pptr_l[ne] + d - 1
                x = v
                while x != src:
                    pool[pos] = parent_spin[x]
                    pos -= 1
                    x = parent[x]
                pptr_l[ne + 1] = pptr_l[ne] + d
                ne += 1
        found_ptr[i + 1] = nfound
    return ei_l[:ne].copy(), ej_l[:ne].copy(), w_l[:ne].copy(), pptr_l[:ne + 1].copy(), pool[:pptr_l[ne]].copy()


@njit(cache=True)
def decode_kernel(adj_ptr, adj_nbr, adj_via, anyons, k, num_spins):
    """Correction bit vector for ``anyons``; ``ok`` False if matching failed."""
    n = anyons.shape[0]
    corr = np.zeros(num_spins, np.uint8)
    if n == 0:
        return corr, True, k
    kk = k
    while True:
        kk_eff = min(kk, n - 1)
        ei, ej, w, pptr, pool = knn_kernel(adj_ptr, adj_nbr, adj_via, anyons, kk_eff)
        ok = False
        if ei.shape[0] > 0:
            mate_edge, ok = min_weight_perfect_matching_kernel(n, ei, ej, w)
        if ok:
            for v in range(n):
                e = mate_edge[v]
                if ei[e] == v:
                    for q in range(pptr[e], pptr[e + 1]):
                        corr[pool[q]] ^= 1
            return corr, True, kk_eff
        if kk_eff >= n - 1:
            return corr, False, kk_eff
        kk *= 2


@njit(cache=True)
def parity_kernel(bits, support):
    s = 0
    for q in support:
        s ^= bits[q]
    return 1 - 2 * s


@dataclass
class MatchGraph:
    anyons: np.ndarray
    ei: np.ndarray
    ej: np.ndarray
    weight: np.ndarray
    path_ptr: np.ndarray
    path_spins: np.ndarray

    def path(self, e):
        return self.path_spins[self.path_ptr[e]:self.path_ptr[e + 1]]

    def edges(self):
        return [(int(a), int(b), int(c)) for a, b, c in zip(self.ei, self.ej, self.weight)]


@dataclass
class Correction:
    spins: np.ndarray
    pairs: list
    k_used: int


class Decoder:
    """Decoder bound to one code; caches the plaquette adjacency."""

    def __init__(self, code, k=DEFAULT_K):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.code = code
        self.k = int(k)
        self.adj = code.plaquette_adjacency()
        self.z_supports = (np.asarray(code.logicals["Z1"], np.int64), np.asarray(code.logicals["Z2"], np.int64))

    def _check(self, anyons):
        anyons = np.asarray(anyons, dtype=np.int64)
        if len(anyons) % 2:
            raise InvalidSyndrome(f"odd number of anyons ({len(anyons)})")
        if len(anyons) and (anyons.min() < 0 or anyons.max() >= self.code.num_plaquettes):
            raise InvalidSyndrome("anyon id out of range")
        if len(np.unique(anyons)) != len(anyons):
            raise InvalidSyndrome("repeated anyon id")
        return anyons

    def syndrome(self, error):
        return extract_syndrome(self.code, error)

    def graph(self, anyons, k=None):
        anyons = self._check(anyons)
        kk = self.k if k is None else k
        kk = max(1, min(kk, len(anyons) - 1)) if len(anyons) > 1 else 1
        return MatchGraph(anyons, *knn_kernel(*self.adj, anyons, kk))

    def decode(self, anyons):
        """Correction for a syndrome given as plaquette ids."""
        anyons = self._check(anyons)
        corr, ok, k_used = decode_kernel(*self.adj, anyons, self.k, self.code.num_spins)
        if not ok:
            raise NoPerfectMatching("no perfect matching even on the complete anyon graph")
        g = self.graph(anyons, k_used) if len(anyons) else None
        pairs = []
        if g is not None:
            mate_edge, _ = min_weight_perfect_matching_kernel(len(anyons), g.ei, g.ej, g.weight)
            pairs = sorted({(int(anyons[g.ei[e]]), int(anyons[g.ej[e]])) for e in mate_edge})
        return Correction(np.nonzero(corr)[0], pairs, int(k_used))

    def correction_bits(self, anyons):
        anyons = self._check(anyons)
        corr, ok, _ = decode_kernel(*self.adj, anyons, self.k, self.code.num_spins)
        if not ok:
            raise NoPerfectMatching("no perfect matching even on the complete anyon graph")
        return corr

    def parities(self, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        return parity_kernel(bits, self.z_supports[0]), parity_kernel(bits, self.z_supports[1])

    def corrected_parities(self, error):
        """(z1, z2) of ``error`` combined with its decoded correction."""
        error = np.asarray(error, dtype=np.uint8)
        anyons = np.nonzero(self.syndrome(error))[0]
        residual = error ^ self.correction_bits(anyons)
        return self.parities(residual)


def extract_syndrome(code, error):
    """Occupation bit vector: plaquettes with odd overlap with ``error``."""
    error = np.asarray(error, dtype=np.uint8)
    if error.shape != (code.num_spins,):
        raise ValueError(f"error vector must have length {code.num_spins}")
    return syndrome_kernel(code.plaquette_ptr, code.plaquette_spins, error)


def anyons_of(code, error):
    return np.nonzero(extract_syndrome(code, error))[0]


def logical_parities(code, residual):
    """(z1, z2) = (-1)^{|residual & Z_i|}."""
    r = np.asarray(residual, dtype=np.uint8)
    return tuple(1 - 2 * (int(r[code.logicals[name]].sum()) % 2) for name in ("Z1", "Z2"))


def decode(code, anyons, k=DEFAULT_K):
    return Decoder(code, k).decode(anyons)


def knn_graph(code, anyons, k=DEFAULT_K):
    return Decoder(code, k).graph(anyons)
