"""Square and randomized toric codes on an L x L torus.

Spins live on the edges of the square lattice.  Unit cell ``c = y * L + x``
owns the horizontal edge ``h(x, y) = 2c`` (from vertex (x, y) to (x+1, y))
and the vertical edge ``v(x, y) = 2c + 1`` (from (x, y) to (x, y+1)).
Plaquette (x, y) is the face with lower-left corner (x, y); star (x, y) sits
on vertex (x, y).

Random codes remove every second vertical edge ("defects", ``x + y`` even)
and repair the two plaquettes and two stars touching each defect in one of
two ways: merge the plaquettes into a 6-body plaquette and cut the stars to
3-body (probability ``p_mix``), or cut the plaquettes to 3-body and merge the
stars into a 6-body star.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LOGICAL_NAMES = ("X1", "Z1", "X2", "Z2")


class InvalidSize(ValueError):
    """Lattice size not allowed for the requested construction."""


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    kind: str = "square"
    p_mix: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("square", "random"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if int(self.L) != self.L or self.L < 2:
            raise InvalidSize(f"L must be an integer >= 2, got {self.L}")
        if self.kind == "random" and self.L % 2:
            raise InvalidSize(f"random lattices need even L (height and width must be even), got {self.L}")
        if self.kind == "random" and self.L < 4:
            # at L = 2 the two plaquettes beside a defect share wrapped edges
            raise InvalidSize(f"random lattices need L >= 4, got {self.L}")
        if not 0.0 <= self.p_mix <= 1.0:
            raise ValueError(f"p_mix must lie in [0, 1], got {self.p_mix}")


def _csr(supports):
    ptr = np.zeros(len(supports) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(s) for s in supports])
    idx = np.concatenate([np.asarray(s, dtype=np.int64) for s in supports]) if supports else np.zeros(0, np.int64)
    return ptr, idx


def _incidence(ptr, idx, num_spins):
    """Map each spin to the (sorted) pair of stabilizers containing it.

    Spins not contained in exactly two stabilizers get -1 entries.
    """
    out = np.full((num_spins, 2), -1, dtype=np.int64)
    count = np.zeros(num_spins, dtype=np.int64)
    for s in range(len(ptr) - 1):
        for q in idx[ptr[s]:ptr[s + 1]]:
            if count[q] < 2:
                out[q, count[q]] = s
            count[q] += 1
    out[count != 2] = -1
    return out


@dataclass(eq=False)
class StabilizerCode:
    """A CSS code with plaquette (Z-type) and star (X-type) stabilizers.

    Supports are stored in CSR form: the spins of plaquette ``p`` are
    ``plaquette_spins[plaquette_ptr[p]:plaquette_ptr[p + 1]]``.
    """

    L: int
    num_spins: int
    plaquette_ptr: np.ndarray
    plaquette_spins: np.ndarray
    plaquette_pos: np.ndarray
    star_ptr: np.ndarray
    star_spins: np.ndarray
    star_pos: np.ndarray
    logicals: dict
    spin_pos: np.ndarray
    spec: LatticeSpec
    dualized: bool = False
    spin_to_plaquettes: np.ndarray = field(init=False, repr=False)
    spin_to_stars: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.spin_to_plaquettes = _incidence(self.plaquette_ptr, self.plaquette_spins, self.num_spins)
        self.spin_to_stars = _incidence(self.star_ptr, self.star_spins, self.num_spins)

    @property
    def num_plaquettes(self):
        return len(self.plaquette_ptr) - 1

    @property
    def num_stars(self):
        return len(self.star_ptr) - 1

    @property
    def plaquettes(self):
        return [self.plaquette_spins[a:b] for a, b in zip(self.plaquette_ptr[:-1], self.plaquette_ptr[1:])]

    @property
    def stars(self):
        return [self.star_spins[a:b] for a, b in zip(self.star_ptr[:-1], self.star_ptr[1:])]

    def plaquette_sizes(self):
        return np.diff(self.plaquette_ptr)

    def star_sizes(self):
        return np.diff(self.star_ptr)

    def logical_mask(self, name):
        mask = np.zeros(self.num_spins, dtype=bool)
        mask[self.logicals[name]] = True
        return mask

    def plaquette_matrix(self):
        """Sparse plaquette-by-spin incidence matrix (int8)."""
        return _support_matrix(self.plaquette_ptr, self.plaquette_spins, self.num_spins)

    def star_matrix(self):
        return _support_matrix(self.star_ptr, self.star_spins, self.num_spins)

    def plaquette_adjacency(self):
        """CSR adjacency of the plaquette graph; every spin is one edge.

        Returns ``(ptr, neighbour, spin)`` with neighbours listed in spin
        order for each plaquette, which fixes BFS tie-breaking.
        """
        P = self.num_plaquettes
        pairs = self.spin_to_plaquettes
        deg = np.bincount(pairs.ravel(), minlength=P)
        ptr = np.zeros(P + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(deg)
        nbr = np.empty(ptr[-1], dtype=np.int64)
        via = np.empty(ptr[-1], dtype=np.int64)
        fill = ptr[:-1].copy()
        for spin, (a, b) in enumerate(pairs):
            nbr[fill[a]] = b
            via[fill[a]] = spin
            fill[a] += 1
            nbr[fill[b]] = a
            via[fill[b]] = spin
            fill[b] += 1
        return ptr, nbr, via

    def __eq__(self, other):
        if not isinstance(other, StabilizerCode):
            return NotImplemented
        return (
            self.L == other.L
            and self.num_spins == other.num_spins
            and self.spec == other.spec
            and self.dualized == other.dualized
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in (
                "plaquette_ptr", "plaquette_spins", "plaquette_pos",
                "star_ptr", "star_spins", "star_pos", "spin_pos"))
            and all(np.array_equal(self.logicals[k], other.logicals[k]) for k in LOGICAL_NAMES)
        )

    def to_dict(self):
        return {
            "spec": {"L": self.spec.L, "kind": self.spec.kind, "p_mix": self.spec.p_mix, "seed": self.spec.seed},
            "dualized": self.dualized,
            "L": self.L,
            "num_spins": self.num_spins,
            "plaquettes": [s.tolist() for s in self.plaquettes],
            "plaquette_positions": self.plaquette_pos.tolist(),
            "stars": [s.tolist() for s in self.stars],
            "star_positions": self.star_pos.tolist(),
            "spin_positions": self.spin_pos.tolist(),
            "logicals": {k: np.asarray(self.logicals[k]).tolist() for k in LOGICAL_NAMES},
        }

    @classmethod
    def from_dict(cls, d):
        pp, ps = _csr(d["plaquettes"])
        sp_, ss = _csr(d["stars"])
        return cls(
            L=int(d["L"]),
            num_spins=int(d["num_spins"]),
            plaquette_ptr=pp,
            plaquette_spins=ps,
            plaquette_pos=np.asarray(d["plaquette_positions"], dtype=float).reshape(-1, 2),
            star_ptr=sp_,
            star_spins=ss,
            star_pos=np.asarray(d["star_positions"], dtype=float).reshape(-1, 2),
            logicals={k: np.asarray(d["logicals"][k], dtype=np.int64) for k in LOGICAL_NAMES},
            spin_pos=np.asarray(d["spin_positions"], dtype=float).reshape(-1, 2),
            spec=LatticeSpec(**d["spec"]),
            dualized=bool(d.get("dualized", False)),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _support_matrix(ptr, idx, num_spins):
    rows = np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))
    data = np.ones(len(idx), dtype=np.int8)
    return sp.csr_matrix((data, (rows, idx)), shape=(len(ptr) - 1, num_spins))


def _h(L, x, y):
    return 2 * ((y % L) * L + (x % L))


def _v(L, x, y):
    return 2 * ((y % L) * L + (x % L)) + 1


def _edge_positions(L):
    pos = np.empty((2 * L * L, 2))
    for y in range(L):
        for x in range(L):
            pos[_h(L, x, y)] = (x + 0.5, y)
            pos[_v(L, x, y)] = (x, y + 0.5)
    return pos


def _square_parts(L):
    plaquettes, plaq_pos, stars, star_pos = [], [], [], []
    for y in range(L):
        for x in range(L):
            plaquettes.append([_h(L, x, y), _v(L, x + 1, y), _h(L, x, y + 1), _v(L, x, y)])
            plaq_pos.append((x + 0.5, y + 0.5))
    for y in range(L):
        for x in range(L):
            stars.append([_h(L, x, y), _v(L, x, y), _h(L, x - 1, y), _v(L, x, y - 1)])
            star_pos.append((float(x), float(y)))
    return plaquettes, np.array(plaq_pos), stars, np.array(star_pos)


def build_square(L):
    """Kitaev's toric code on an L x L torus (2 L^2 spins)."""
    spec = LatticeSpec(L=L, kind="square")
    plaquettes, plaq_pos, stars, star_pos = _square_parts(L)
    logicals = {
        "X1": np.array([_h(L, 0, y) for y in range(L)]),
        "Z1": np.array([_h(L, x, 0) for x in range(L)]),
        "X2": np.array([_v(L, x, 0) for x in range(L)]),
        "Z2": np.array([_v(L, 0, y) for y in range(L)]),
    }
    pp, ps = _csr(plaquettes)
    sp_, ss = _csr(stars)
    return StabilizerCode(
        L=L, num_spins=2 * L * L,
        plaquette_ptr=pp, plaquette_spins=ps, plaquette_pos=plaq_pos,
        star_ptr=sp_, star_spins=ss, star_pos=star_pos,
        logicals={k: np.sort(v) for k, v in logicals.items()},
        spin_pos=_edge_positions(L), spec=spec,
    )


def defect_pattern(L):
    """Vertical-edge spins removed for random lattices, in cell order.

    Every second vertical edge of each row, starting on the first edge in
    even rows and the second edge in odd rows.
    """
    if L < 2 or L % 2:
        raise InvalidSize(f"defect pattern needs even L >= 2 (height and width must be even), got {L}")
    return np.array([_v(L, x, y) for y in range(L) for x in range(L) if (x + y) % 2 == 0], dtype=np.int64)


def _wrapped_centroid(points, L):
    ref = points[0]
    d = points - ref
    d -= L * np.round(d / L)
    return (ref + d.mean(axis=0)) % L


def build_random(spec):
    """Random 3-body/6-body toric code from a :class:`LatticeSpec`."""
    if spec.kind != "random":
        raise ValueError("build_random needs a spec with kind='random'")
    L = spec.L
    defects = defect_pattern(L)
    rng = np.random.default_rng(spec.seed)
    merge_plaquettes = rng.random(len(defects)) < spec.p_mix

    sq_plaq, sq_plaq_pos, sq_stars, sq_star_pos = _square_parts(L)
    epos = _edge_positions(L)
    keep = np.ones(2 * L * L, dtype=bool)
    keep[defects] = False
    new_index = np.full(2 * L * L, -1, dtype=np.int64)
    new_index[keep] = np.arange(keep.sum())

    plaquettes, plaq_pos, stars, star_pos = [], [], [], []
    for d, merge in zip(defects, merge_plaquettes):
        c = d // 2
        x, y = c % L, c // L
        left = ((x - 1) % L) + y * L
        right = c
        bottom = c
        top = x + ((y + 1) % L) * L
        if merge:
            support = [s for s in sq_plaq[left] + sq_plaq[right] if s != d]
            plaquettes.append(support)
            plaq_pos.append(_wrapped_centroid(epos[support], L))
            for st in (bottom, top):
                stars.append([s for s in sq_stars[st] if s != d])
                star_pos.append(sq_star_pos[st])
        else:
            for pl in (left, right):
                plaquettes.append([s for s in sq_plaq[pl] if s != d])
                plaq_pos.append(sq_plaq_pos[pl])
            support = [s for s in sq_stars[bottom] + sq_stars[top] if s != d]
            stars.append(support)
            star_pos.append(_wrapped_centroid(epos[support], L))

    # Zig-zag logicals for the second qubit: Z2 detours right around the
    # defects of column 0, X2 detours upward around the defects of row 0.
    z2, x2 = [], []
    for yy in range(L):
        if (0 + yy) % 2 == 0:
            z2 += [_h(L, 0, yy), _v(L, 1, yy), _h(L, 0, yy + 1)]
        else:
            z2.append(_v(L, 0, yy))
    for xx in range(L):
        if (xx + 0) % 2 == 0:
            x2 += [_h(L, xx - 1, 1), _v(L, xx, 1), _h(L, xx, 1)]
        else:
            x2.append(_v(L, xx, 0))
    old_logicals = {
        "X1": [_h(L, 0, yy) for yy in range(L)],
        "Z1": [_h(L, xx, 0) for xx in range(L)],
        "X2": x2,
        "Z2": z2,
    }
    logicals = {}
    for name, spins in old_logicals.items():
        # a spin visited twice by a detour cancels out
        uniq, counts = np.unique(np.asarray(spins), return_counts=True)
        spins = uniq[counts % 2 == 1]
        logicals[name] = np.sort(new_index[spins])

    pp, ps = _csr([new_index[np.asarray(s)] for s in plaquettes])
    sp_, ss = _csr([new_index[np.asarray(s)] for s in stars])
    return StabilizerCode(
        L=L, num_spins=int(keep.sum()),
        plaquette_ptr=pp, plaquette_spins=ps, plaquette_pos=np.array(plaq_pos, dtype=float),
        star_ptr=sp_, star_spins=ss, star_pos=np.array(star_pos, dtype=float),
        logicals=logicals, spin_pos=epos[keep], spec=spec,
    )


def build_code(spec):
    """Dispatch on ``spec.kind``."""
    if spec.kind == "square":
        return build_square(spec.L)
    return build_random(spec)


def dual(code):
    """Exchange plaquettes with stars and X with Z logicals."""
    return StabilizerCode(
        L=code.L, num_spins=code.num_spins,
        plaquette_ptr=code.star_ptr, plaquette_spins=code.star_spins, plaquette_pos=code.star_pos,
        star_ptr=code.plaquette_ptr, star_spins=code.plaquette_spins, star_pos=code.plaquette_pos,
        logicals={"X1": code.logicals["Z1"], "Z1": code.logicals["X1"],
                  "X2": code.logicals["Z2"], "Z2": code.logicals["X2"]},
        spin_pos=code.spin_pos, spec=code.spec, dualized=not code.dualized,
    )


def gf2_rank(matrix):
    """Rank over GF(2) of a dense 0/1 matrix (rows packed into uint64 words)."""
    a = np.asarray(matrix, dtype=np.uint8) & 1
    if a.size == 0:
        return 0
    rows, cols = a.shape
    pad = (-cols) % 64
    packed = np.packbits(np.pad(a, ((0, 0), (0, pad))), axis=1, bitorder="little")
    words = packed.view(np.uint64).copy()
    rank = 0
    for col in range(cols):
        w, bit = divmod(col, 64)
        mask = np.uint64(1) << np.uint64(bit)
        hits = np.nonzero(words[rank:, w] & mask)[0]
        if len(hits) == 0:
            continue
        piv = rank + hits[0]
        if piv != rank:
            words[[rank, piv]] = words[[piv, rank]]
        below = np.nonzero(words[rank + 1:, w] & mask)[0] + rank + 1
        words[below] ^= words[rank]
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`: per-check pass flag and offending items."""

    checks: dict = field(default_factory=dict)

    def add(self, name, offenders):
        offenders = [o.tolist() if isinstance(o, np.ndarray) else o for o in offenders]
        self.checks[name] = (len(offenders) == 0, offenders)

    @property
    def ok(self):
        return all(passed for passed, _ in self.checks.values())

    def failures(self):
        return {k: v[1] for k, v in self.checks.items() if not v[0]}

    def __str__(self):
        lines = []
        for name, (passed, offenders) in self.checks.items():
            status = "pass" if passed else f"FAIL {offenders[:10]}"
            lines.append(f"{name}: {status}")
        return "\n".join(lines)


def validate(code, check_rank=True):
    """Check the structural invariants of a code and report offenders."""
    report = ValidationReport()
    n = code.num_spins
    Hz = code.plaquette_matrix()
    Hx = code.star_matrix()
    # entries of an incidence matrix must be 0/1 (no repeated spins)
    report.add("plaquette_supports_simple", list(np.nonzero((Hz.max(axis=1).toarray().ravel() > 1))[0]))
    report.add("star_supports_simple", list(np.nonzero((Hx.max(axis=1).toarray().ravel() > 1))[0]))
    pc = np.asarray(Hz.sum(axis=0)).ravel()
    sc = np.asarray(Hx.sum(axis=0)).ravel()
    report.add("spin_in_two_plaquettes", list(np.nonzero(pc != 2)[0]))
    report.add("spin_in_two_stars", list(np.nonzero(sc != 2)[0]))

    overlap = (Hz.astype(np.int32) @ Hx.astype(np.int32).T).tocoo()
    odd = overlap.data % 2 == 1
    report.add("plaquette_star_commute", list(zip(overlap.row[odd].tolist(), overlap.col[odd].tolist())))

    masks = {k: code.logical_mask(k).astype(np.int32) for k in LOGICAL_NAMES}
    bad = []
    for name in ("X1", "X2"):
        ov = Hz.astype(np.int32) @ masks[name]
        bad += [(name, "plaquette", int(p)) for p in np.nonzero(ov % 2)[0]]
    for name in ("Z1", "Z2"):
        ov = Hx.astype(np.int32) @ masks[name]
        bad += [(name, "star", int(s)) for s in np.nonzero(ov % 2)[0]]
    report.add("logicals_commute_with_stabilizers", bad)

    bad = []
    for i in (1, 2):
        for j in (1, 2):
            odd_overlap = int(masks[f"X{i}"] @ masks[f"Z{j}"]) % 2 == 1
            if odd_overlap != (i == j):
                bad.append((f"X{i}", f"Z{j}"))
    report.add("logical_pairing", bad)

    sizes = np.concatenate([code.plaquette_sizes(), code.star_sizes()])
    if code.spec.kind == "square":
        expected = (2 * code.L ** 2, code.L ** 2, code.L ** 2)
        got = (n, code.num_plaquettes, code.num_stars)
        report.add("square_counts", [] if got == expected else [got])
        report.add("stabilizer_sizes", list(np.nonzero(sizes != 4)[0]))
    else:
        got = (n, code.num_plaquettes + code.num_stars)
        expected = (3 * code.L ** 2 // 2, 3 * code.L ** 2 // 2)
        report.add("random_counts", [] if got == expected else [got])
        report.add("stabilizer_sizes", list(np.nonzero((sizes != 3) & (sizes != 6))[0]))

    k_count = n - (code.num_plaquettes + code.num_stars - 2)
    report.add("code_dimension_count", [] if k_count == 2 else [k_count])
    if check_rank:
        k_rank = n - gf2_rank(Hz.toarray()) - gf2_rank(Hx.toarray())
        report.add("code_dimension_rank", [] if k_rank == 2 else [k_rank])
    return report
