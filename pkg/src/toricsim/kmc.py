"""Continuous-time kinetic Monte Carlo for plaquette anyons.

Each spin flip is a move with rate ``gamma(omega)``.  Starting from the
error-free state, the trajectory repeatedly draws an exponential waiting
time from the total rate ``R`` and a move with probability ``rate / R``.
At sample times the anyon count, error count and the raw and decoded
logical parities are recorded.  Decoding works on a copy; the evolving
state is never corrected.

Two move-selection schemes are compiled:

* rate classes, used when the interaction is constant (``alpha = 0`` or
  ``A = 0``) and the onsite energies take few distinct values.  A move's
  rate is then fixed by its kind (create, annihilate, hop), the onsite part
  of its energy change, and the total anyon count.  Moves are kept in
  per-class member lists, so selection is O(number of classes) and a flip
  touches only the spins of the two toggled plaquettes.
* direct summation over all spins, used otherwise (Gaussian onsite
  energies or ``alpha > 0``), O(num_spins) per event.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .decoder import DEFAULT_K, decode_kernel
from .energy import BathSpec, DisorderSpec, EnergyModel, InteractionSpec, rate_kernel, sample_onsite
from .lattice import LatticeSpec, build_code

MAX_CLASSES = 64
OBSERVABLES = ("anyons", "errors", "z1", "z2", "z1_ec", "z2_ec")


@dataclass(frozen=True)
class Schedule:
    sample_times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.sample_times, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("need at least one sample time")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be non-negative and strictly increasing")
        object.__setattr__(self, "sample_times", t)

    @property
    def t_end(self):
        return float(self.sample_times[-1])

    @classmethod
    def log(cls, t_min, t_end, per_decade=64, include_zero=True):
        """Logarithmic grid with ``per_decade`` points per decade."""
        n = max(2, int(np.ceil(per_decade * np.log10(t_end / t_min))) + 1)
        t = np.geomspace(t_min, t_end, n)
        return cls(np.concatenate([[0.0], t]) if include_zero else t)


@njit(cache=True)
def _interaction_delta(kind, N, A):
    # energy change from a constant pair interaction for a move of `kind`
    if kind == 0:
        return A * (2 * N + 1)
    if kind == 1:
        return -A * (2 * N - 3)
    return 0.0


@njit(cache=True)
def _class_rate(c, N, cls_kind, cls_onsite, A, n_max, is_ohmic, beta, kappa1, gamma0):
    kind = cls_kind[c]
    if kind == 0 and n_max >= 0 and N + 2 > n_max:
        return 0.0
    dE = cls_onsite[c] + _interaction_delta(kind, N, A)
    return rate_kernel(-dE, is_ohmic, beta, kappa1, gamma0)


@njit(cache=True)
def _decode_parities(occ, err, adj_ptr, adj_nbr, adj_via, k, z1, z2):
    n = 0
    for p in range(occ.shape[0]):
        n += occ[p]
    anyons = np.empty(n, np.int64)
    m = 0
    for p in range(occ.shape[0]):
        if occ[p]:
            anyons[m] = p
            m += 1
    corr, ok, _ = decode_kernel(adj_ptr, adj_nbr, adj_via, anyons, k, err.shape[0])
    s1 = 0
    for q in z1:
        s1 ^= err[q] ^ corr[q]
    s2 = 0
    for q in z2:
        s2 ^= err[q] ^ corr[q]
    return 1 - 2 * s1, 1 - 2 * s2, ok


@njit(cache=True)
def _trajectory_kernel(seed, times, sp2p, plaq_ptr, plaq_spins, J, U, use_classes,
                       class_of, cls_kind, cls_onsite, A, alpha_zero, n_max,
                       is_ohmic, beta, kappa1, gamma0,
                       adj_ptr, adj_nbr, adj_via, k, z1, z2):
    np.random.seed(seed)
    ns = sp2p.shape[0]
    P = J.shape[0]
    T = times.shape[0]
    out = np.zeros((T, 6), np.float64)
    err = np.zeros(ns, np.uint8)
    occ = np.zeros(P, np.uint8)
    in_z1 = np.zeros(ns, np.uint8)
    in_z2 = np.zeros(ns, np.uint8)
    for q in z1:
        in_z1[q] = 1
    for q in z2:
        in_z2[q] = 1
    N = 0
    n_err = 0
    p1 = 0
    p2 = 0
    t = 0.0
    events = 0
    last_events = -1
    last_ec1 = 1
    last_ec2 = 1
    decode_failures = 0

    C = cls_kind.shape[0]
    members = np.zeros((max(C, 1), ns), np.int64)
    count = np.zeros(max(C, 1), np.int64)
    where = np.zeros(ns, np.int64)
    cur = np.zeros(ns, np.int64)
    crate = np.zeros(max(C, 1), np.float64)
    if use_classes:
        for i in range(ns):
            c = class_of[i, 0]
            cur[i] = c
            where[i] = count[c]
            members[c, count[c]] = i
            count[c] += 1

    V = np.zeros(P, np.float64)  # interaction potential felt at each site
    srate = np.zeros(ns, np.float64)

    for s in range(T):
        t_target = times[s]
        while True:
            # total rate and move choice
            R = 0.0
            if use_classes:
                for c in range(C):
                    crate[c] = _class_rate(c, N, cls_kind, cls_onsite, A, n_max, is_ohmic, beta, kappa1, gamma0)
                    R += crate[c] * count[c]
            else:
                for i in range(ns):
                    a = sp2p[i, 0]
                    b = sp2p[i, 1]
                    sa = 1 - 2 * occ[a]
                    sb = 1 - 2 * occ[b]
                    if sa > 0 and sb > 0 and n_max >= 0 and N + 2 > n_max:
                        srate[i] = 0.0
                        continue
                    if alpha_zero:
                        Va = A * (N - occ[a])
                        Vb = A * (N - occ[b])
                        Uab = A
                    else:
                        Va = V[a]
                        Vb = V[b]
                        Uab = U[a, b]
                    dE = sa * J[a] + sb * J[b] + sa * Va + sb * Vb + sa * sb * Uab
                    r = rate_kernel(-dE, is_ohmic, beta, kappa1, gamma0)
                    srate[i] = r
                    R += r
            if R <= 0.0:
                t = t_target
                break
            dt = -np.log(1.0 - np.random.random()) / R
            if t + dt > t_target:
                t = t_target
                break
            t += dt
            x = np.random.random() * R
            chosen = -1
            if use_classes:
                acc = 0.0
                cc = -1
                for c in range(C):
                    w = crate[c] * count[c]
                    if w <= 0.0:
                        continue
                    cc = c
                    acc += w
                    if x < acc:
                        break
                m = int(np.random.random() * count[cc])
                if m >= count[cc]:
                    m = count[cc] - 1
                chosen = members[cc, m]
            else:
                acc = 0.0
                for i in range(ns):
                    if srate[i] <= 0.0:
                        continue
                    chosen = i
                    acc += srate[i]
                    if x < acc:
                        break
            # apply the flip
            i = chosen
            a = sp2p[i, 0]
            b = sp2p[i, 1]
            err[i] ^= 1
            n_err += 1 if err[i] else -1
            p1 ^= in_z1[i]
            p2 ^= in_z2[i]
            for site in (a, b):
                occ[site] ^= 1
                if occ[site]:
                    N += 1
                else:
                    N -= 1
                if not alpha_zero:
                    sgn = 1.0 if occ[site] else -1.0
                    for q in range(P):
                        V[q] += sgn * U[q, site]
            if use_classes:
                for site in (a, b):
                    for kk in range(plaq_ptr[site], plaq_ptr[site + 1]):
                        j = plaq_spins[kk]
                        state = occ[sp2p[j, 0]] + 2 * occ[sp2p[j, 1]]
                        c_new = class_of[j, state]
                        c_old = cur[j]
                        if c_new == c_old:
                            continue
                        last = members[c_old, count[c_old] - 1]
                        members[c_old, where[j]] = last
                        where[last] = where[j]
                        count[c_old] -= 1
                        where[j] = count[c_new]
                        members[c_new, count[c_new]] = j
                        count[c_new] += 1
                        cur[j] = c_new
            events += 1
        out[s, 0] = N
        out[s, 1] = n_err
        out[s, 2] = 1 - 2 * p1
        out[s, 3] = 1 - 2 * p2
        if events != last_events:
            ec1, ec2, ok = _decode_parities(occ, err, adj_ptr, adj_nbr, adj_via, k, z1, z2)
            if not ok:
                decode_failures += 1
            last_ec1 = ec1
            last_ec2 = ec2
            last_events = events
        out[s, 4] = last_ec1
        out[s, 5] = last_ec2
    return out, events, decode_failures


def _class_tables(code, J):
    """Rate classes (kind, onsite energy change) for every spin and local state.

    Returns ``None`` if there are more than ``MAX_CLASSES`` distinct classes.
    """
    a = code.spin_to_plaquettes[:, 0]
    b = code.spin_to_plaquettes[:, 1]
    keys = np.empty((code.num_spins, 4, 2))
    for state in range(4):
        na, nb = state & 1, state >> 1
        kind = 0 if state == 0 else (1 if state == 3 else 2)
        keys[:, state, 0] = kind
        keys[:, state, 1] = (1 - 2 * na) * J[a] + (1 - 2 * nb) * J[b]
    flat = keys.reshape(-1, 2)
    rounded = np.round(flat[:, 1], 9)
    uniq, inverse = np.unique(np.stack([flat[:, 0], rounded], axis=1), axis=0, return_inverse=True)
    if len(uniq) > MAX_CLASSES:
        return None
    # representative exact onsite value for each class
    onsite = np.zeros(len(uniq))
    onsite[inverse.ravel()] = flat[:, 1]
    return inverse.reshape(code.num_spins, 4).astype(np.int64), uniq[:, 0].astype(np.int64), onsite


class Simulator:
    """Compiled trajectory runner for one (code, energy model, bath)."""

    def __init__(self, model: EnergyModel, bath: BathSpec, k=DEFAULT_K, force_direct=False):
        self.model = model
        self.code = model.code
        self.bath = bath
        self.k = int(k)
        code = self.code
        inter = model.interaction
        self.n_max = -1 if inter.N_max is None else int(inter.N_max)
        self.alpha_zero = model.constant_interaction
        tables = None if (force_direct or not self.alpha_zero) else _class_tables(code, model.J)
        self.use_classes = tables is not None
        if tables is None:
            tables = (np.zeros((code.num_spins, 4), np.int64), np.zeros(0, np.int64), np.zeros(0))
        self.class_of, self.cls_kind, self.cls_onsite = tables
        self.U = np.zeros((1, 1)) if self.alpha_zero else model.pair_matrix()
        self.A = float(inter.A) if inter.A else 0.0
        self.adj = code.plaquette_adjacency()
        self.z1 = np.asarray(code.logicals["Z1"], np.int64)
        self.z2 = np.asarray(code.logicals["Z2"], np.int64)

    def run(self, schedule: Schedule, seed):
        """One trajectory; returns an array (len(times), 6) ordered as OBSERVABLES."""
        times = schedule.sample_times if isinstance(schedule, Schedule) else Schedule(schedule).sample_times
        is_ohmic, beta, kappa1, gamma0 = self.bath.kernel_args()
        out, events, failures = _trajectory_kernel(
            np.uint32(seed), times, self.code.spin_to_plaquettes, self.code.plaquette_ptr, self.code.plaquette_spins,
            self.model.J, self.U, self.use_classes, self.class_of, self.cls_kind, self.cls_onsite,
            self.A, self.alpha_zero, self.n_max, is_ohmic, beta, kappa1, gamma0,
            *self.adj, self.k, self.z1, self.z2)
        if failures:
            raise RuntimeError("decoder found no perfect matching during a trajectory")
        self.last_events = int(events)
        return out


def trajectory_seed(master_seed, index):
    """32-bit seed of trajectory ``index``, a pure function of (master, index)."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(0, index)).generate_state(1)[0])


def instance_seed(master_seed, index, stream):
    """Seed for lattice (stream 1) or disorder (stream 2) instance ``index``."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(stream, index)).generate_state(1, np.uint64)[0])


@dataclass
class TimeSeries:
    """Ensemble means and standard errors of the observables per sample time."""

    times: np.ndarray
    mean: dict
    stderr: dict
    n_traj: int
    num_spins: int
    raw: np.ndarray | None = field(default=None, repr=False)

    def observable(self, name):
        """Mean of a recorded observable or of a derived one.

        ``z_ec`` is the average of the two decoded parities and ``f`` the
        error fraction.
        """
        if name == "z_ec":
            return 0.5 * (self.mean["z1_ec"] + self.mean["z2_ec"])
        if name == "z":
            return 0.5 * (self.mean["z1"] + self.mean["z2"])
        if name == "f":
            return self.mean["errors"] / self.num_spins
        return self.mean[name]

    def observable_stderr(self, name):
        if self.raw is None:
            raise ValueError("per-trajectory data not kept")
        return _stderr(self._per_traj(name))

    def _per_traj(self, name):
        idx = {n: i for i, n in enumerate(OBSERVABLES)}
        if name == "z_ec":
            return 0.5 * (self.raw[:, :, idx["z1_ec"]] + self.raw[:, :, idx["z2_ec"]])
        if name == "z":
            return 0.5 * (self.raw[:, :, idx["z1"]] + self.raw[:, :, idx["z2"]])
        if name == "f":
            return self.raw[:, :, idx["errors"]] / self.num_spins
        return self.raw[:, :, idx[name]]

    def per_trajectory(self, name):
        if self.raw is None:
            raise ValueError("per-trajectory data not kept")
        return self._per_traj(name)


def _stderr(x):
    n = x.shape[0]
    if n < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / np.sqrt(n)


def aggregate(times, runs, num_spins, keep_raw=True):
    """Pointwise mean/stderr over trajectories (summation order fixed by index)."""
    raw = np.stack(runs)
    mean = {n: raw[:, :, i].mean(axis=0) for i, n in enumerate(OBSERVABLES)}
    err = {n: _stderr(raw[:, :, i]) for i, n in enumerate(OBSERVABLES)}
    return TimeSeries(np.asarray(times), mean, err, len(runs), num_spins, raw if keep_raw else None)


@dataclass(frozen=True)
class DynamicsConfig:
    """Everything needed to run an ensemble of trajectories."""

    lattice: LatticeSpec
    bath: BathSpec = field(default_factory=BathSpec)
    disorder: DisorderSpec = field(default_factory=DisorderSpec)
    interaction: InteractionSpec = field(default_factory=InteractionSpec)
    J: float = 0.0
    k: int = DEFAULT_K
    n_instances: int | None = None  # None: fresh lattice/disorder per trajectory
    force_direct: bool = False


def build_instance(config: DynamicsConfig, master_seed, inst):
    """Code and energy model of instance ``inst`` (seeds derived from master)."""
    spec = config.lattice
    if spec.kind == "random":
        spec = LatticeSpec(spec.L, "random", spec.p_mix, instance_seed(master_seed, inst, 1))
    code = build_code(spec)
    dis = config.disorder
    dis = DisorderSpec(dis.kind, dis.sigma, dis.P, instance_seed(master_seed, inst, 2))
    J = sample_onsite(code, dis, config.J)
    return EnergyModel(code, J, config.interaction)


def _run_chunk(args):
    config, schedule_times, master_seed, indices = args
    n_inst = config.n_instances
    sims = {}
    out = []
    for i in indices:
        inst = i if n_inst is None else i % n_inst
        if inst not in sims:
            if n_inst is None:
                sims.clear()
            sims[inst] = Simulator(build_instance(config, master_seed, inst), config.bath, config.k, config.force_direct)
        out.append(sims[inst].run(schedule_times, trajectory_seed(master_seed, i)))
    return indices, out


def default_workers():
    env = os.environ.get("TORICSIM_WORKERS")
    return int(env) if env else 1


def ensemble_run(config: DynamicsConfig, schedule: Schedule, n_traj, master_seed=0, workers=None, keep_raw=True):
    """Average ``n_traj`` independent trajectories.

    Trajectory ``i`` uses seed ``trajectory_seed(master_seed, i)``, so the
    result does not depend on ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    workers = default_workers() if workers is None else int(workers)
    times = schedule.sample_times
    indices = list(range(n_traj))
    if workers <= 1:
        _, runs = _run_chunk((config, times, master_seed, indices))
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        runs = [None] * n_traj
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, res in pool.map(_run_chunk, [(config, times, master_seed, c) for c in chunks if c]):
                for i, r in zip(idx, res):
                    runs[i] = r
    code = build_instance(config, master_seed, 0).code
    return aggregate(times, runs, code.num_spins, keep_raw)


def run_trajectory(model, bath, schedule, seed, k=DEFAULT_K):
    """Single trajectory as a one-member :class:`TimeSeries`."""
    sim = Simulator(model, bath, k)
    return aggregate(schedule.sample_times, [sim.run(schedule, seed)], model.code.num_spins)
