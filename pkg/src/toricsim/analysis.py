"""Thresholds, lifetimes, bootstrap statistics and the CSS capacity bound."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .decoder import DEFAULT_K, decode_kernel, syndrome_kernel
from .energy import InvalidParameter
from .lattice import LatticeSpec, build_code, dual

LIFETIME_LEVEL = 0.9
DEFAULT_BOOTSTRAP = 1000


class NoCrossing(ValueError):
    """Curves do not intersect inside the sampled range."""


# ----------------------------------------------------------------------------
# statistics

def bootstrap_ci(samples, n_boot=DEFAULT_BOOTSTRAP, level=0.95, seed=0, statistic=np.mean):
    """Percentile bootstrap interval of ``statistic`` over the first axis."""
    x = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(x), size=(n_boot, len(x)))
    stats = np.array([statistic(x[i], axis=0) for i in idx])
    lo, hi = np.quantile(stats, [(1 - level) / 2, (1 + level) / 2], axis=0)
    return lo, hi


def standard_error(samples):
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        return 0.0
    return float(x.std(ddof=1) / np.sqrt(len(x)))


# ----------------------------------------------------------------------------
# static (independent-error) decoding curves

@njit(cache=True)
def _static_kernel(seed, f, n_draws, num_spins, plaq_ptr, plaq_spins, adj_ptr, adj_nbr, adj_via, k, z1, z2):
    np.random.seed(seed)
    out = np.empty((n_draws, 2), np.int8)
    err = np.zeros(num_spins, np.uint8)
    failures = 0
    for d in range(n_draws):
        for q in range(num_spins):
            err[q] = 1 if np.random.random() < f else 0
        occ = syndrome_kernel(plaq_ptr, plaq_spins, err)
        n = 0
        for p in range(occ.shape[0]):
            n += occ[p]
        anyons = np.empty(n, np.int64)
        m = 0
        for p in range(occ.shape[0]):
            if occ[p]:
                anyons[m] = p
                m += 1
        corr, ok, _ = decode_kernel(adj_ptr, adj_nbr, adj_via, anyons, k, num_spins)
        if not ok:
            failures += 1
        s1 = 0
        for q in z1:
            s1 ^= err[q] ^ corr[q]
        s2 = 0
        for q in z2:
            s2 ^= err[q] ^ corr[q]
        out[d, 0] = 1 - 2 * s1
        out[d, 1] = 1 - 2 * s2
    return out, failures


def decode_iid(code, f, n_draws, seed, k=DEFAULT_K):
    """Decoded (z1, z2) parities for ``n_draws`` iid error draws at rate ``f``."""
    if not 0.0 <= f < 0.5:
        raise InvalidParameter(f"error probability must lie in [0, 0.5), got {f}")
    adj = code.plaquette_adjacency()
    out, failures = _static_kernel(
        np.uint32(seed), float(f), int(n_draws), code.num_spins, code.plaquette_ptr, code.plaquette_spins,
        *adj, int(k), np.asarray(code.logicals["Z1"], np.int64), np.asarray(code.logicals["Z2"], np.int64))
    if failures:
        raise RuntimeError("decoder found no perfect matching")
    return out


def task_seed(master_seed, *key):
    return int(np.random.SeedSequence(master_seed, spawn_key=tuple(int(x) for x in key)).generate_state(1)[0])


@dataclass
class LogicalCurve:
    """Decoded logical parity against error probability for one lattice size.

    ``samples[i]`` holds per-instance mean parities at ``grid[i]``, shape
    (n_instances, 2) for the two logical operators.
    """

    grid: np.ndarray
    samples: list
    L: int
    p_mix: float | None = None
    sector: str = "Z"

    def mean(self, operator="avg"):
        return np.array([_select(s, operator).mean() for s in self.samples])

    def stderr(self, operator="avg"):
        return np.array([standard_error(_select(s, operator)) for s in self.samples])

    def ci(self, operator="avg", n_boot=DEFAULT_BOOTSTRAP, seed=0):
        lo, hi = zip(*(bootstrap_ci(_select(s, operator), n_boot, seed=seed) for s in self.samples))
        return np.array(lo), np.array(hi)

    def n_samples(self):
        return np.array([len(s) for s in self.samples])


def _select(s, operator):
    s = np.asarray(s, dtype=float)
    if operator == "avg":
        return s.mean(axis=1)
    if operator in ("Z1", "X1"):
        return s[:, 0]
    if operator in ("Z2", "X2"):
        return s[:, 1]
    raise ValueError(f"unknown operator {operator!r}")


def _static_instance(args):
    code, f_grid, n_errors, seed, L, i, k = args
    row = np.empty((len(f_grid), 2))
    for fi, f in enumerate(f_grid):
        if f == 0.0:
            row[fi] = 1.0
        else:
            row[fi] = decode_iid(code, f, n_errors, task_seed(seed, 2, L, i, fi), k).mean(axis=0)
    return row


def static_curve(spec: LatticeSpec, f_grid, n_instances, n_errors, seed=0, k=DEFAULT_K, sector="Z", workers=1):
    """Mean decoded parity over lattice instances and iid error draws.

    For random lattices instance ``i`` uses lattice seed
    ``task_seed(seed, 1, L, i)``.  ``sector="X"`` decodes the dual code,
    i.e. star syndromes and the X logicals.  Error draws are keyed by
    (L, instance, grid index), so ``workers`` does not change the result.
    """
    f_grid = np.asarray(f_grid, dtype=float)
    if sector not in ("Z", "X"):
        raise ValueError(f"sector must be 'Z' or 'X', got {sector!r}")
    codes = []
    for i in range(n_instances):
        if spec.kind == "random":
            code = build_code(LatticeSpec(spec.L, "random", spec.p_mix, task_seed(seed, 1, spec.L, i)))
            codes.append(dual(code) if sector == "X" else code)
        elif not codes:
            code = build_code(spec)
            codes.append(dual(code) if sector == "X" else code)
        else:
            codes.append(codes[0])
    tasks = [(code, f_grid, n_errors, seed, spec.L, i, k) for i, code in enumerate(codes)]
    if workers > 1 and n_instances > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_static_instance, tasks))
    else:
        rows = [_static_instance(t) for t in tasks]
    per = np.stack(rows, axis=1)  # (n_grid, n_instances, 2)
    samples = [per[fi] for fi in range(len(f_grid))]
    p_mix = spec.p_mix if spec.kind == "random" else None
    return LogicalCurve(f_grid, samples, spec.L, p_mix, sector)


# ----------------------------------------------------------------------------
# crossings

CROSSING_FLOOR = 0.2


def _pair_crossing(x, y_small, y_large, floor=CROSSING_FLOOR):
    """Intersection of two piecewise-linear decay curves on a shared grid.

    Only crossings where the larger system goes from above to below the
    smaller one count, and only on intervals where both curves stay above
    ``floor`` (below it the parities have decayed and differences are
    noise).  If several remain, the interval where the curves are steepest
    wins.
    """
    x = np.asarray(x, dtype=float)
    y_small = np.asarray(y_small, dtype=float)
    y_large = np.asarray(y_large, dtype=float)
    d = y_small - y_large
    best = None
    for i in range(len(x) - 1):
        if not (d[i] <= 0.0 < d[i + 1]):
            continue
        if min(y_small[i], y_small[i + 1], y_large[i], y_large[i + 1]) < floor:
            continue
        slope = abs(y_small[i + 1] - y_small[i]) + abs(y_large[i + 1] - y_large[i])
        slope /= x[i + 1] - x[i]
        if best is None or slope > best[0]:
            s = d[i] / (d[i] - d[i + 1])
            best = (slope, x[i] + s * (x[i + 1] - x[i]))
    return None if best is None else best[1]


@dataclass
class ThresholdEstimate:
    f_cr: float
    ci: tuple
    sizes: tuple
    pairwise: dict = field(default_factory=dict)
    method: str = "pairwise linear interpolation, mean over adjacent size pairs"
    boot_success: float = 1.0  # fraction of bootstrap resamples that crossed

    @property
    def half_width(self):
        return 0.5 * (self.ci[1] - self.ci[0])


def crossing_point(x, curves_by_size):
    """Mean of adjacent-pair crossings of ``{L: y}`` on the grid ``x``."""
    sizes = sorted(curves_by_size)
    points = {}
    for a, b in zip(sizes[:-1], sizes[1:]):
        c = _pair_crossing(x, curves_by_size[a], curves_by_size[b])
        if c is None:
            raise NoCrossing(f"curves for L={a} and L={b} do not cross in [{x[0]}, {x[-1]}]")
        points[(a, b)] = c
    return float(np.mean(list(points.values()))), points


def find_crossing(curves, operator="avg", n_boot=DEFAULT_BOOTSTRAP, seed=0, level=0.95):
    """Threshold from the intersections of curves for different sizes.

    ``operator="pooled"`` averages the crossings of the two logical
    operators.  The interval is a percentile bootstrap over lattice
    instances (resampled independently per size and grid point).
    """
    curves = sorted(curves, key=lambda c: c.L)
    if len(curves) < 2:
        raise ValueError("need at least two sizes")
    grid = curves[0].grid
    for c in curves[1:]:
        if not np.allclose(c.grid, grid):
            raise ValueError("curves must share a grid")
    ops = ("Z1", "Z2") if operator == "pooled" else (operator,)

    def estimate(resampled):
        vals, pairs = [], {}
        for op in ops:
            v, p = crossing_point(grid, {c.L: np.array([_select(s, op).mean() for s in resampled[c.L]]) for c in curves})
            vals.append(v)
            pairs[op] = p
        return float(np.mean(vals)), pairs

    base = {c.L: c.samples for c in curves}
    f_cr, pairs = estimate(base)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        res = {L: [s[rng.integers(0, len(s), len(s))] for s in smp] for L, smp in base.items()}
        try:
            boots.append(estimate(res)[0])
        except NoCrossing:
            continue
    if len(boots) < 0.5 * n_boot:
        raise NoCrossing(f"crossing lost in {n_boot - len(boots)} of {n_boot} bootstrap resamples")
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    est = ThresholdEstimate(f_cr, (float(lo), float(hi)), tuple(c.L for c in curves), pairs)
    est.boot_success = len(boots) / n_boot
    return est


def agree_within_ci(a: ThresholdEstimate, b: ThresholdEstimate):
    """True if the two confidence intervals overlap."""
    return a.ci[0] <= b.ci[1] and b.ci[0] <= a.ci[1]


def threshold_vs_pmix(p_mix_grid, sizes, f_grid, n_instances, n_errors, seed=0, n_boot=DEFAULT_BOOTSTRAP):
    """Rows of (p_mix, f_cr^Z, f_cr^X).

    f_cr^X is measured directly on the dual codes; by duality it should equal
    f_cr^Z at ``1 - p_mix``.
    """
    rows = []
    for p in p_mix_grid:
        est = {}
        for sector in ("Z", "X"):
            curves = [static_curve(LatticeSpec(L, "random", p), f_grid, n_instances, n_errors, seed, sector=sector)
                      for L in sizes]
            est[sector] = find_crossing(curves, "pooled", n_boot, seed)
        rows.append((p, est["Z"], est["X"]))
    return rows


# ----------------------------------------------------------------------------
# lifetimes

@dataclass
class LifetimeResult:
    tau: float
    censored: bool
    level: float = LIFETIME_LEVEL
    bracket: tuple = ()

    def __float__(self):
        return self.tau


def lifetime(times, values, level=LIFETIME_LEVEL):
    """First downward crossing of ``level``, linearly interpolated.

    If the series never drops below ``level`` the result is censored at the
    last sample time, which is then a lower bound.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(y) == 0 or y[0] < level:
        raise ValueError("series must start at or above the level")
    below = np.nonzero(y < level)[0]
    if len(below) == 0:
        return LifetimeResult(float(t[-1]), True, level)
    i = below[0]
    t0, t1, y0, y1 = t[i - 1], t[i], y[i - 1], y[i]
    tau = t0 + (y0 - level) / (y0 - y1) * (t1 - t0)
    return LifetimeResult(float(tau), False, level, (float(t0), float(t1)))


def lifetime_ci(series, observable="z_ec", level=LIFETIME_LEVEL, n_boot=200, seed=0, ci_level=0.68):
    """Lifetime with a bootstrap interval over trajectories."""
    per = series.per_trajectory(observable)
    tau = lifetime(series.times, per.mean(axis=0), level)
    rng = np.random.default_rng(seed)
    boots = [lifetime(series.times, per[rng.integers(0, len(per), len(per))].mean(axis=0), level).tau
             for _ in range(n_boot)]
    lo, hi = np.quantile(boots, [(1 - ci_level) / 2, (1 + ci_level) / 2])
    return tau, (float(lo), float(hi))


# ----------------------------------------------------------------------------
# CSS capacity bound

def shannon_entropy(x):
    """Binary entropy in bits, with H(0) = H(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise InvalidParameter(f"probability must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def css_bound(p_x, p_z):
    """1 - H(p_x) - H(p_z): largest achievable rate of a CSS code."""
    for name, p in (("p_x", p_x), ("p_z", p_z)):
        if not 0.0 <= p <= 0.5:
            raise InvalidParameter(f"{name} must lie in [0, 0.5], got {p}")
    return 1.0 - shannon_entropy(p_x) - shannon_entropy(p_z)


def bound_contour(p_x, tol=1e-8):
    """p_z in (0, 0.5) with css_bound(p_x, p_z) = 0, by bisection."""
    if not 0.0 < p_x < 0.5:
        raise InvalidParameter(f"p_x must lie in (0, 0.5), got {p_x}")
    target = 1.0 - shannon_entropy(p_x)
    if target <= 0.0:
        raise InvalidParameter(f"H(p_x) >= 1 at p_x = {p_x}: no contour point")
    lo, hi = 0.0, 0.5
    # H is increasing on [0, 0.5]; keep H(lo) < target <= H(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shannon_entropy(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def symmetric_zero(tol=1e-12):
    """The p with 2 H(p) = 1."""
    return brentq(lambda p: 1.0 - 2.0 * shannon_entropy(p), 1e-6, 0.5 - 1e-9, xtol=tol)


# ----------------------------------------------------------------------------
# thresholds from thermal dynamics

@dataclass
class DynamicThreshold:
    f_cr: float
    ci: tuple
    tau: float
    tau_ci: tuple
    sizes: tuple


def threshold_from_dynamics(series_by_size, observable="z_ec", n_boot=DEFAULT_BOOTSTRAP, seed=0, level=0.95):
    """f_cr = f(tau) with tau the crossing time of the decoded-parity curves.

    ``series_by_size`` maps L to a :class:`~toricsim.kmc.TimeSeries` on a
    shared time grid.  The error fraction f(t) is pooled over sizes (it does
    not depend on L for non-interacting anyons).  Bootstrap resamples
    trajectories per size.
    """
    sizes = sorted(series_by_size)
    t = series_by_size[sizes[0]].times
    per_z = {L: series_by_size[L].per_trajectory(observable) for L in sizes}
    per_f = {L: series_by_size[L].per_trajectory("f") for L in sizes}

    positive = t > 0
    logt = np.log(t[positive])

    def estimate(zs, fs):
        log_tau, _ = crossing_point(logt, {L: zs[L].mean(axis=0)[positive] for L in sizes})
        tau = float(np.exp(log_tau))
        f_curve = np.mean([fs[L].mean(axis=0) for L in sizes], axis=0)
        return float(np.interp(tau, t, f_curve)), tau

    f_cr, tau = estimate(per_z, per_f)
    rng = np.random.default_rng(seed)
    bf, bt = [], []
    for _ in range(n_boot):
        zs, fs = {}, {}
        for L in sizes:
            idx = rng.integers(0, len(per_z[L]), len(per_z[L]))
            zs[L], fs[L] = per_z[L][idx], per_f[L][idx]
        try:
            a, b = estimate(zs, fs)
        except NoCrossing:
            continue
        bf.append(a)
        bt.append(b)
    if len(bf) < 0.5 * n_boot:
        raise NoCrossing(f"crossing lost in {n_boot - len(bf)} of {n_boot} bootstrap resamples")
    q = [(1 - level) / 2, (1 + level) / 2]
    return DynamicThreshold(f_cr, tuple(np.quantile(bf, q)), tau, tuple(np.quantile(bt, q)), tuple(sizes))
