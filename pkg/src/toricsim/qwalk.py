"""Coherent single-anyon walks on the plaquette lattice.

A single anyon hops between plaquettes that share a spin with amplitude
``h`` and feels the onsite energy ``J_p``:

    M[p, q] = h   if p and q share a spin,    M[p, p] = J_p.

States are propagated exactly through a dense eigendecomposition of M, and
the spreading is measured by the root-mean-square torus distance from the
starting plaquette.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .energy import minimal_image
from .lattice import LatticeSpec, build_code

MAX_DENSE = 4096


class WalkTooLarge(ValueError):
    """Dense propagation requested for a lattice with too many plaquettes."""


class BoundaryWarning(UserWarning):
    """The walker spread far enough to feel the periodic boundary."""


def build_walk_hamiltonian(code, h, J):
    """Dense real symmetric hopping matrix over plaquettes."""
    J = np.broadcast_to(np.asarray(J, dtype=float), (code.num_plaquettes,))
    P = code.num_plaquettes
    M = np.zeros((P, P))
    a, b = code.spin_to_plaquettes[:, 0], code.spin_to_plaquettes[:, 1]
    M[a, b] = h
    M[b, a] = h
    M[np.arange(P), np.arange(P)] = J
    return M


class Propagator:
    """exp(-i M t) applied to basis states, via one eigendecomposition."""

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        if M.shape[0] > MAX_DENSE:
            raise WalkTooLarge(f"{M.shape[0]} plaquettes exceed the dense limit {MAX_DENSE}; use a smaller L")
        if not np.allclose(M, M.T):
            raise ValueError("walk matrix must be symmetric")
        self.M = M
        self.energies, self.vectors = np.linalg.eigh(M)

    def evolve(self, psi0, times):
        """States at each time, shape (len(times), P)."""
        psi0 = np.asarray(psi0, dtype=complex)
        c = self.vectors.T @ psi0
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.energies))
        return (phases * c) @ self.vectors.T

    def evolve_site(self, origin, times):
        c = self.vectors[origin]
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.energies))
        return (phases * c) @ self.vectors.T


def evolve(M, origin, times):
    """psi(t) = exp(-i M t) e_origin for every t in ``times``."""
    return Propagator(M).evolve_site(origin, times)


def displacement(code, origin):
    """Minimal-image displacement vectors from ``origin`` to every plaquette."""
    return minimal_image(code.plaquette_pos - code.plaquette_pos[origin], code.L)


def spread(psi, origin, code, mode="rms"):
    """Spread of a state (or a stack of states) around ``origin``.

    ``mode="rms"`` gives sqrt(sum |psi_p|^2 d_p^2).  ``mode="std"`` gives
    the standard deviation of the distance d_p, i.e. the rms value with the
    squared mean distance subtracted.
    """
    d = np.hypot(*displacement(code, origin).T)
    prob = np.abs(np.asarray(psi)) ** 2
    msd = prob @ d ** 2
    if mode == "rms":
        return np.sqrt(msd)
    if mode == "std":
        mean = prob @ d
        return np.sqrt(np.maximum(msd - mean ** 2, 0.0))
    raise ValueError(f"unknown spread mode {mode!r}")


def central_plaquette(code):
    """Plaquette closest to the centre of the torus (lowest index on ties)."""
    c = np.array([code.L / 2.0, code.L / 2.0])
    d = np.hypot(*minimal_image(code.plaquette_pos - c, code.L).T)
    return int(np.argmin(d))


def fit_exponent(times, delta):
    """OLS slope of log(delta) against log(t) and its standard error."""
    x = np.log(np.asarray(times, dtype=float))
    y = np.log(np.asarray(delta, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = len(x)
    if n > 2:
        resid = y - A @ coef
        s2 = resid @ resid / (n - 2)
        se = np.sqrt(s2 / ((x - x.mean()) @ (x - x.mean())))
    else:
        se = 0.0
    return float(coef[0]), float(se)


def fit_window(times, delta, L, decades=1.0):
    """Mask of the last ``decades`` of times before delta first reaches L/4.

    Times after the first contact with L/4 are excluded even if the spread
    later dips below it again (wrap-around revivals).
    """
    times = np.asarray(times, dtype=float)
    hit = np.nonzero(np.asarray(delta) >= L / 4.0)[0]
    ok = times > 0
    if len(hit):
        ok &= np.arange(len(times)) < hit[0]
    if not ok.any():
        return ok
    t_hi = times[ok].max()
    return ok & (times >= t_hi / 10 ** decades)


@dataclass(frozen=True)
class WalkSpec:
    lattice: LatticeSpec
    h: float = 1.0
    J: float = 0.0
    sigma: float = 0.0
    times: tuple = ()
    samples: int = 1
    seed: int = 0
    mode: str = "rms"

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.mode not in ("rms", "std"):
            raise ValueError(f"unknown spread mode {self.mode!r}")

    @property
    def sigma_over_h(self):
        return self.sigma / self.h


@dataclass
class SpreadSeries:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    exponent: float
    exponent_ci: tuple
    window: np.ndarray
    boundary: np.ndarray
    per_sample: np.ndarray = field(repr=False, default=None)


def walk_seeds(seed, index):
    """(lattice seed, disorder seed) of realization ``index``."""
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    a, b = ss.generate_state(2, np.uint64)
    return int(a), int(b)


def run_walk_ensemble(spec: WalkSpec, n_boot=200):
    """Average the spread over lattice and onsite-disorder realizations.

    Each realization draws its own random lattice (if any) and Ising
    energies J +- sigma; the walker starts on the central plaquette.  The
    exponent is the log-log slope over the last decade of times with mean
    spread below L/4, with a bootstrap interval over realizations (or the
    OLS standard error for a single realization).
    """
    times = np.asarray(spec.times, dtype=float)
    L = spec.lattice.L
    rows = []
    for i in range(spec.samples):
        lseed, dseed = walk_seeds(spec.seed, i)
        lat = spec.lattice
        if lat.kind == "random":
            lat = LatticeSpec(L, "random", lat.p_mix, lseed)
        code = build_code(lat)
        J = np.full(code.num_plaquettes, spec.J)
        if spec.sigma > 0:
            rng = np.random.default_rng(dseed)
            J = J + np.where(rng.random(code.num_plaquettes) < 0.5, -spec.sigma, spec.sigma)
        origin = central_plaquette(code)
        psi = evolve(build_walk_hamiltonian(code, spec.h, J), origin, times)
        rows.append(spread(psi, origin, code, spec.mode))
    per = np.array(rows)
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / np.sqrt(len(per)) if len(per) > 1 else np.zeros_like(mean)
    boundary = mean >= L / 4.0
    if boundary.any():
        warnings.warn(f"spread reached L/4 at t = {times[boundary][0]:.3g}; later times are contaminated", BoundaryWarning)
    window = fit_window(times, mean, L)
    if window.sum() < 3:
        raise ValueError("fewer than three sample times in the fit window")
    slope, slope_se = fit_exponent(times[window], mean[window])
    if len(per) > 1:
        rng = np.random.default_rng(spec.seed)
        boots = [fit_exponent(times[window], per[rng.integers(0, len(per), len(per))][:, window].mean(axis=0))[0]
                 for _ in range(n_boot)]
        ci = tuple(float(q) for q in np.quantile(boots, [0.025, 0.975]))
    else:
        ci = (slope - 1.96 * slope_se, slope + 1.96 * slope_se)
    return SpreadSeries(times, mean, se, slope, ci, window, boundary, per)
