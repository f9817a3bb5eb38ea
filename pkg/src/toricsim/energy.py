"""Onsite disorder, anyon interactions and bath rate functions.

The plaquette-sector energy of an occupation vector ``n`` is

    E(n) = sum_p J_p n_p + 1/2 sum_{p != q} U_pq n_p n_q,   U_pq = A / r_pq**alpha

with ``r_pq`` the minimal-image distance between plaquette positions.  A spin
flip toggles the two plaquettes containing the spin, and the transition
frequency used by the bath is ``omega = E(before) - E(after)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class InvalidParameter(ValueError):
    """A physical parameter lies outside its allowed range."""


@dataclass(frozen=True)
class BathSpec:
    """Either a constant rate ``gamma0`` or an Ohmic bath at temperature ``T``."""

    model: str = "ohmic"
    T: float = 1.0
    kappa1: float = 1.0
    gamma0: float = 1.0

    def __post_init__(self):
        if self.model not in ("constant_rate", "ohmic"):
            raise InvalidParameter(f"unknown bath model {self.model!r}")
        if self.model == "ohmic" and not (self.T > 0 and self.kappa1 > 0):
            raise InvalidParameter(f"ohmic bath needs T > 0 and kappa1 > 0, got T={self.T}, kappa1={self.kappa1}")
        if self.model == "constant_rate" and not self.gamma0 > 0:
            raise InvalidParameter(f"gamma0 must be positive, got {self.gamma0}")

    @property
    def beta(self):
        return 1.0 / self.T

    def kernel_args(self):
        """(is_ohmic, beta, kappa1, gamma0) for the compiled rate function."""
        return (self.model == "ohmic", 1.0 / self.T, float(self.kappa1), float(self.gamma0))


@dataclass(frozen=True)
class DisorderSpec:
    kind: str = "none"
    sigma: float = 0.0
    P: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "ising", "gaussian"):
            raise InvalidParameter(f"unknown disorder kind {self.kind!r}")
        if self.sigma < 0:
            raise InvalidParameter(f"sigma must be >= 0, got {self.sigma}")
        if not -1.0 <= self.P <= 1.0:
            raise InvalidParameter(f"P must lie in [-1, 1], got {self.P}")

    @property
    def eta(self):
        """Probability that an Ising site gets the negative value."""
        return (1.0 - self.P) / 2.0


@dataclass(frozen=True)
class InteractionSpec:
    A: float = 0.0
    alpha: float = 0.0
    N_max: int | None = None

    def __post_init__(self):
        if self.A < 0:
            raise InvalidParameter(f"A must be >= 0, got {self.A}")
        if not 0.0 <= self.alpha < 2.0:
            raise InvalidParameter(f"alpha must lie in [0, 2), got {self.alpha}")
        if self.N_max is not None and self.N_max < 0:
            raise InvalidParameter(f"N_max must be >= 0, got {self.N_max}")


def sample_onsite(code, disorder, J=0.0):
    """Onsite energies ``J + delta_p`` with ``delta_p`` drawn per plaquette.

    Draws come from ``default_rng(disorder.seed)`` in plaquette order.
    """
    P = code.num_plaquettes
    if disorder.kind == "none":
        return np.full(P, float(J))
    rng = np.random.default_rng(disorder.seed)
    if disorder.kind == "ising":
        negative = rng.random(P) < disorder.eta
        return J + np.where(negative, -disorder.sigma, disorder.sigma)
    return J + disorder.sigma * rng.standard_normal(P)


def minimal_image(delta, L):
    """Wrap coordinate differences into [-L/2, L/2]."""
    return delta - L * np.round(np.asarray(delta, dtype=float) / L)


def torus_distance(p, q, code):
    """Euclidean minimal-image distance between two plaquette positions."""
    d = minimal_image(code.plaquette_pos[q] - code.plaquette_pos[p], code.L)
    return float(np.hypot(d[..., 0], d[..., 1]))


def distance_table(code):
    """All pairwise plaquette distances (count(plaquettes)^2 table)."""
    pos = code.plaquette_pos
    d = minimal_image(pos[None, :, :] - pos[:, None, :], code.L)
    return np.hypot(d[..., 0], d[..., 1])


@dataclass(eq=False)
class EnergyModel:
    """Onsite potentials plus pairwise interaction for one code."""

    code: object
    J: np.ndarray
    interaction: InteractionSpec = field(default_factory=InteractionSpec)
    _U: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        if self.J.shape != (self.code.num_plaquettes,):
            raise InvalidParameter(f"need one onsite energy per plaquette ({self.code.num_plaquettes}), got {self.J.shape}")

    @classmethod
    def uniform(cls, code, J, interaction=None):
        return cls(code, np.full(code.num_plaquettes, float(J)), interaction or InteractionSpec())

    @property
    def A(self):
        return self.interaction.A

    @property
    def alpha(self):
        return self.interaction.alpha

    @property
    def constant_interaction(self):
        return self.interaction.alpha == 0.0 or self.interaction.A == 0.0

    def pair_matrix(self):
        """U_pq with zero diagonal (cached)."""
        if self._U is None:
            if self.alpha == 0.0:
                U = np.full((self.code.num_plaquettes,) * 2, self.A)
            else:
                r = distance_table(self.code)
                np.fill_diagonal(r, 1.0)
                U = self.A / r ** self.alpha
            np.fill_diagonal(U, 0.0)
            self._U = U
        return self._U

    def energy(self, occupation):
        """Direct double-sum evaluation of the energy."""
        n = np.asarray(occupation, dtype=float)
        return float(self.J @ n + 0.5 * n @ self.pair_matrix() @ n)

    def flip_delta(self, occupation, spin):
        """``omega = E(current) - E(after flipping spin)``.

        For constant interaction the change depends only on the total anyon
        count and the two local sites; otherwise it sums over occupied sites.
        """
        occ = np.asarray(occupation)
        a, b = self.code.spin_to_plaquettes[spin]
        na, nb = int(occ[a]), int(occ[b])
        sa, sb = 1 - 2 * na, 1 - 2 * nb
        dE = sa * self.J[a] + sb * self.J[b]
        if self.A != 0.0:
            if self.alpha == 0.0:
                N = int(occ.sum())
                Va = self.A * (N - na)
                Vb = self.A * (N - nb)
                dE += sa * Va + sb * Vb + sa * sb * self.A
            else:
                U = self.pair_matrix()
                occupied = np.nonzero(occ)[0]
                Va = U[a, occupied].sum()
                Vb = U[b, occupied].sum()
                dE += sa * Va + sb * Vb + sa * sb * U[a, b]
        return -float(dE)


@njit(cache=True)
def rate_kernel(omega, is_ohmic, beta, kappa1, gamma0):
    """Bath rate for a transition releasing energy ``omega``."""
    if not is_ohmic:
        return gamma0
    x = beta * omega
    if x == 0.0:
        return 2.0 * kappa1 / beta
    if x < -700.0:
        return 0.0
    return 2.0 * kappa1 * abs(omega / (-math.expm1(-x)))


def rate(omega, bath):
    """Transition rate for energy release ``omega`` (scalar or array)."""
    args = bath.kernel_args()
    w = np.asarray(omega, dtype=float)
    out = np.array([rate_kernel(x, *args) for x in w.ravel()]).reshape(w.shape)
    return out if w.ndim else float(out)
