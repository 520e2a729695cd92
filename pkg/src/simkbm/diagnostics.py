"""Computable analogues of the macroscopic-limit estimates.

Covers the Wasserstein deviation of the trait profile from the local
Gaussian, the residuals the moment fields leave in the macroscopic system,
space-time Hoelder quotients, and power-law fits of error-versus-gamma data.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .environment import Environment
from .grids import TorusGrid
from .measures import GridMeasure, gaussian_on_grid, wasserstein
from .sim_solver import KineticState, SimulationError, kinetic_moments

HOLDER_PAIR_CAP = 1_000_000


@dataclasses.dataclass(frozen=True)
class DeviationRecord:
    """Per-snapshot health row: profile deviation, fourth-moment peak, mass leak."""

    t: float
    gauss_dev: float
    v_max: float
    mass_leak: float

    def __post_init__(self):
        for name in ("t", "gauss_dev", "v_max", "mass_leak"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if min(self.gauss_dev, self.v_max, self.mass_leak) < 0:
            raise ValueError("deviation fields must be nonnegative")


@dataclasses.dataclass
class SweepReport:
    """Aggregated gamma-sweep errors with fitted decay exponents per family."""

    gammas: list
    errors: dict
    theta_hat: dict
    c_hat: dict
    r2: dict

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        if len(g) >= 2 and not np.all(np.diff(g) > 0):
            raise ValueError("gammas must be strictly increasing")
        for family, vals in self.errors.items():
            if np.any(np.asarray(vals) < 0):
                raise ValueError(f"negative error in family {family!r}")


def gaussian_deviation(state: KineticState, A: float) -> float:
    """max over x of W2(profile(x, .), Gaussian of variance A centered at Z(x)).

    For exactly Gaussian columns this sits at the discretization floor
    (below 2 trait spacings); for a kinetic run it tracks how far the
    profile is from local equilibrium.
    """
    moms = kinetic_moments(state)
    trait = state.trait
    worst = 0.0
    for i in range(state.space.points_per_dim):
        profile = GridMeasure(trait, state.n[i] / moms.N[i])
        target = gaussian_on_grid(moms.Z[i], A, trait)
        worst = max(worst, wasserstein(profile, target, 2))
    return worst


@dataclasses.dataclass
class ResidualFields:
    """phi_N, phi_Z sampled at the interior snapshot times of a trajectory."""

    times: np.ndarray
    phi_N: np.ndarray
    phi_Z: np.ndarray
    cadence: float


def kbm_residuals(
    times: np.ndarray,
    N: np.ndarray,
    Z: np.ndarray,
    space: TorusGrid,
    env: Environment,
    A: float,
) -> ResidualFields:
    """Forcings phi_N, phi_Z the sampled moment fields leave in the macroscopic system.

    Rearranges the system: phi_N = (dN/dt - lap N)/N - 1 + (Z - y_opt)^2/2 + N
    and phi_Z = dZ/dt - lap Z - 2 grad N . grad Z / N + A (Z - y_opt), with
    centered differences in time (snapshot cadence) and space.  The report
    carries the cadence so consumers can attribute the O(cadence^2 + h^2)
    differencing error.
    """
    times = np.asarray(times, dtype=float)
    N = np.asarray(N, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least 3 snapshots for centered time differences")
    steps = np.diff(times)
    cadence = steps[0]
    if np.any(np.abs(steps - cadence) > 1e-9 * max(1.0, cadence)):
        raise ValueError("snapshot times must be uniformly spaced")
    if N.min() <= 0:
        raise SimulationError("population size must stay positive", {"min_N": float(N.min())})

    h = space.spacing
    x = space.centers

    def lap(f):
        return (np.roll(f, 1, axis=1) + np.roll(f, -1, axis=1) - 2.0 * f) / h**2

    def grad(f):
        return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * h)

    mid = slice(1, -1)
    dNdt = (N[2:] - N[:-2]) / (2.0 * cadence)
    dZdt = (Z[2:] - Z[:-2]) / (2.0 * cadence)
    Nm, Zm = N[mid], Z[mid]
    y_opt = np.stack([env.evaluate(t, x) for t in times[mid]])

    phi_N = (dNdt - lap(Nm)) / Nm - 1.0 + 0.5 * (Zm - y_opt) ** 2 + Nm
    phi_Z = dZdt - lap(Zm) - 2.0 * grad(Nm) * grad(Zm) / Nm + A * (Zm - y_opt)
    return ResidualFields(times=times[mid], phi_N=phi_N, phi_Z=phi_Z, cadence=cadence)


def holder_quotient(
    times: np.ndarray,
    space: TorusGrid,
    field: np.ndarray,
    theta: float,
    n_pairs: int = HOLDER_PAIR_CAP,
    seed: int = 0,
) -> float:
    """max over sampled point pairs of |f(t,x) - f(s,y)| / (|t-s| + d(x,y))^theta.

    Exhaustive pairing is quadratic in the lattice size, so a seeded uniform
    sample of pairs makes the statistic cheap and reproducible; enlarging the
    sample can only increase the value.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    times = np.asarray(times, dtype=float)
    field = np.asarray(field, dtype=float)
    nt, nx = field.shape
    if times.shape != (nt,):
        raise ValueError("times length does not match the field")
    x = space.centers
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, [nt, nx, nt, nx], size=(n_pairs, 4))
    it1, ix1, it2, ix2 = draws.T
    dt = np.abs(times[it1] - times[it2])
    dx = space.distance(x[ix1], x[ix2])
    denom = (dt + dx) ** theta
    diff = np.abs(field[it1, ix1] - field[it2, ix2])
    valid = denom > 0
    if not valid.any():
        return 0.0
    return float((diff[valid] / denom[valid]).max())


@dataclasses.dataclass(frozen=True)
class PowerLawFit:
    theta_hat: float
    c_hat: float
    r2: float


def fit_power_law(gammas, errors) -> PowerLawFit:
    """Least squares of log error = log c - theta log gamma."""
    g = np.asarray(gammas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(g) < 3:
        raise ValueError("need at least 3 (gamma, error) pairs")
    if np.any(g <= 0) or np.any(e <= 0):
        raise ValueError("gammas and errors must be positive")
    lg, le = np.log(g), np.log(e)
    slope, intercept = np.polyfit(lg, le, 1)
    pred = slope * lg + intercept
    ss_res = float(((le - pred) ** 2).sum())
    ss_tot = float(((le - le.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(theta_hat=float(-slope), c_hat=float(np.exp(intercept)), r2=r2)


def burn_in_time(gamma: float, dt: float) -> float:
    """Window start for deviation suprema: the bounds only begin after a
    transient, so report max(5 dt, gamma^(-1/2))."""
    return max(5.0 * dt, gamma**-0.5)
