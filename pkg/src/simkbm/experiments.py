"""Experiment drivers shared by the CLI and the test suite.

Everything here is compute-only and deterministic; file writing lives in
the CLI layer.  Sweep members are independent, so they may run in parallel
processes and are aggregated keyed by gamma.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .diagnostics import (
    burn_in_time,
    DeviationRecord,
    fit_power_law,
    gaussian_deviation,
    holder_quotient,
    kbm_residuals,
    SweepReport,
)
from .kbm_solver import MacroState, run_kbm
from .sim_solver import init_state, run_sim

SWEEP_FAMILIES = ("gauss_dev_sup", "macro_err_N", "macro_err_Z", "resid_N", "resid_Z")


@dataclasses.dataclass
class CompareResult:
    """Matched kinetic-vs-macroscopic run at one gamma."""

    gamma: float
    times: np.ndarray
    err_N: np.ndarray
    err_Z: np.ndarray
    gauss_dev: np.ndarray
    v_max: np.ndarray
    mass_leak: np.ndarray
    records: list
    t_burn: float
    sups: dict
    holder: dict
    sim_trajectory: object = None
    kbm_trajectory: object = None

    def series_columns(self):
        return (
            ["t", "err_N", "err_Z", "gauss_dev", "v_max", "mass_leak"],
            [self.times, self.err_N, self.err_Z, self.gauss_dev, self.v_max, self.mass_leak],
        )


def _windowed_sup(times, series, t_start):
    mask = times >= t_start - 1e-12
    return float(np.max(series[mask])) if mask.any() else float(np.max(series))


def run_compare(config: RunConfig, gamma: float | None = None, keep_states: bool = False) -> CompareResult:
    """Run the kinetic and macroscopic models from matched initial data.

    The population size and mean-trait profiles are shared; the kinetic run
    additionally starts from Gaussian columns of variance V0.  Errors are
    sampled at the common snapshot cadence.
    """
    if gamma is None:
        if config.gamma is None:
            raise ConfigError("compare needs a single gamma")
        gamma = config.gamma
    params = config.sim_params(gamma)
    env = config.environment()
    space = config.space_grid()
    x = space.centers

    state0 = init_state(config)
    sim = run_sim(state0, params, env, config.t_end)

    n0 = config.n0_values(x)
    z0 = config.z0_values(x)
    macro0 = MacroState(0.0, n0, n0 * z0, space)
    kbm = run_kbm(macro0, env, config.A, config.dt, config.t_end, config.snapshot_dt)

    if len(sim.times) != len(kbm.times) or np.max(np.abs(sim.times - kbm.times)) > 1e-9:
        raise RuntimeError("kinetic and macroscopic snapshot grids disagree")

    err_N = np.abs(sim.N - kbm.N).max(axis=1)
    err_Z = np.abs(sim.Z - kbm.Z).max(axis=1)
    want = set(config.diagnostics)
    if "gauss_dev" in want:
        gauss = np.array([gaussian_deviation(s, config.A) for s in sim.snapshots])
    else:
        gauss = np.zeros_like(sim.times)
    v_max = sim.V.max(axis=1)
    leak = sim.leak_rate
    records = [
        DeviationRecord(t=float(t), gauss_dev=float(g), v_max=float(v), mass_leak=float(l))
        for t, g, v, l in zip(sim.times, gauss, v_max, leak)
    ]

    t_burn = burn_in_time(gamma, config.dt)
    resid = kbm_residuals(sim.times, sim.N, sim.Z, space, env, config.A)
    burn_mask = resid.times >= t_burn - 1e-12
    if not burn_mask.any():
        # Horizon shorter than the burn-in: report the full interior window.
        burn_mask = np.ones_like(burn_mask)
    resid_N = float(np.abs(resid.phi_N[burn_mask]).max())
    resid_Z = float(np.abs(resid.phi_Z[burn_mask]).max())

    sups = {
        "err_N": _windowed_sup(sim.times, err_N, t_burn),
        "err_Z": _windowed_sup(sim.times, err_Z, t_burn),
        "gauss_dev": _windowed_sup(sim.times, gauss, t_burn),
        "err_N_full": float(err_N.max()),
        "err_Z_full": float(err_Z.max()),
        "gauss_dev_full": float(gauss.max()),
        "v_max": float(v_max.max()),
        "resid_N": resid_N,
        "resid_Z": resid_Z,
        "mass_leak_rate": sim.diagnostics.max_boundary_leak_rate,
        "diffusion_mass_error": sim.diagnostics.max_diffusion_mass_error,
        "min_density": sim.diagnostics.min_density_seen,
        "positivity_clips": sim.diagnostics.positivity_clips,
    }
    holder = {}
    if "holder" in want:
        holder = {
            "N_theta_0.5": holder_quotient(sim.times, space, sim.N, 0.5, seed=config.seed),
            "Z_theta_0.5": holder_quotient(sim.times, space, sim.Z, 0.5, seed=config.seed),
        }

    return CompareResult(
        gamma=gamma,
        times=sim.times,
        err_N=err_N,
        err_Z=err_Z,
        gauss_dev=gauss,
        v_max=v_max,
        mass_leak=leak,
        records=records,
        t_burn=t_burn,
        sups=sups,
        holder=holder,
        sim_trajectory=sim if keep_states else None,
        kbm_trajectory=kbm if keep_states else None,
    )


def _compare_worker(args):
    config_doc, gamma = args
    result = run_compare(parse_config(config_doc), gamma=gamma)
    # Strip numpy state down to what the aggregator and the writers need.
    return gamma, result


def run_gamma_sweep(config: RunConfig, jobs: int = 1):
    """Per-gamma compare runs aggregated into a SweepReport with power-law fits."""
    hooks = config.hooks()
    if "planted_theta" in hooks:
        return _planted_sweep(config, hooks), {}
    if config.gamma_list is None or len(config.gamma_list) < 3:
        raise ConfigError("gamma-sweep needs physical.gamma_list with >= 3 values")
    gammas = list(config.gamma_list)

    results = {}
    if jobs > 1:
        doc = config.to_dict()
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for gamma, result in pool.map(_compare_worker, [(doc, g) for g in gammas]):
                results[gamma] = result
    else:
        for g in gammas:
            results[g] = run_compare(config, gamma=g)

    errors = {
        "gauss_dev_sup": [results[g].sups["gauss_dev"] for g in gammas],
        "macro_err_N": [results[g].sups["err_N"] for g in gammas],
        "macro_err_Z": [results[g].sups["err_Z"] for g in gammas],
        "resid_N": [results[g].sups["resid_N"] for g in gammas],
        "resid_Z": [results[g].sups["resid_Z"] for g in gammas],
    }
    theta, c_hat, r2 = {}, {}, {}
    for family, vals in errors.items():
        fit = fit_power_law(gammas, vals)
        theta[family] = fit.theta_hat
        c_hat[family] = fit.c_hat
        r2[family] = fit.r2
    report = SweepReport(gammas=gammas, errors=errors, theta_hat=theta, c_hat=c_hat, r2=r2)
    return report, results


def _planted_sweep(config: RunConfig, hooks) -> SweepReport:
    """Synthetic-error mode: exercises aggregation and fitting without runs."""
    if config.gamma_list is None or len(config.gamma_list) < 3:
        raise ConfigError("gamma-sweep needs physical.gamma_list with >= 3 values")
    gammas = list(config.gamma_list)
    theta0 = hooks["planted_theta"]
    c0 = hooks.get("planted_c", 1.0)
    planted = [c0 * g ** (-theta0) for g in gammas]
    errors = {family: list(planted) for family in SWEEP_FAMILIES}
    theta, c_hat, r2 = {}, {}, {}
    for family, vals in errors.items():
        fit = fit_power_law(gammas, vals)
        theta[family] = fit.theta_hat
        c_hat[family] = fit.c_hat
        r2[family] = fit.r2
    return SweepReport(gammas=gammas, errors=errors, theta_hat=theta, c_hat=c_hat, r2=r2)
