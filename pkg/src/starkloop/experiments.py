"""Experiment runners that turn a configuration into labeled data tables."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from starkloop import __version__
from starkloop.config import ExperimentConfig
from starkloop.design import (
    DesignWeights,
    joint_cost,
    perturbative_f,
    perturbative_seed,
    sweep_theta,
    theta_amp_star,
    theta_balanced,
    theta_joint_star,
    theta_phase_star,
)
from starkloop.estimation import (
    DEFAULT_SNR_GRID,
    ResponseMap,
    build_response_map,
    log_sensitivity,
    monte_carlo_rmse,
    wrap_phase,
)
from starkloop.model import beta_from_mixing_angle, stress_point
from starkloop.nonuniform import (
    averaged_first_harmonic,
    averaged_response_map,
    coherent_gain,
    collapse_study,
    default_map_grid,
    discretize_bias,
    resonant_stark_config,
)
from starkloop.pss import (
    REFERENCE_N_MAX,
    apply_phase,
    first_harmonic,
    probe_harmonic,
    reconstruct_rho,
    solve_pss,
)
from starkloop.timedomain import IntegrationWindow, demodulate, integrate_master

DEFAULT_RESPONSE_GRID = np.linspace(0.02, 0.3, 281)
DEFAULT_GAIN_SPREADS = np.round(np.arange(1, 25) * 0.0025, 6)
OVERLAY_STRIDE = 4


@dataclass(frozen=True)
class Table:
    """Column-labeled numeric series; complex columns expand to ``_re``/``_im``."""

    columns: dict

    def expanded(self) -> dict:
        out = {}
        for name, values in self.columns.items():
            arr = np.atleast_1d(np.asarray(values))
            if np.iscomplexobj(arr):
                out[f"{name}_re"] = arr.real
                out[f"{name}_im"] = arr.imag
            else:
                out[name] = arr.astype(float)
        lengths = {len(v) for v in out.values()}
        if len(lengths) != 1:
            raise ValueError(f"table columns have unequal lengths {sorted(lengths)}")
        return out

    def to_csv(self) -> str:
        cols = self.expanded()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols.keys())
        for row in zip(*cols.values()):
            writer.writerow(format(float(v), ".17g") for v in row)
        return buf.getvalue()


@dataclass
class ResultBundle:
    config: ExperimentConfig
    tables: dict[str, Table]
    provenance: dict = field(default_factory=dict)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bundle(bundle: ResultBundle, out_dir: str | Path) -> Path:
    """Write one CSV per table, the echoed config and a JSON manifest."""
    out = Path(out_dir) / bundle.config.experiment
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, table in bundle.tables.items():
        _atomic_write(out / f"{name}.csv", table.to_csv())
        files[name] = f"{name}.csv"
    _atomic_write(out / "config.toml", bundle.config.to_toml())
    manifest = {
        "experiment": bundle.config.experiment,
        "tables": files,
        "config": bundle.config.to_dict(),
        "provenance": bundle.provenance,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _snr_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.asarray(cfg.snr_grid, dtype=float) if cfg.snr_grid else DEFAULT_SNR_GRID


def run_phase_law(cfg: ExperimentConfig) -> dict[str, Table]:
    op = cfg.operating_point()
    base = solve_pss(op, cfg.n_max)
    p0 = probe_harmonic(base, 1)
    phis = np.linspace(0.0, 2.0 * np.pi, cfg.phi_points, endpoint=False)
    rotated = np.array([probe_harmonic(apply_phase(base.harmonics, p), 1) for p in phis])
    solved = np.array([probe_harmonic(solve_pss(op, cfg.n_max, phi_s=p), 1) for p in phis])
    if p0 == 0:
        res_rot = res_sol = np.full(phis.size, np.nan)
    else:
        res_rot = np.abs(wrap_phase(np.angle(rotated / p0) - phis))
        res_sol = np.abs(wrap_phase(np.angle(solved / p0) - phis))
    return {"phase_law": Table({
        "phi_s": phis, "p21_apply": rotated, "p21_solve": solved,
        "magnitude": np.abs(solved), "residual_apply": res_rot, "residual_solve": res_sol,
    })}


def _response_map(cfg: ExperimentConfig) -> ResponseMap:
    grid = np.asarray(cfg.omega_grid) if cfg.omega_grid else DEFAULT_RESPONSE_GRID
    return build_response_map(cfg.operating_point(), grid, cfg.omega_s_rabi, cfg.n_max)


def run_response_map(cfg: ExperimentConfig) -> dict[str, Table]:
    rmap = _response_map(cfg)
    lo, hi = rmap.branch
    s = np.full(rmap.omega_grid.size, np.nan)
    for i in range(lo + 1, hi):
        s[i] = log_sensitivity(rmap, float(rmap.omega_grid[i]))
    on_branch = np.zeros(rmap.omega_grid.size)
    on_branch[lo:hi + 1] = 1.0
    return {
        "response_map": Table({"omega_s": rmap.omega_grid, "m": rmap.magnitudes,
                               "s": s, "on_branch": on_branch}),
        "design_point": Table({"omega_s0": [rmap.design_level], "m0": [rmap.design_magnitude],
                               "s0": [log_sensitivity(rmap, rmap.design_level)],
                               "branch_lo": [rmap.omega_grid[lo]],
                               "branch_hi": [rmap.omega_grid[hi]]}),
    }


def run_theta_sweep(cfg: ExperimentConfig) -> dict[str, Table]:
    grid = np.asarray(cfg.theta_grid) if cfg.theta_grid else None
    sweep = sweep_theta(cfg.operating_point(), cfg.omega_s_rabi, grid, cfg.n_max)
    t_phi, t_amp = theta_phase_star(sweep), theta_amp_star(sweep)
    bal = theta_balanced(sweep, t_phi, t_amp)
    weights = DesignWeights(0.5, 0.5)
    t_joint = theta_joint_star(sweep, weights)
    best_phi = sweep.metrics(t_phi)[0][0]
    best_amp = sweep.metrics(t_amp)[1][0]
    with np.errstate(divide="ignore"):
        d_phi = best_phi / sweep.m_phi
        d_amp = best_amp / sweep.m_amp
    theta_seed, beta_seed = perturbative_seed()
    return {
        "theta_sweep": Table({"theta": sweep.thetas, "m_phi": sweep.m_phi, "m_amp": sweep.m_amp,
                              "s": sweep.s_values, "f_proxy": perturbative_f(sweep.thetas),
                              "d_phi": d_phi, "d_amp": d_amp,
                              "joint_cost": joint_cost(sweep, weights)}),
        "optima": Table({"theta_phase": [t_phi], "theta_amp": [t_amp],
                         "theta_balanced": [bal.theta], "d_phi_balanced": [bal.d_phi],
                         "d_amp_balanced": [bal.d_amp], "crossing": [float(bal.crossing)],
                         "theta_joint": [t_joint], "theta_seed": [theta_seed],
                         "beta_seed": [beta_seed]}),
    }


def _rmse_table(curve, extra: dict | None = None) -> Table:
    cols = dict(extra or {})
    cols.update({"snr": curve.snr_grid, "snr_eff": curve.snr_eff,
                 "rmse_phase": curve.rmse_phase, "theory_phase": curve.theory_phase,
                 "rmse_amp_rel": curve.rmse_amp_rel, "theory_amp_rel": curve.theory_amp_rel,
                 "failures": curve.failures})
    return Table(cols)


def run_rmse_uniform(cfg: ExperimentConfig) -> dict[str, Table]:
    rmap = _response_map(cfg)
    curve = monte_carlo_rmse(cfg.operating_point(), rmap, _snr_grid(cfg), cfg.trials,
                             seed=cfg.seed, n_max=cfg.n_max)
    return {"rmse_uniform": _rmse_table(curve),
            "sensitivity": Table({"s": [curve.sensitivity], "trials": [curve.trials]})}


def _distribution(cfg: ExperimentConfig, beta0: float, spread: float, detuning: str):
    if detuning == "local":
        return discretize_bias(beta0, spread, cfg.node_count, cfg.quadrature)
    return discretize_bias(beta0, spread)


def run_rmse_nonuniform(cfg: ExperimentConfig) -> dict[str, Table]:
    op = cfg.operating_point()
    stark = resonant_stark_config(op)
    beta0 = beta_from_mixing_angle(op.theta)
    grid = np.asarray(cfg.omega_grid) if cfg.omega_grid else default_map_grid(cfg.omega_s_rabi)
    spreads = [0.0] + [s for s in cfg.rel_spreads if s > 0]
    responses = [averaged_response_map(op, _distribution(cfg, beta0, s, cfg.detuning), grid,
                                       cfg.omega_s_rabi, stark, cfg.detuning, cfg.n_max)
                 for s in spreads]
    curves = collapse_study(op, responses, _snr_grid(cfg), cfg.trials, seed=cfg.seed,
                            n_max=cfg.n_max)
    rows = {k: [] for k in ("rel_spread", "snr_raw", "snr_phase_axis", "snr_amp_axis",
                            "rmse_phase", "rmse_amp_rel", "theory_phase", "theory_amp_rel",
                            "failures")}
    for c in curves:
        k = c.curve.snr_grid.size
        rows["rel_spread"].append(np.full(k, c.rel_spread))
        rows["snr_raw"].append(c.snr_raw)
        rows["snr_phase_axis"].append(c.snr_phase_axis)
        rows["snr_amp_axis"].append(c.snr_amp_axis)
        rows["rmse_phase"].append(c.curve.rmse_phase)
        rows["rmse_amp_rel"].append(c.curve.rmse_amp_rel)
        rows["theory_phase"].append(c.curve.theory_phase)
        rows["theory_amp_rel"].append(c.curve.theory_amp_rel)
        rows["failures"].append(c.curve.failures)
    return {
        "collapse": Table({k: np.concatenate(v) for k, v in rows.items()}),
        "gain": Table({"rel_spread": spreads, "gain": [r.gain for r in responses],
                       "s_avg": [r.s_avg for r in responses],
                       "p_bar": np.array([r.p_bar for r in responses])}),
    }


def run_gain_curve(cfg: ExperimentConfig) -> dict[str, Table]:
    op = cfg.operating_point()
    stark = resonant_stark_config(op)
    beta0 = beta_from_mixing_angle(op.theta)
    spreads = np.asarray(cfg.gain_spreads) if cfg.gain_spreads else DEFAULT_GAIN_SPREADS
    reference = first_harmonic(op, cfg.n_max)
    g_fixed, g_local = [], []
    for s in spreads:
        g_fixed.append(coherent_gain(averaged_first_harmonic(
            op, _distribution(cfg, beta0, float(s), "fixed"), n_max=cfg.n_max), reference))
        g_local.append(coherent_gain(averaged_first_harmonic(
            op, _distribution(cfg, beta0, float(s), "local"), stark=stark, detuning="local",
            n_max=cfg.n_max), reference))
    return {"gain_curve": Table({"rel_spread": spreads, "gain_fixed": g_fixed,
                                 "gain_local": g_local})}


def _validation_points(cfg: ExperimentConfig):
    return (("nominal", cfg.operating_point()), ("stress", stress_point(rates=cfg.operating_point().rates)))


def run_validate(cfg: ExperimentConfig) -> dict[str, Table]:
    points = _validation_points(cfg)
    refs = {name: first_harmonic(op, cfg.n_ref) for name, op in points}
    conv = {"n": np.asarray(cfg.n_values, dtype=float)}
    for name, op in points:
        conv[f"eps_{name}"] = [abs(first_harmonic(op, n) - refs[name]) / abs(refs[name])
                               for n in cfg.n_values]
    tables = {"convergence": Table(conv)}
    if not cfg.time_domain:
        return tables
    window = IntegrationWindow(cfg.td_burn_in_periods, cfg.td_eval_periods,
                               cfg.td_samples_per_period)
    cmp_rows = {k: [] for k in ("point", "n", "floquet", "time_domain", "rel_error")}
    overlay = {k: [] for k in ("point", "t", "rho21_time_domain", "rho21_floquet")}
    for idx, (name, op) in enumerate(points):
        sol = solve_pss(op, cfg.n_ref)
        traj = integrate_master(op, window=window)
        for n in (0, 1, 2):
            fl, td = probe_harmonic(sol, n), demodulate(traj, n)
            cmp_rows["point"].append(float(idx))
            cmp_rows["n"].append(float(n))
            cmp_rows["floquet"].append(fl)
            cmp_rows["time_domain"].append(td)
            cmp_rows["rel_error"].append(abs(td - fl) / abs(fl) if fl != 0 else math.nan)
        t = traj.times[::OVERLAY_STRIDE]
        overlay["point"].append(np.full(t.size, float(idx)))
        overlay["t"].append(t)
        overlay["rho21_time_domain"].append(traj.rho21[::OVERLAY_STRIDE])
        overlay["rho21_floquet"].append(reconstruct_rho(sol, t)[:, 1, 0])
    tables["time_domain"] = Table({k: np.array(v) for k, v in cmp_rows.items()})
    tables["overlay"] = Table({k: np.concatenate(v) for k, v in overlay.items()})
    return tables


RUNNERS = {
    "phase_law": run_phase_law,
    "response_map": run_response_map,
    "theta_sweep": run_theta_sweep,
    "rmse_uniform": run_rmse_uniform,
    "rmse_nonuniform": run_rmse_nonuniform,
    "gain_curve": run_gain_curve,
    "validate": run_validate,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ResultBundle:
    """Run ``cfg.experiment``; write the bundle when ``out_dir`` is given."""
    start = time.perf_counter()
    tables = RUNNERS[cfg.experiment](cfg)
    op = cfg.operating_point()
    eps = None
    if cfg.n_max < REFERENCE_N_MAX and first_harmonic(op, REFERENCE_N_MAX) != 0:
        ref = first_harmonic(op, REFERENCE_N_MAX)
        eps = abs(first_harmonic(op, cfg.n_max) - ref) / abs(ref)
    provenance = {
        "artifact_version": __version__,
        "seed": cfg.seed,
        "n_max": cfg.n_max,
        "epsilon_n": eps,
        "epsilon_reference_n": REFERENCE_N_MAX,
        "wall_clock_seconds": round(time.perf_counter() - start, 3),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    bundle = ResultBundle(cfg, tables, provenance)
    if out_dir is not None:
        write_bundle(bundle, out_dir)
    return bundle
