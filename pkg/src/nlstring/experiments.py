"""Experiment orchestration and file output.

Each experiment name maps to a fixed recipe: resolve the scheme
(grid, time step, free parameters, mode count), run or analyse, and
collect named channels, snapshot frames and tables.  Everything is
deterministic; re-running a spec reproduces every output byte.
"""
from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy.io.wavfile

from . import dispersion as dsp
from .config_io import ExperimentSpec
from .energy import discrete_energy, energy_error_series, power_balance_residual
from .errors import DimensionTooSmall, ParameterOutOfRange
from .operators import SpatialOperators
from .params import AUTO, InitialCondition, SimConfig, StringParams
from .reference import (duffing_analytic, duffing_ieq_run,
                        eigenfrequency_convergence, fit_loglog_slope,
                        theta_scheme_convergence)
from .stepper import Simulation, read_output


@dataclass
class ResolvedScheme:
    """Concrete discretisation for one run."""

    params: StringParams      # effective parameters (stiffness flag applied)
    k: float
    theta_u: float
    theta_v: float
    n: int
    h: float
    h0: float
    n_modes: int
    ops: SpatialOperators


def resolve_scheme(params: StringParams, sim: SimConfig) -> ResolvedScheme:
    """Turn a resolution-independent config into grid, step and parameters.

    Order matters: theta_u first (it moves the stability limit), then the
    grid, then the mode count, then theta_v (its search needs the modal
    eigenvalues of the actual grid).
    """
    k = sim.dt
    prm = params if sim.stiffness_on else params.without_stiffness()

    theta_u = sim.theta_u
    if theta_u == AUTO:
        theta_u = dsp.theta_u_bar(prm, k, safety=sim.h_safety)

    h0 = dsp.stability_grid_spacing(prm, k, theta_u)
    n = int(math.floor(prm.L / (sim.h_safety * h0)))
    if n < 3:
        raise DimensionTooSmall(
            f"resolved grid has only {n} subintervals; raise the sample rate")
    h = prm.L / n

    if sim.n_modes_rule == "cfl":
        n_modes = dsp.max_longitudinal_modes(prm, k, rule="cfl")
    else:
        tv = sim.theta_v if sim.theta_v != AUTO else 1.0
        n_modes = dsp.max_longitudinal_modes(prm, k, tv, rule="energy")
    n_modes = max(1, n_modes)

    ops = SpatialOperators.build(n, prm.L, n_modes, sim.lambda_variant)

    theta_v = sim.theta_v
    if theta_v == AUTO:
        theta_v = dsp.search_theta_v(prm, k, ops.eigvals)

    return ResolvedScheme(params=prm, k=k, theta_u=theta_u, theta_v=theta_v,
                          n=n, h=h, h0=h0, n_modes=n_modes, ops=ops)


def sample_initial_condition(ic: InitialCondition, x: np.ndarray,
                             L: float) -> np.ndarray:
    center = L / 2.0 if ic.center is None else ic.center
    if ic.kind == "zero" or ic.amplitude == 0.0:
        return np.zeros_like(x)
    if ic.kind == "raised_cosine":
        half_width = ic.width * L
        arg = np.pi * (x - center) / half_width
        prof = 0.5 * ic.amplitude * (1.0 + np.cos(arg))
        return np.where(np.abs(x - center) <= half_width, prof, 0.0)
    if ic.kind == "gaussian":
        xi = x / L - center / L
        return ic.amplitude * np.exp(-xi * xi / (2.0 * ic.width ** 2))
    raise ParameterOutOfRange(f"unknown initial condition {ic.kind!r}")


@dataclass
class RunOutput:
    """Everything a run produced, ready for the writers."""

    sample_rate: float
    channels: dict = field(default_factory=dict)
    snapshot_x: np.ndarray | None = None
    snapshots: list = field(default_factory=list)        # (t, full-grid u)
    snapshots_linear: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)           # name -> list of rows
    metadata: dict = field(default_factory=dict)


def _metadata_for(spec: ExperimentSpec, rs: ResolvedScheme) -> dict:
    prm, sim = spec.params, spec.sim
    md = {
        "experiment": spec.name,
        "sample_rate": rs.k and 1.0 / rs.k,
        "k": rs.k, "n": rs.n, "h": rs.h, "h0": rs.h0,
        "n_modes": rs.n_modes,
        "theta_u": rs.theta_u, "theta_v": rs.theta_v,
        "rho": prm.rho, "E": prm.E, "T0": prm.T0, "L": prm.L, "r": prm.r,
        "sigma0_u": prm.sigma0_u, "sigma0_v": prm.sigma0_v,
        "sigma1_u": prm.sigma1_u,
        "area": prm.area, "inertia": prm.inertia,
        "c_u": prm.c_u, "c_v": prm.c_v, "coupling": prm.coupling,
        "stiffness_on": sim.stiffness_on, "losses_on": sim.losses_on,
        "duration": sim.duration, "x_o": sim.tap,
        "base_rate": sim.base_rate, "oversampling": sim.oversampling,
        "h_safety": sim.h_safety,
        "n_modes_rule": sim.n_modes_rule, "lambda_variant": sim.lambda_variant,
        "ic_u": f"{sim.ic_u.kind} {sim.ic_u.amplitude} {sim.ic_u.width}",
        "ic_v": f"{sim.ic_v.kind} {sim.ic_v.amplitude} {sim.ic_v.width}",
    }
    if spec.source is not None:
        src = spec.source
        md.update({"F_s": src.peak_force, "t0": src.onset, "t_s": src.duration,
                   "zeta": src.kind, "x_f": src.position})
    return md


def time_domain_run(spec: ExperimentSpec, rs: ResolvedScheme,
                    linear_reference: bool = False) -> RunOutput:
    """Advance the scheme for the configured duration, recording channels.

    With ``linear_reference`` a second run with the nonlinear coupling
    zeroed is performed on the same grid, recorded under ``*_linear``
    channel/snapshot names.
    """
    sim_cfg = spec.sim
    out = RunOutput(sample_rate=1.0 / rs.k)
    out.metadata = _metadata_for(spec, rs)
    n_samples = int(round(sim_cfg.duration / rs.k))

    snap_times = sorted(set(sim_cfg.snapshot_times))
    snap_steps = {int(round(t / rs.k)): t for t in snap_times}
    x_full = np.concatenate(([0.0], rs.ops.interior_x, [rs.params.L]))
    out.snapshot_x = x_full

    variants = [("", rs.params, out.snapshots)]
    if linear_reference:
        variants.append(("_linear", rs.params.with_zero_coupling(),
                         out.snapshots_linear))

    for suffix, prm, frames in variants:
        driver = Simulation(prm, rs.ops, rs.k, theta_u=rs.theta_u,
                            theta_v=rs.theta_v, losses_on=sim_cfg.losses_on,
                            source=spec.source)
        x = rs.ops.interior_x
        u0 = sample_initial_condition(sim_cfg.ic_u, x, prm.L)
        v0 = sample_initial_condition(sim_cfg.ic_v, x, prm.L)
        state = driver.initial_state(u0=u0, v0=v0)

        u_tap = np.zeros(n_samples + 1)
        v_tap = np.zeros(n_samples + 1)
        force = np.zeros(n_samples + 1)
        energy = np.zeros(n_samples + 1)
        residual = np.zeros(n_samples + 1)

        def record(n, u_vec, v_vec):
            u_tap[n] = read_output(u_vec, sim_cfg.tap, rs.h)
            v_tap[n] = read_output(v_vec, sim_cfg.tap, rs.h)
            force[n] = driver.force_at(n)
            if n in snap_steps:
                frames.append((n * rs.k, np.concatenate(([0.0], u_vec, [0.0]))))

        record(0, u0, rs.ops.basis @ (rs.ops.basis.T @ v0))
        e_first = discrete_energy(state, rs.ops, prm, rs.theta_u,
                                  rs.theta_v).total
        energy[0] = e_first
        if n_samples >= 1:
            record(1, state.u_cur, state.v_cur(rs.ops))
            energy[1] = e_first

        while state.n < n_samples:
            f_n = driver.force_at(state.n)
            new_state = driver.step_once(state)
            res = power_balance_residual(
                new_state, state, rs.ops, prm, rs.theta_u, rs.theta_v,
                f_n, driver.J, sim_cfg.losses_on)
            state = new_state
            n = state.n
            record(n, state.u_cur, state.v_cur(rs.ops))
            energy[n] = discrete_energy(state, rs.ops, prm, rs.theta_u,
                                        rs.theta_v).total
            residual[n - 1] = res

        out.channels["u_tap" + suffix] = u_tap
        out.channels["v_tap" + suffix] = v_tap
        if not suffix:
            out.channels["force"] = force
            out.channels["energy"] = energy
            out.channels["power_residual"] = residual
            if energy[0] > 0.0:
                out.channels["energy_err"] = np.concatenate(
                    ([0.0], energy_error_series(energy[1:])))
    return out


def _snapshot_runs(spec: ExperimentSpec, rs: ResolvedScheme) -> RunOutput:
    if not spec.sim.snapshot_times:
        times = tuple(spec.sim.duration * frac
                      for frac in (0.125, 0.25, 0.375, 0.5, 0.75, 1.0))
        spec = ExperimentSpec(
            name=spec.name, params=spec.params,
            sim=_replace_sim(spec.sim, snapshot_times=times),
            source=spec.source)
    return time_domain_run(spec, rs, linear_reference=True)


def _replace_sim(sim: SimConfig, **kw) -> SimConfig:
    from dataclasses import replace
    return replace(sim, **kw)


def _dispersion_tables(spec: ExperimentSpec, rs: ResolvedScheme) -> RunOutput:
    prm = spec.params if spec.sim.stiffness_on else spec.params.without_stiffness()
    k = rs.k
    out = RunOutput(sample_rate=1.0 / k)
    out.metadata = _metadata_for(spec, rs)
    tuned = dsp.theta_u_bar(prm, k, safety=spec.sim.h_safety)
    for label, theta, h in (
            ("transverse_tuned", tuned, None),
            ("transverse_theta1", 1.0, None),
            ("transverse_longitudinal_grid", 1.0, prm.c_v * k)):
        rep = dsp.transverse_dispersion_report(prm, k, theta, h=h,
                                               in_band_only=(h is None))
        out.tables[label] = list(rep.rows())
        out.metadata[f"max_rel_err_{label}"] = float(np.max(np.abs(rep.rel_error)))
    out.metadata["theta_u_tuned"] = tuned
    return out


def _longitudinal_tables(spec: ExperimentSpec, rs: ResolvedScheme,
                         out: RunOutput) -> None:
    prm = rs.params
    exact = dsp.exact_longitudinal_eigenfrequencies(prm, rs.n_modes)
    eff = dsp.effective_longitudinal_eigenfrequencies(
        rs.ops.eigvals, prm, rs.theta_v, rs.k)
    bare = dsp.numerical_eigenfrequencies_longitudinal(
        rs.ops.eigvals, prm, rs.theta_v, rs.k)
    rows = [(m + 1, eff[m] / (2 * math.pi), bare[m] / (2 * math.pi),
             exact[m] / (2 * math.pi)) for m in range(rs.n_modes)]
    out.tables["longitudinal_modes"] = rows
    out.metadata["max_long_mode_err"] = float(np.max(np.abs(eff - exact)))


def _duffing_tables(spec: ExperimentSpec) -> RunOutput:
    out = RunOutput(sample_rate=0.0)
    out.metadata = {"experiment": spec.name}
    base_k = 0.01
    u0 = 3.7
    for gamma in (0.6, 0.8, 1.0):
        rows = []
        ks = base_k / 2.0 ** np.arange(7)
        qs = []
        for k in ks:
            n_e = int(round(0.4 / k))
            u, _ = duffing_ieq_run(u0, gamma, k, 0.4)
            q = duffing_analytic(n_e * k, u0, gamma) - u[n_e]
            qs.append(q)
            rows.append((k, abs(q)))
        slope = fit_loglog_slope(ks, qs)
        out.tables[f"duffing_gamma_{gamma:g}"] = rows
        out.metadata[f"slope_gamma_{gamma:g}"] = slope
    return out


def _theta_convergence_tables(spec: ExperimentSpec) -> RunOutput:
    out = RunOutput(sample_rate=0.0)
    out.metadata = {"experiment": spec.name}
    prm = spec.params
    n_list = [100, 200, 400, 800]
    for theta in (0.6, 0.8, 1.0):
        res = theta_scheme_convergence(prm, theta, n_list)
        out.tables[f"pointwise_theta_{theta:g}"] = [
            (res.h[i], res.k[i], res.s[i], abs(res.q[i]))
            for i in range(len(n_list))]
        out.metadata[f"slope_h_theta_{theta:g}"] = res.slope_h
        out.metadata[f"slope_k_theta_{theta:g}"] = res.slope_k
        out.metadata[f"slope_s_theta_{theta:g}"] = res.slope_s
        s, errs = eigenfrequency_convergence(prm, theta,
                                             [3200, 6400, 12800, 25600])
        out.tables[f"eigenfrequency_theta_{theta:g}"] = [
            (s[i], *errs[i]) for i in range(len(s))]
        for m in range(4):
            out.metadata[f"eig_slope_m{m + 1}_theta_{theta:g}"] = \
                fit_loglog_slope(s, errs[:, m])
    return out


def _explicit_vs_implicit_tables(spec: ExperimentSpec) -> RunOutput:
    prm = spec.params
    k = spec.sim.dt
    out = RunOutput(sample_rate=1.0 / k)
    h_exp = dsp.stability_grid_spacing(prm, k, 1.0)
    h_imp = dsp.implicit_limit_spacing(prm, k)
    n_exp = int(math.floor(prm.L / h_exp))
    n_imp = int(math.floor(prm.L / h_imp))
    out.metadata = {
        "experiment": spec.name,
        "explicit_grid_points": n_exp,
        "implicit_grid_points": n_imp,
        "modes_below_nyquist": int(math.floor(dsp.count_transverse_modes(prm, k))),
    }
    ops_exp = SpatialOperators.build(n_exp, prm.L, 1)
    ops_imp = SpatialOperators.build(n_imp, prm.L, 1)
    om_exp = dsp.numerical_eigenfrequencies_transverse(ops_exp, prm, 1.0, k)
    om_imp = dsp.implicit_scheme_eigenfrequencies(ops_imp, prm, k)
    n_cmp = min(len(om_exp), len(om_imp))
    exact = dsp.analytic_transverse_eigenfrequencies(prm, n_cmp)
    rows = [(m + 1, exact[m] / (2 * math.pi),
             abs(om_exp[m] - exact[m]) / (2 * math.pi),
             abs(om_imp[m] - exact[m]) / (2 * math.pi))
            for m in range(n_cmp)]
    out.tables["dispersion_error"] = rows
    return out


def run_experiment(spec: ExperimentSpec) -> RunOutput:
    """Execute the named experiment and return its outputs."""
    if spec.name in ("duffing-convergence",):
        return _duffing_tables(spec)
    if spec.name in ("theta-convergence",):
        return _theta_convergence_tables(spec)
    if spec.name in ("explicit-vs-implicit",):
        return _explicit_vs_implicit_tables(spec)
    rs = resolve_scheme(spec.params, spec.sim)
    if spec.name == "dispersion":
        return _dispersion_tables(spec, rs)
    if spec.name == "snapshots":
        return _snapshot_runs(spec, rs)
    linear_ref = spec.name == "waveforms"
    out = time_domain_run(spec, rs, linear_reference=linear_ref)
    if spec.name == "longitudinal-spectra":
        _longitudinal_tables(spec, rs, out)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_outputs(run: RunOutput, out_dir: str) -> list[str]:
    """Write channels as CSV (+WAV for displacement taps), tables, metadata.

    Channel CSVs carry two columns, time and value, 17 significant
    digits, no header; row count equals sample count including t = 0.
    Returns the list of written paths; empty outputs produce a warning
    and no files.
    """
    if not run.channels and not run.tables and not run.snapshots:
        print("warning: nothing to write", file=sys.stderr)
        return []
    os.makedirs(out_dir, exist_ok=True)
    written = []

    k = 1.0 / run.sample_rate if run.sample_rate > 0 else 0.0
    for name, series in sorted(run.channels.items()):
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            for i, value in enumerate(series):
                fh.write("%.17g,%.17g\n" % (i * k, value))
        written.append(path)
        if name.startswith(("u_tap", "v_tap")):
            scale = float(np.max(np.abs(series)))
            data = (series / scale if scale > 0 else series).astype(np.float32)
            wav_path = os.path.join(out_dir, f"{name}.wav")
            scipy.io.wavfile.write(wav_path, int(round(run.sample_rate)), data)
            run.metadata[f"wav_scale_{name}"] = scale
            written.append(wav_path)

    for label, snaps in (("snapshots", run.snapshots),
                         ("snapshots_linear", run.snapshots_linear)):
        if not snaps:
            continue
        path = os.path.join(out_dir, f"{label}.csv")
        frames = [frame for _, frame in snaps]
        run.metadata[f"{label}_times"] = ",".join("%.17g" % t for t, _ in snaps)
        with open(path, "w", encoding="utf-8") as fh:
            for i, x in enumerate(run.snapshot_x):
                cols = [x] + [frame[i] for frame in frames]
                fh.write(",".join("%.17g" % c for c in cols) + "\n")
        written.append(path)

    for name, rows in sorted(run.tables.items()):
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(",".join(_fmt(c) for c in row) + "\n")
        written.append(path)

    meta_path = os.path.join(out_dir, "metadata.txt")
    with open(meta_path, "w", encoding="utf-8") as fh:
        for key in sorted(run.metadata):
            fh.write(f"{key} = {_fmt(run.metadata[key])}\n")
    written.append(meta_path)
    return written
