"""Stability bounds, mode counting, tuning of the free scheme parameters,
and numerical-versus-analytic eigenfrequency analysis.

The transverse scheme leaves the fourth derivative explicit, so its
stability condition ties h to k without being CFL-like; theta_u widens
or narrows the stable region through the mass operator.  The
longitudinal modal scheme is diagonal; theta_v shifts its effective
eigenfrequencies.  Helpers here evaluate all the closed forms and do the
minimax search for theta_v.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (BracketFailure, ThetaOutOfRange, ThetaVOutOfRange,
                     UnstableConfiguration)
from .operators import SpatialOperators
from .params import StringParams

#: slack admitted on arcsin arguments before declaring instability
ARCSIN_TOL = 1e-12


def stability_grid_spacing(prm: StringParams, k: float,
                           theta_u: float = 1.0) -> float:
    """Smallest stable grid spacing h0 for time step k and given theta_u."""
    if not theta_u > 0.5:
        raise ThetaOutOfRange(f"theta_u must exceed 1/2, got {theta_u}")
    two_theta = 2.0 * theta_u - 1.0
    t0k2 = prm.T0 * k * k
    rad = math.sqrt(t0k2 ** 2 + 16.0 * two_theta * prm.rho_a * prm.ei * k * k)
    return math.sqrt((t0k2 + rad) / (2.0 * prm.rho_a * two_theta))


def limit_time_step(prm: StringParams, h: float, theta_u: float = 1.0) -> float:
    """Largest stable time step for grid spacing h; inverse of the bound."""
    if not theta_u > 0.5:
        raise ThetaOutOfRange(f"theta_u must exceed 1/2, got {theta_u}")
    return h * h * math.sqrt(prm.rho_a * (2.0 * theta_u - 1.0)
                             / (prm.T0 * h * h + 4.0 * prm.ei))


def count_transverse_modes(prm: StringParams, k: float) -> float:
    """Number of simply-supported eigenfrequencies below the Nyquist limit.

    Returns the real-valued count; callers floor it.  The stiffness-free
    limit is L / (c_u k).
    """
    if prm.ei == 0.0:
        return prm.L / (prm.c_u * k)
    disc = math.sqrt(prm.T0 ** 2 + 4.0 * math.pi ** 2 / k ** 2
                     * prm.rho * prm.E * prm.area * prm.inertia)
    return prm.L / math.pi * math.sqrt((-prm.T0 + disc) / (2.0 * prm.ei))


def theta_u_bar(prm: StringParams, k: float, safety: float = 1.0) -> float:
    """theta_u that stretches the stable grid to one interval per band mode.

    ``safety`` > 1 aims slightly below the mode count (spacing target
    L / (safety * N_u)), trading a little top-band accuracy for margin
    against spurious behaviour at the Nyquist limit.
    """
    n_u = count_transverse_modes(prm, k)
    h_bar = prm.L / (safety * n_u)
    return 0.5 + (prm.T0 * k ** 2 * h_bar ** 2 + 4.0 * prm.ei * k ** 2) \
        / (2.0 * prm.rho_a * h_bar ** 4)


def max_longitudinal_modes(prm: StringParams, k: float, theta_v: float = 1.0,
                           rule: str = "cfl") -> int:
    """Largest admissible number of longitudinal modes.

    rule="cfl": bound from the longitudinal wave speed, (2L/pi k) sqrt(rho/E);
    small, and the default since modes beyond it cannot sit at their true
    frequencies anyway.  rule="energy": the nonnegativity bound
    (2L/pi k) sqrt(rho A / (2(1-theta_v) rho A + T0)), much larger at
    theta_v = 1 where it reduces to the transverse-speed bound.
    """
    if rule == "cfl":
        return int(math.floor(2.0 * prm.L / (math.pi * k)
                              * math.sqrt(prm.rho / prm.E)))
    if rule == "energy":
        denom = 2.0 * (1.0 - theta_v) * prm.rho_a + prm.T0
        if denom <= 0.0:
            raise ThetaVOutOfRange(
                f"2(1-theta_v) rho A + T0 must be positive, got {denom}")
        return int(math.floor(2.0 * prm.L / (math.pi * k)
                              * math.sqrt(prm.rho_a / denom)))
    raise ValueError(f"unknown mode rule {rule!r}")


def analytic_transverse_eigenfrequencies(prm: StringParams,
                                         n_modes: int) -> np.ndarray:
    """Continuous simply-supported eigenfrequencies, rad/s."""
    m = np.arange(1, n_modes + 1, dtype=float)
    gamma2 = (m * math.pi / prm.L) ** 2
    return np.sqrt(prm.T0 / prm.rho_a * gamma2
                   + prm.ei / prm.rho_a * gamma2 ** 2)


def _freq_from_squared(lam: np.ndarray, k: float) -> np.ndarray:
    arg = 0.5 * k * np.sqrt(np.maximum(lam, 0.0))
    if np.any(arg > 1.0 + ARCSIN_TOL):
        raise UnstableConfiguration(
            f"frequency map argument {arg.max():.6g} exceeds 1; "
            "grid/time-step pair is outside the stable region")
    return 2.0 / k * np.arcsin(np.clip(arg, 0.0, 1.0))


def numerical_eigenfrequencies_transverse(ops: SpatialOperators,
                                          prm: StringParams, theta_u: float,
                                          k: float) -> np.ndarray:
    """Eigenfrequencies of the parameterised transverse scheme, rad/s.

    Generalised symmetric eigenproblem of the stiffness form against the
    mass operator, mapped through the one-step frequency relation.
    """
    b = (-prm.T0 / prm.rho_a * ops.d2 + prm.ei / prm.rho_a * ops.d4).toarray()
    rmat = np.eye(ops.n - 1) + (1.0 - theta_u) * ops.h ** 2 / 2.0 \
        * ops.d2.toarray()
    lam = sla.eigh(b, rmat, eigvals_only=True)
    return _freq_from_squared(np.sort(lam), k)


def transverse_dispersion_symbol(prm: StringParams, h: float, k: float,
                                 theta_u: float,
                                 gamma: np.ndarray) -> np.ndarray:
    """Frequency-domain version of the transverse scheme at wavenumber gamma."""
    s2 = np.sin(gamma * h / 2.0) ** 2
    lam = (prm.T0 / prm.rho_a * 4.0 / h ** 2 * s2
           + prm.ei / prm.rho_a * 16.0 / h ** 4 * s2 ** 2)
    lam /= 1.0 - 2.0 * (1.0 - theta_u) * s2
    return _freq_from_squared(lam, k)


def numerical_eigenfrequencies_longitudinal(eigvals: np.ndarray,
                                            prm: StringParams, theta_v: float,
                                            k: float) -> np.ndarray:
    """Eigenfrequencies of the bare longitudinal modal scheme, rad/s.

    Only the tension term enters here; the quadratised coupling that
    carries the rest of the longitudinal stiffness is excluded.  See
    :func:`effective_longitudinal_eigenfrequencies` for the frequencies a
    simulation actually exhibits.
    """
    s_diag = 1.0 - (1.0 - theta_v) * k ** 2 / 2.0 * np.asarray(eigvals)
    if np.any(s_diag <= 0.0):
        raise UnstableConfiguration("longitudinal mass operator not positive")
    lam = prm.T0 / prm.rho_a * np.asarray(eigvals) / s_diag
    return _freq_from_squared(lam, k)


def effective_longitudinal_eigenfrequencies(eigvals: np.ndarray,
                                            prm: StringParams, theta_v: float,
                                            k: float) -> np.ndarray:
    """Longitudinal eigenfrequencies of the full scheme linearised at rest.

    With no transverse motion the auxiliary variable is exactly linear in
    the longitudinal strain and contributes a trapezoid-averaged
    restoring force (EA - T0) Lambda; solving the one-step relation gives
    sin^2(w k/2) = EA Lambda / (4 rho A S / k^2 + (EA - T0) Lambda).
    These are the spectral peaks a longitudinal simulation shows, and the
    target of the theta_v search.
    """
    lam = np.asarray(eigvals, dtype=float)
    s_diag = 1.0 - (1.0 - theta_v) * k ** 2 / 2.0 * lam
    if np.any(s_diag <= 0.0):
        raise UnstableConfiguration("longitudinal mass operator not positive")
    ea = prm.coupling + prm.T0
    xi = ea * lam / (4.0 * prm.rho_a * s_diag / k ** 2 + prm.coupling * lam)
    if np.any(xi > 1.0 + ARCSIN_TOL):
        raise UnstableConfiguration(
            "longitudinal mode pushed past the Nyquist limit")
    return 2.0 / k * np.arcsin(np.sqrt(np.clip(xi, 0.0, 1.0)))


def exact_longitudinal_eigenfrequencies(prm: StringParams,
                                        n_modes: int) -> np.ndarray:
    """Continuous longitudinal eigenfrequencies c_v m pi / L, rad/s."""
    return prm.c_v * np.arange(1, n_modes + 1) * math.pi / prm.L


def theta_v_literal(prm: StringParams) -> float:
    """Closed-form fit 1 + 2(T0 - EA)/(7 rho A) for the searched theta_v.

    Kept as a documented option; the numerical search is the default.
    """
    return 1.0 + 2.0 * (prm.T0 - (prm.coupling + prm.T0)) / (7.0 * prm.rho_a)


def theta_v_exact_single_mode(eigval1: float, prm: StringParams, k: float,
                              omega_target: float) -> float:
    """theta_v that places the first effective mode exactly at omega_target."""
    xi = math.sin(0.5 * k * omega_target) ** 2
    ea = prm.coupling + prm.T0
    s1 = k * k * eigval1 / (4.0 * prm.rho_a) * (ea / xi - prm.coupling)
    return 1.0 - 2.0 * (1.0 - s1) / (k * k * eigval1)


def _theta_v_error(theta_v, eigvals, prm, k, targets):
    try:
        omega = effective_longitudinal_eigenfrequencies(eigvals, prm, theta_v, k)
    except UnstableConfiguration:
        return math.inf
    return float(np.max(np.abs(omega - targets)))


def search_theta_v(prm: StringParams, k: float, eigvals: np.ndarray,
                   n_refine: int = 200) -> float:
    """Minimax fit of theta_v to the continuous longitudinal frequencies.

    Scans 1 - theta_v over several spans of its natural scale
    2(EA - T0)/(7 rho A), then golden-sections inside the best bracket.
    The error is max_m |omega_m - c_v m pi / L| over the supplied modes.
    """
    eigvals = np.asarray(eigvals, dtype=float)
    targets = exact_longitudinal_eigenfrequencies(prm, len(eigvals))
    scale = max(1.0 - theta_v_literal(prm), 1.0)
    taus = np.concatenate(([0.0], np.geomspace(scale * 1e-3, scale * 4.0,
                                               n_refine)))
    errs = np.array([_theta_v_error(1.0 - t, eigvals, prm, k, targets)
                     for t in taus])
    i = int(np.argmin(errs))
    if not math.isfinite(errs[i]):
        raise BracketFailure("no admissible theta_v in the scanned range")
    lo = taus[max(i - 1, 0)]
    hi = taus[min(i + 1, len(taus) - 1)]
    # golden-section refinement on tau = 1 - theta_v
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _theta_v_error(1.0 - c, eigvals, prm, k, targets)
    fd = _theta_v_error(1.0 - d, eigvals, prm, k, targets)
    for _ in range(200):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _theta_v_error(1.0 - c, eigvals, prm, k, targets)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _theta_v_error(1.0 - d, eigvals, prm, k, targets)
        if b - a <= 1e-12 * max(1.0, abs(b)):
            break
    tau = 0.5 * (a + b)
    return 1.0 - tau


def linear_energy_is_nonneg(prm: StringParams, h: float, k: float,
                            theta_u: float = 1.0) -> bool:
    """Eigenvalue test of the transverse one-step energy form.

    True iff every mode of the parameterised linear scheme maps inside
    the unit frequency circle, i.e. (k^2/4) max eig <= 1.
    """
    n = max(int(round(prm.L / h)), 3)
    ops = SpatialOperators.build(n, prm.L, 1)
    b = (-prm.T0 / prm.rho_a * ops.d2 + prm.ei / prm.rho_a * ops.d4).toarray()
    rmat = np.eye(n - 1) + (1.0 - theta_u) * ops.h ** 2 / 2.0 * ops.d2.toarray()
    lam = sla.eigh(b, rmat, eigvals_only=True)
    return bool(k * k / 4.0 * float(np.max(lam)) <= 1.0 + ARCSIN_TOL)


@dataclass
class DispersionReport:
    """Per-mode numeric vs exact frequencies for one scheme configuration."""

    mode: np.ndarray          # 1-based mode indices
    omega_numeric: np.ndarray  # rad/s
    omega_exact: np.ndarray    # rad/s
    rel_error: np.ndarray      # 1 - omega_numeric / omega_exact
    descriptor: dict
    nyquist_hz: float

    def rows(self):
        """(mode, numeric Hz, exact Hz, relative error) tuples for CSV."""
        two_pi = 2.0 * math.pi
        for i in range(len(self.mode)):
            yield (int(self.mode[i]), self.omega_numeric[i] / two_pi,
                   self.omega_exact[i] / two_pi, self.rel_error[i])


def transverse_dispersion_report(prm: StringParams, k: float, theta_u: float,
                                 h: float | None = None,
                                 in_band_only: bool = True) -> DispersionReport:
    """Numeric vs continuous transverse eigenfrequencies on a stable grid.

    When ``h`` is omitted the grid sits at the stability limit for the
    given theta_u (n = floor(L / h0), so h >= h0).
    """
    if h is None:
        h = stability_grid_spacing(prm, k, theta_u)
    n = int(math.floor(prm.L / h))
    ops = SpatialOperators.build(n, prm.L, 1)
    omega = numerical_eigenfrequencies_transverse(ops, prm, theta_u, k)
    exact = analytic_transverse_eigenfrequencies(prm, n - 1)
    nyq = math.pi / k
    keep = exact <= nyq if in_band_only else np.ones(n - 1, bool)
    mode = np.arange(1, n)[keep]
    rel = 1.0 - omega[keep] / exact[keep]
    return DispersionReport(mode=mode, omega_numeric=omega[keep],
                            omega_exact=exact[keep], rel_error=rel,
                            descriptor={"theta_u": theta_u, "h": ops.h,
                                        "k": k, "n": n},
                            nyquist_hz=0.5 / k)


def implicit_limit_spacing(prm: StringParams, k: float) -> float:
    """Stability limit of the comparison implicit scheme: plain CFL c_u k."""
    return prm.c_u * k


def implicit_scheme_eigenfrequencies(ops: SpatialOperators, prm: StringParams,
                                     k: float) -> np.ndarray:
    """Eigenfrequencies of the implicit comparison scheme, rad/s.

    The added mass (k^2 EI / 2) D4 keeps it stable under the plain CFL
    condition at the price of strong compression of the upper band.
    """
    d2 = ops.d2.toarray()
    d4 = ops.d4.toarray()
    b = -prm.T0 * d2 + prm.ei * d4
    mass = prm.rho_a * np.eye(ops.n - 1) + 0.5 * k * k * prm.ei * d4
    lam = np.sort(sla.eigh(b, mass, eigvals_only=True))
    return _freq_from_squared(lam, k)


def implicit_scheme_run(prm: StringParams, k: float, h: float,
                        u0: np.ndarray, n_steps: int):
    """Advance the implicit comparison scheme; returns the layer history.

    Pentadiagonal solve each step against the constant augmented mass
    matrix.  Raises when h violates the CFL bound.
    """
    if h < implicit_limit_spacing(prm, k) * (1.0 - 1e-12):
        raise UnstableConfiguration("grid below the CFL limit of the scheme")
    n = int(round(prm.L / h))
    ops = SpatialOperators.build(n, prm.L, 1)
    mass = (prm.rho_a * np.eye(n - 1) + 0.5 * k * k * prm.ei
            * ops.d4.toarray())
    # symmetric pentadiagonal; banded Cholesky with two superdiagonals
    ab = np.zeros((3, n - 1))
    for off in range(3):
        ab[2 - off, off:] = np.diagonal(mass, off)
    cb = sla.cholesky_banded(ab, lower=False)
    u_prev = np.asarray(u0, dtype=float)
    force = prm.T0 * (ops.d2 @ u_prev) - prm.ei * (ops.d4 @ u_prev)
    u_cur = u_prev + 0.5 * k * k * sla.cho_solve_banded((cb, False), force)
    history = [u_prev.copy(), u_cur.copy()]
    for _ in range(n_steps - 1):
        force = prm.T0 * (ops.d2 @ u_cur) - prm.ei * (ops.d4 @ u_cur)
        accel = sla.cho_solve_banded((cb, False), force)
        u_next = 2.0 * u_cur - u_prev + k * k * accel
        u_prev, u_cur = u_cur, u_next
        history.append(u_cur.copy())
    return ops, history


def implicit_scheme_energy(ops: SpatialOperators, prm: StringParams, k: float,
                           u_cur: np.ndarray, u_prev: np.ndarray) -> float:
    """Conserved interleaved energy of the implicit comparison scheme."""
    import math as _math
    h = ops.h
    du = (u_cur - u_prev) / k
    d2c = ops.apply_d2(u_cur)
    d2p = ops.apply_d2(u_prev)
    dmc = ops.apply_dminus(u_cur)
    dmp = ops.apply_dminus(u_prev)
    d2du = ops.apply_d2(du)
    e_k = 0.5 * prm.rho_a * h * _math.fsum((du * du).tolist()) \
        + 0.25 * prm.ei * k * k * h * _math.fsum((d2du * d2du).tolist())
    e_p = 0.5 * prm.T0 * h * _math.fsum((dmc * dmp).tolist()) \
        + 0.5 * prm.ei * h * _math.fsum((d2c * d2p).tolist())
    return e_k + e_p
