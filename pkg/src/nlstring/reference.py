"""Analytic references and convergence studies used for validation.

Contents: Jacobi elliptic cn via the arithmetic-geometric mean, the
cubic-oscillator analytic solution and its quadratised integrator, the
truncated modal solution of the linear stiff string with closed-form
coefficients, and the space-time convergence harness that walks the
stability-limit path in the (h, k) plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OddN, ParameterOutOfRange
from .operators import SpatialOperators
from .params import StringParams
from .stepper import Simulation, read_output

_AGM_ITERS = 32


def _agm_scale(b: float):
    """Descending Landen tables a_n, c_n for parameter b = m."""
    a = [1.0]
    c = [math.sqrt(b)]
    bb = math.sqrt(1.0 - b)
    aa = 1.0
    n = 0
    while c[-1] > 1e-17 * a[-1] and n < _AGM_ITERS:
        aa, bb, cn = 0.5 * (aa + bb), math.sqrt(aa * bb), 0.5 * (aa - bb)
        a.append(aa)
        c.append(cn)
        n += 1
    return a, c


def jacobi_cn(a: float, b: float) -> float:
    """cn(a; b) with parameter convention b = m in [0, 1).

    Arithmetic-geometric mean with the descending amplitude recursion;
    absolute accuracy around 1e-13 for moderate arguments.
    """
    if not (0.0 <= b < 1.0):
        raise ParameterOutOfRange(f"elliptic parameter must lie in [0, 1), got {b}")
    if b == 0.0:
        return math.cos(a)
    an, cn = _agm_scale(b)
    n = len(an) - 1
    phi = 2.0 ** n * an[n] * a
    for i in range(n, 0, -1):
        arg = cn[i] * math.sin(phi) / an[i]
        phi = 0.5 * (phi + math.asin(max(-1.0, min(1.0, arg))))
    return math.cos(phi)


def elliptic_K(b: float) -> float:
    """Complete elliptic integral of the first kind, parameter b = m."""
    if not (0.0 <= b < 1.0):
        raise ParameterOutOfRange(f"elliptic parameter must lie in [0, 1), got {b}")
    an, _ = _agm_scale(b)
    return math.pi / (2.0 * an[-1])


def duffing_analytic(t: float, u0: float, gamma: float) -> float:
    """Exact solution of u'' = -u - gamma u^3 with u(0) = u0, u'(0) = 0."""
    if gamma < 0.0:
        raise ParameterOutOfRange("gamma must be nonnegative")
    if gamma == 0.0:
        return u0 * math.cos(t)
    m = gamma * u0 ** 2 / (2.0 * gamma * u0 ** 2 + 2.0)
    return u0 * jacobi_cn(math.sqrt(1.0 + gamma * u0 ** 2) * t, m)


def duffing_ieq_run(u0: float, gamma: float, k: float, t_end: float):
    """Quadratised one-solve-per-step integrator for the cubic oscillator.

    Returns (u, psi) series with u[n] at t = n k and psi[n] at
    t = (n + 1/2) k.  Scalar analogue of the string scheme: same
    trapezoidal auxiliary update, same linearly-implicit structure.
    """
    n_steps = int(round(t_end / k))
    # extended precision keeps the conserved energy at 1e-12 over very
    # long runs; the scheme itself is unchanged
    ld = np.longdouble
    u = np.empty(n_steps + 1, dtype=ld)
    psi = np.empty(n_steps + 1, dtype=ld)
    u0 = ld(u0)
    gamma_l = ld(gamma)
    k_l = ld(k)
    u[0] = u0
    u[1] = u0 - ld(0.5) * k_l * k_l * (u0 + gamma_l * u0 ** 3)
    psi[0] = np.sqrt(gamma_l / ld(2)) * u0 ** 2
    root_2g = np.sqrt(ld(2) * gamma_l)
    inv_k2 = ld(1) / (k_l * k_l)
    half = ld(0.5)
    quarter = ld(0.25)
    two = ld(2)
    for n in range(1, n_steps):
        g = root_2g * u[n]
        psi_pred = psi[n - 1] + half * g * (u[n] - u[n - 1])
        w = (-u[n] - g * psi_pred) / (inv_k2 + quarter * g * g)
        u[n + 1] = (two * u[n] - u[n - 1]) + w
        psi[n] = psi[n - 1] + half * g * (u[n + 1] - u[n - 1])
    psi[n_steps] = psi[n_steps - 1]
    return u, psi


def duffing_energy(u: np.ndarray, psi: np.ndarray, k: float) -> np.ndarray:
    """Conserved quadratic energy series of the scalar integrator."""
    du = (u[1:] - u[:-1]) / k
    return 0.5 * du * du + 0.5 * u[1:] * u[:-1] + 0.5 * psi[:-1] ** 2


def modal_coefficients(n_modes: int) -> np.ndarray:
    """Closed-form sine coefficients of the centred raised-cosine datum.

    The datum is 1 + cos(4 pi x / L) on [L/4, 3L/4] and zero outside;
    coefficients are integrals of (1 + cos 4 pi xi) sin(m pi xi) over
    xi in [1/4, 3/4], zero for even m.
    """
    return _modal_coeff_range(np.arange(1, n_modes + 1, dtype=float))


def appendix_raised_cosine(x: np.ndarray, L: float) -> np.ndarray:
    """The convergence-study datum sampled at abscissae x."""
    out = 1.0 - np.cos(2.0 * np.pi * (x - L / 4.0) / (L / 2.0))
    return np.where((x >= L / 4.0) & (x <= 3.0 * L / 4.0), out, 0.0)


def linear_modal_solution(prm: StringParams, x: float, t: float,
                          n_modes: int) -> float:
    """Truncated modal solution of the linear stiff string, raised-cosine datum.

    Accumulated in chunks with compensated final summation so the
    million-mode reference stays cheap and well below scheme error.
    """
    total_parts = []
    chunk = 200_000
    for start in range(1, n_modes + 1, chunk):
        m = np.arange(start, min(start + chunk, n_modes + 1), dtype=float)
        c = _modal_coeff_range(m)
        gamma2 = (m * np.pi / prm.L) ** 2
        omega = np.sqrt(prm.T0 / prm.rho_a * gamma2
                        + prm.ei / prm.rho_a * gamma2 ** 2)
        terms = 2.0 * c * np.cos(omega * t) * np.sin(m * np.pi * x / prm.L)
        total_parts.extend(terms.tolist())
    return math.fsum(total_parts)


def _modal_coeff_range(m: np.ndarray) -> np.ndarray:
    def bracket(mm):
        # primitive of sin(mm pi xi) evaluated over [1/4, 3/4], times mm pi
        return np.cos(mm * np.pi / 4.0) - np.cos(3.0 * mm * np.pi / 4.0)

    c = bracket(m) / (np.pi * m)
    with np.errstate(divide="ignore", invalid="ignore"):
        term_p = bracket(m + 4.0) / (np.pi * (m + 4.0))
        term_m = np.where(m == 4.0, 0.0, bracket(m - 4.0) / (np.pi * (m - 4.0)))
    c += 0.5 * (term_p + term_m)
    return c


def fit_loglog_slope(abscissae, values, n_points: int = 4,
                     floor: float = 1e-12) -> float:
    """Least-squares slope of log|value| vs log(abscissa), finest points.

    Points whose magnitude sits at or below ``floor`` are treated as
    rounding noise and excluded before taking the finest ``n_points``.
    """
    a = np.asarray(abscissae, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    keep = v > floor
    a, v = a[keep], v[keep]
    order = np.argsort(a)
    a, v = a[order][:n_points], v[order][:n_points]
    if len(a) < 2:
        raise ParameterOutOfRange("not enough points above the noise floor")
    return float(np.polyfit(np.log(a), np.log(v), 1)[0])


@dataclass
class ConvergenceResult:
    """Errors along the stability-limit path plus fitted slopes."""

    h: np.ndarray
    k: np.ndarray
    s: np.ndarray           # arclength of the (h, k) path
    q: np.ndarray           # pointwise solution error at (x_e, t_e)
    slope_h: float
    slope_k: float
    slope_s: float


def arclength(prm: StringParams, h: np.ndarray, theta_u: float) -> np.ndarray:
    """Arclength parameter of the stability-limit curve, h + O(h^3)."""
    h = np.asarray(h, dtype=float)
    if prm.ei == 0.0:
        return h * math.sqrt(1.0 + prm.rho_a * (2.0 * theta_u - 1.0) / prm.T0)
    return h + prm.rho_a * (2.0 * theta_u - 1.0) / (6.0 * prm.ei) * h ** 3


def theta_scheme_convergence(prm: StringParams, theta_u: float,
                             n_list, n_modes_ref: int = 1_000_000,
                             t_end: float = 1e-3) -> ConvergenceResult:
    """Pointwise error of the linear theta scheme along the stability path.

    For each even n: h = L/n, k at the stability limit, second-order
    starts from the raised-cosine datum, error against the modal
    reference at x = L/2 and t = round(t_end/k) k.  The run uses the
    production stepper with the nonlinear coupling zeroed, so this also
    exercises the linear-reduction path.
    """
    from .dispersion import limit_time_step

    lin = prm.with_zero_coupling().without_losses()
    hs, ks, qs = [], [], []
    for n in n_list:
        if n % 2 != 0:
            raise OddN(f"n must be even, got {n}")
        h = prm.L / n
        k = limit_time_step(prm, h, theta_u)
        ops = SpatialOperators.build(n, prm.L, 1)
        u0 = appendix_raised_cosine(ops.interior_x, prm.L)
        sim = Simulation(lin, ops, k, theta_u=theta_u, losses_on=False)
        state = sim.initial_state(u0=u0)
        n_steps = int(round(t_end / k))
        t_e = n_steps * k
        for _ in range(n_steps - 1):
            state = sim.step_once(state)
        ref = linear_modal_solution(prm, prm.L / 2.0, t_e, n_modes_ref)
        num = read_output(state.u_cur, prm.L / 2.0, ops.h)
        hs.append(h)
        ks.append(k)
        qs.append(ref - num)
    hs = np.array(hs)
    ks = np.array(ks)
    qs = np.array(qs)
    ss = arclength(prm, hs, theta_u)
    return ConvergenceResult(
        h=hs, k=ks, s=ss, q=qs,
        slope_h=fit_loglog_slope(hs, qs),
        slope_k=fit_loglog_slope(ks, qs),
        slope_s=fit_loglog_slope(ss, qs))


def eigenfrequency_convergence(prm: StringParams, theta_u: float, n_list,
                               n_track: int = 4):
    """Relative eigenfrequency errors of the first few modes along the path.

    Returns (s values, error array of shape (len(n_list), n_track)).
    Frequencies come from the dispersion symbol at the Dirichlet
    wavenumbers, which equals the matrix eigendecomposition (a separately
    tested identity) without its rounding floor on very fine grids.
    """
    from .dispersion import (analytic_transverse_eigenfrequencies,
                             limit_time_step, transverse_dispersion_symbol)

    gamma = np.arange(1, n_track + 1) * np.pi / prm.L
    exact = analytic_transverse_eigenfrequencies(prm, n_track)
    errs = np.empty((len(n_list), n_track))
    hs = np.empty(len(n_list))
    for i, n in enumerate(n_list):
        h = prm.L / n
        k = limit_time_step(prm, h, theta_u)
        omega = transverse_dispersion_symbol(prm, h, k, theta_u, gamma)
        errs[i] = np.abs(1.0 - omega / exact)
        hs[i] = h
    return arclength(prm, hs, theta_u), errs
