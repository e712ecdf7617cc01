"""Physical parameters, source description and run configuration.

All quantities are SI internally.  Configuration files may use mm/ms for
the fields that are customarily quoted that way; the parser converts at
read time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import InadmissibleParams, ParameterOutOfRange


@dataclass(frozen=True)
class StringParams:
    """Physical and geometric constants of a uniform circular string.

    Derived fields (area, inertia, wave speeds, coupling) are filled in by
    :func:`validate_and_derive`; do not construct instances directly unless
    you supply consistent values.
    """

    rho: float            # volume density, kg/m^3
    E: float              # Young's modulus, Pa
    T0: float             # applied tension, N
    L: float              # speaking length, m
    r: float              # cross-section radius, m
    sigma0_u: float = 0.0  # frequency-independent transverse loss rate, 1/s
    sigma0_v: float = 0.0  # frequency-independent longitudinal loss rate, 1/s
    sigma1_u: float = 0.0  # frequency-dependent transverse loss, m^2/s
    # derived
    area: float = 0.0      # cross-section area pi r^2, m^2
    inertia: float = 0.0   # area moment of inertia pi r^4 / 4, m^4
    c_u: float = 0.0       # transverse wave speed sqrt(T0 / rho A), m/s
    c_v: float = 0.0       # longitudinal wave speed sqrt(E / rho), m/s
    coupling: float = 0.0  # EA - T0, strength of the nonlinear potential, N

    @property
    def rho_a(self) -> float:
        """Linear mass density rho*A, kg/m."""
        return self.rho * self.area

    @property
    def ei(self) -> float:
        """Bending stiffness E*I, N m^2."""
        return self.E * self.inertia

    def without_stiffness(self) -> "StringParams":
        """Copy with the bending term removed (inertia = 0)."""
        return replace(self, inertia=0.0)

    def with_zero_coupling(self) -> "StringParams":
        """Copy with the nonlinear potential switched off (EA - T0 -> 0).

        Used to run the scheme as a pure linear stiff string while keeping
        the physical bending stiffness; the auxiliary state then vanishes
        identically.
        """
        return replace(self, coupling=0.0)

    def without_losses(self) -> "StringParams":
        return replace(self, sigma0_u=0.0, sigma0_v=0.0, sigma1_u=0.0)


def validate_and_derive(rho: float, E: float, T0: float, L: float, r: float,
                        sigma0_u: float = 0.0, sigma0_v: float = 0.0,
                        sigma1_u: float = 0.0) -> StringParams:
    """Check admissibility and fill in the derived constants.

    Raises :class:`InadmissibleParams` when a physical constant is
    nonpositive, a loss rate is negative, or EA < T0 (the nonlinear
    potential would be sign-indefinite).
    """
    for name, val in (("rho", rho), ("E", E), ("T0", T0), ("L", L), ("r", r)):
        if not (val > 0.0) or not math.isfinite(val):
            raise InadmissibleParams(f"{name} must be positive and finite, got {val!r}")
    for name, val in (("sigma0_u", sigma0_u), ("sigma0_v", sigma0_v),
                      ("sigma1_u", sigma1_u)):
        if val < 0.0 or not math.isfinite(val):
            raise InadmissibleParams(f"{name} must be nonnegative, got {val!r}")

    area = math.pi * r * r
    inertia = math.pi * r ** 4 / 4.0
    coupling = E * area - T0
    if coupling < 0.0:
        raise InadmissibleParams(
            f"EA = {E * area:.6g} N is below the tension T0 = {T0:.6g} N")
    c_u = math.sqrt(T0 / (rho * area))
    c_v = math.sqrt(E / rho)
    if coupling > T0 * 1e-9 and not c_v > c_u:
        # EA > T0 implies E/rho > T0/(rho A); a violation means broken arithmetic
        raise InadmissibleParams("wave-speed ordering c_v > c_u violated")
    return StringParams(rho=rho, E=E, T0=T0, L=L, r=r,
                        sigma0_u=sigma0_u, sigma0_v=sigma0_v, sigma1_u=sigma1_u,
                        area=area, inertia=inertia, c_u=c_u, c_v=c_v,
                        coupling=coupling)


@dataclass(frozen=True)
class SourceParams:
    """Pluck/strike excitation: a raised-cosine force pulse at one point."""

    peak_force: float      # F_s, N
    onset: float           # t0, s
    duration: float        # contact time t_s, s
    kind: int = 2          # 1 = pluck (half raised cosine), 2 = strike
    position: float = 0.5  # contact abscissa x_f, m

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ParameterOutOfRange("source duration must be positive")
        if self.peak_force < 0.0:
            raise ParameterOutOfRange("peak force must be nonnegative")
        if self.kind not in (1, 2):
            raise ParameterOutOfRange("source kind must be 1 (pluck) or 2 (strike)")

    def validate_against(self, prm: StringParams) -> None:
        if not (0.0 < self.position < prm.L):
            raise ParameterOutOfRange(
                f"contact point {self.position} must lie strictly inside (0, {prm.L})")


@dataclass(frozen=True)
class InitialCondition:
    """Initial displacement shape for one polarisation."""

    kind: str = "zero"       # zero | raised_cosine | gaussian
    amplitude: float = 0.0   # peak displacement, m
    width: float = 0.1       # half-width (raised cosine) or std, as fraction of L
    center: float | None = None  # metres; defaults to L/2

    def __post_init__(self):
        if self.kind not in ("zero", "raised_cosine", "gaussian"):
            raise ParameterOutOfRange(f"unknown initial-condition kind {self.kind!r}")
        if self.kind != "zero" and self.width <= 0.0:
            raise ParameterOutOfRange("initial-condition width must be positive")


#: sentinel for "resolve this scheme parameter automatically"
AUTO = "auto"


@dataclass(frozen=True)
class SimConfig:
    """Resolution-independent description of a single run."""

    base_rate: float = 48e3          # base sample rate f_s0, Hz
    oversampling: int = 1
    h_safety: float = 1.05           # grid spacing = h_safety * stability limit
    theta_u: float | str = 1.0       # free parameter of the transverse mass operator
    theta_v: float | str = 1.0       # free parameter of the longitudinal mass operator
    stiffness_on: bool = True
    losses_on: bool = True
    duration: float = 1.0            # simulated time, s
    tap: float = 0.32                # output abscissa x_o, m
    ic_u: InitialCondition = field(default_factory=InitialCondition)
    ic_v: InitialCondition = field(default_factory=InitialCondition)
    n_modes_rule: str = "cfl"        # cfl: longitudinal CFL bound; energy: nonnegativity bound
    lambda_variant: str = "discrete"  # discrete | continuous modal eigenvalues
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if self.oversampling < 1 or int(self.oversampling) != self.oversampling:
            raise ParameterOutOfRange("oversampling must be a positive integer")
        if self.base_rate <= 0.0:
            raise ParameterOutOfRange("base sample rate must be positive")
        if self.h_safety < 1.0:
            raise ParameterOutOfRange("h_safety below 1 violates the stability margin")
        if isinstance(self.theta_u, str) and self.theta_u != AUTO:
            raise ParameterOutOfRange(f"theta_u must be a number or {AUTO!r}")
        if isinstance(self.theta_v, str) and self.theta_v != AUTO:
            raise ParameterOutOfRange(f"theta_v must be a number or {AUTO!r}")
        if not isinstance(self.theta_u, str) and not self.theta_u > 0.5:
            raise ParameterOutOfRange("theta_u must exceed 1/2")
        if self.n_modes_rule not in ("cfl", "energy"):
            raise ParameterOutOfRange("n_modes_rule must be 'cfl' or 'energy'")
        if self.lambda_variant not in ("discrete", "continuous"):
            raise ParameterOutOfRange("lambda_variant must be 'discrete' or 'continuous'")

    @property
    def sample_rate(self) -> float:
        return self.base_rate * self.oversampling

    @property
    def dt(self) -> float:
        """Time step k = 1 / (oversampling * f_s0)."""
        return 1.0 / self.sample_rate
