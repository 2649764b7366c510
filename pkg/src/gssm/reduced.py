"""Running and analyzing the reduced dynamics.

A ReducedField is the right-hand side of the reduced model in one of three
forms: a real polynomial series, rational maps (the globalized model), or a
polar amplitude/phase pair.  The analysis routines (backbone, forced
response, Poincare sections, Lyapunov exponent, PSD) operate on these
fields; everything returns plain arrays or TrajectoryData so the outputs
can be dumped to CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp
from scipy.signal import periodogram

from .errors import NumericalError, ValidationError
from .pade import RationalMap
from .series import MultiSeries, format_float
from .ssm import PolarNormalForm, SSMModel, realify_parametrization
from .trajectory import TrajectoryData

FIELD_KINDS = ("series", "rational", "polar")
DEFAULT_BLOWUP_FACTOR = 1e6
DEFAULT_POLE_EVENT_FLOOR = 1e-6


@dataclass
class Forcing:
    """Harmonic forcing eps * vector * cos(frequency t) in reduced coordinates.

    For polar fields the vector is ignored: the amplitude enters the standard
    rotating-frame equations for (rho, psi) with psi the phase lag.
    """

    amplitude: float
    frequency: float
    vector: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.frequency <= 0 and self.amplitude != 0:
            raise ValidationError("forcing frequency must be positive")
        if self.vector is not None:
            self.vector = np.asarray(self.vector, dtype=float).reshape(-1)


@dataclass
class ReducedField:
    kind: str
    dim: int
    series: Optional[MultiSeries] = None
    rationals: Optional[List[RationalMap]] = None
    polar: Optional[PolarNormalForm] = None
    forcing: Optional[Forcing] = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValidationError(f"kind must be one of {FIELD_KINDS}")
        if self.kind == "series":
            if self.series is None or self.series.dim_in != self.dim \
                    or self.series.dim_out != self.dim:
                raise ValidationError("series field must map dim -> dim")
        elif self.kind == "rational":
            if not self.rationals:
                raise ValidationError("rational field needs rational maps")
            total = sum(r.dim_out for r in self.rationals)
            if total != self.dim or any(r.dim_in != self.dim
                                        for r in self.rationals):
                raise ValidationError("rational maps must cover dim components")
        else:
            if self.polar is None or self.dim != 2:
                raise ValidationError("polar field is 2-dimensional (rho, psi)")
        if self.forcing is not None and self.kind != "polar":
            if self.forcing.vector is None or \
                    self.forcing.vector.shape != (self.dim,):
                raise ValidationError("forcing vector must have the field dim")

    @classmethod
    def from_series(cls, series: MultiSeries,
                    forcing: Optional[Forcing] = None) -> "ReducedField":
        return cls("series", series.dim_in, series=series, forcing=forcing)

    @classmethod
    def from_rationals(cls, rationals: Union[RationalMap, Sequence[RationalMap]],
                       forcing: Optional[Forcing] = None) -> "ReducedField":
        if isinstance(rationals, RationalMap):
            rationals = [rationals]
        rationals = list(rationals)
        dim = sum(r.dim_out for r in rationals)
        return cls("rational", dim, rationals=rationals, forcing=forcing)

    @classmethod
    def from_polar(cls, polar: PolarNormalForm,
                   forcing: Optional[Forcing] = None) -> "ReducedField":
        return cls("polar", 2, polar=polar, forcing=forcing)

    def autonomous_rhs(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "series":
            return self.series.evaluate(u).real
        if self.kind == "rational":
            out = []
            for r in self.rationals:
                den = r.denominator.evaluate(u)[0].real
                out.extend(r.numerator.evaluate(u).real / den)
            return np.asarray(out)
        rho = u[0]
        return np.array([self.polar.kappa_at(rho) * rho,
                         self.polar.omega_at(rho)])

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        out = self.autonomous_rhs(u)
        if self.forcing is None or self.forcing.amplitude == 0.0:
            return out
        eps, omega = self.forcing.amplitude, self.forcing.frequency
        if self.kind == "polar":
            # rotating frame: u = (rho, psi), psi = theta - omega t
            rho, psi = u
            out[0] += eps * math.sin(psi)
            out[1] += -omega + eps * math.cos(psi) / rho
            return out
        return out + eps * self.forcing.vector * math.cos(omega * t)

    def min_denominator(self, u: np.ndarray) -> float:
        if self.kind != "rational":
            return 1.0
        return min(abs(r.denominator.evaluate(u)[0].real)
                   for r in self.rationals)


def integrate_reduced(f: ReducedField, ic, t_span: Tuple[float, float],
                      rtol: float = 1e-9, atol: float = 1e-12,
                      n_out: int = 1001,
                      blowup_factor: float = DEFAULT_BLOWUP_FACTOR,
                      pole_floor: float = DEFAULT_POLE_EVENT_FLOOR
                      ) -> TrajectoryData:
    """Adaptive integration with blowup and pole-crossing termination.

    Finite-time blowup of truncated Taylor fields is expected behavior: the
    run stops at the threshold and the trajectory carries a flag instead of
    the solver erroring out.
    """
    ic = np.asarray(ic, dtype=float).reshape(-1)
    if ic.shape != (f.dim,):
        raise ValidationError(f"initial condition must have dim {f.dim}")
    if not np.all(np.isfinite(ic)):
        raise ValidationError("initial condition must be finite")
    bound = blowup_factor * max(1.0, float(np.linalg.norm(ic)))
    if f.kind == "rational" and f.min_denominator(ic) < pole_floor:
        raise ValidationError("initial condition is within the pole floor")

    def blowup_event(t, u):
        return np.linalg.norm(u) - bound
    blowup_event.terminal = True

    events = [blowup_event]
    if f.kind == "rational":
        def pole_event(t, u):
            return f.min_denominator(u) - pole_floor
        pole_event.terminal = True
        events.append(pole_event)

    t_eval = np.linspace(t_span[0], t_span[1], n_out)
    sol = solve_ivp(f.rhs, t_span, ic, method="RK45", rtol=rtol, atol=atol,
                    t_eval=t_eval, events=events, dense_output=False)
    flags: List[str] = []
    times, values = sol.t, sol.y.T
    if sol.status == 1:
        if len(sol.t_events[0]):
            t_stop = sol.t_events[0][0]
            flags.append(f"blowup at t={t_stop:.6g}: state norm exceeded "
                         f"{bound:.3g}")
            times = np.append(times, t_stop)
            values = np.vstack([values, sol.y_events[0][0]])
        elif len(sol.t_events) > 1 and len(sol.t_events[1]):
            t_stop = sol.t_events[1][0]
            u_stop = sol.y_events[1][0]
            flags.append(f"pole crossing at t={t_stop:.6g}, "
                         f"u={np.array2string(u_stop, precision=6)}")
            times = np.append(times, t_stop)
            values = np.vstack([values, u_stop])
    elif sol.status != 0:
        raise NumericalError(f"integration failed: {sol.message}")
    return TrajectoryData(times, values, flags)


def lift(chart, traj: TrajectoryData) -> TrajectoryData:
    """Map a reduced trajectory to ambient space through the parametrization.

    chart may be an SSMModel (realified automatically for oscillatory
    pairs), a real MultiSeries, or a RationalMap.  Pole-adjacent samples of
    a rational chart turn into NaN rows with a flag, so one bad sample does
    not discard the rest of the trajectory.
    """
    if isinstance(chart, SSMModel):
        if chart.d == 2 and chart.is_oscillatory_pair():
            w = realify_parametrization(chart)
        else:
            w = chart.W
        return lift(w, traj)
    flags = list(traj.flags)
    rows = np.zeros((traj.n_samples, chart.dim_out))
    if isinstance(chart, MultiSeries):
        vals = chart.evaluate_many(traj.values.astype(complex))
        rows = vals.real
    elif isinstance(chart, RationalMap):
        bad = 0
        for k in range(traj.n_samples):
            u = traj.values[k]
            den = chart.denominator.evaluate(u)[0].real
            if abs(den) < 1e-12:
                rows[k] = np.nan
                bad += 1
                continue
            rows[k] = chart.numerator.evaluate(u).real / den
        if bad:
            flags.append(f"{bad} samples within the pole floor lifted as NaN")
    else:
        raise ValidationError("chart must be SSMModel, MultiSeries, "
                              "or RationalMap")
    return TrajectoryData(traj.times, rows, flags)


# ---- backbone and forced response --------------------------------------------


def _curve_eval(rep, rho: float, component: str) -> float:
    if isinstance(rep, PolarNormalForm):
        return rep.omega_at(rho) if component == "omega" else rep.kappa_at(rho)
    if isinstance(rep, RationalMap):
        den = rep.denominator.evaluate([rho])[0].real
        return float(rep.numerator.evaluate([rho])[0].real / den)
    raise ValidationError("curve representation must be PolarNormalForm "
                          "or RationalMap")


def backbone(rep, rho_grid, component: str = "omega") -> np.ndarray:
    """Pairs (rho, omega(rho)) (or kappa) for a polar or rational model."""
    if component not in ("omega", "kappa"):
        raise ValidationError("component must be 'omega' or 'kappa'")
    grid = np.asarray(rho_grid, dtype=float).reshape(-1)
    if np.any(grid < 0):
        raise ValidationError("rho grid must be nonnegative")
    vals = np.array([_curve_eval(rep, r, component) for r in grid])
    return np.column_stack([grid, vals])


def _univariate_value_and_deriv(rep, rho: float,
                                component: str) -> Tuple[float, float]:
    if isinstance(rep, PolarNormalForm):
        if component == "omega":
            return rep.omega_at(rho), rep.omega_prime_at(rho)
        return rep.kappa_at(rho), rep.kappa_prime_at(rho)
    a = rep.numerator.univariate_coeffs().real
    b = rep.denominator.univariate_coeffs().real
    n, d = npoly.polyval(rho, a), npoly.polyval(rho, b)
    np_, dp = npoly.polyval(rho, npoly.polyder(a)), \
        npoly.polyval(rho, npoly.polyder(b))
    return n / d, (np_ * d - n * dp) / d ** 2


@dataclass
class FRCPoint:
    rho: float
    Omega: float
    amplitude: float
    stable: bool
    residual: float


@dataclass
class FRCBranch:
    eps_f: float
    points: List[FRCPoint] = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        return np.array([[p.rho, p.Omega, p.amplitude, float(p.stable)]
                         for p in self.points]).reshape(-1, 4)


def forced_response(kappa_rep, omega_rep, eps_f: float, rho_grid,
                    amplitude_fn: Optional[Callable[[float], float]] = None
                    ) -> FRCBranch:
    """Both frequency branches of the steady-state response at each rho.

    Solves (Omega - omega(rho))^2 = (eps_f/rho)^2 - kappa(rho)^2 in closed
    form; grid points with a negative right side are simply infeasible and
    produce no output.  Stability comes from the 2x2 Jacobian of the
    (rho, psi) system at the fixed point.
    """
    if eps_f <= 0:
        raise ValidationError("eps_f must be positive")
    branch = FRCBranch(eps_f)
    for rho in np.asarray(rho_grid, dtype=float).reshape(-1):
        if rho <= 0:
            raise ValidationError("rho grid must be positive")
        k, kp = _univariate_value_and_deriv(kappa_rep, rho, "kappa")
        w, wp = _univariate_value_and_deriv(omega_rep, rho, "omega")
        disc = (eps_f / rho) ** 2 - k ** 2
        if disc < 0:
            continue
        s = math.sqrt(disc)
        amp = amplitude_fn(rho) if amplitude_fn is not None else rho
        for sign in (1.0, -1.0):
            omega_resp = w + sign * s
            j11 = kp * rho + k
            j12 = sign * s * rho
            j21 = wp - sign * s / rho
            j22 = k
            stable = (j11 + j22) < 0 and (j11 * j22 - j12 * j21) > 0
            residual = (omega_resp - w) ** 2 - (eps_f / rho) ** 2 + k ** 2
            branch.points.append(FRCPoint(rho, omega_resp, amp, stable,
                                          residual))
            if s == 0.0:
                break
    return branch


def forcing_projection(model: SSMModel, forcing_vector, eps: float) -> float:
    """Modal forcing amplitude eps_f from the ambient forcing direction.

    The ambient forcing eps * v * cos(Omega t) projects onto the master mode
    through the left eigenvector; the rotating resonant half carries the
    factor 1/2.  The value is gauge-dependent and consistent with this
    module's unit-norm eigenvector convention.
    """
    if model.master_left is None:
        raise ValidationError("model carries no left eigenvectors")
    v = np.asarray(forcing_vector, dtype=complex).reshape(-1)
    if v.shape != (model.n,):
        raise ValidationError("forcing vector must have the ambient dim")
    return float(eps * abs(np.dot(model.master_left[0], v)) / 2.0)


def backbone_to_csv(curve: np.ndarray, path: str,
                    component: str = "omega") -> None:
    with open(path, "w") as fh:
        fh.write(f"rho,{component}\n")
        for rho, val in curve:
            fh.write(f"{format_float(rho)},{format_float(val)}\n")


def frc_to_csv(branch: FRCBranch, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("rho,Omega,amp,stable\n")
        for p in branch.points:
            fh.write(f"{format_float(p.rho)},{format_float(p.Omega)},"
                     f"{format_float(p.amplitude)},{int(p.stable)}\n")


# ---- stroboscopic sampling, Lyapunov exponent, PSD ---------------------------


def poincare_sample(f: ReducedField, ic, n_periods: int,
                    skip: int = 20, omega: Optional[float] = None,
                    rtol: float = 1e-9, atol: float = 1e-12) -> TrajectoryData:
    """States at multiples of the driving period, after a transient skip."""
    if omega is None:
        if f.forcing is None:
            raise ValidationError("no forcing frequency to sample at; "
                                  "pass omega explicitly")
        omega = f.forcing.frequency
    if omega <= 0 or n_periods < 1:
        raise ValidationError("need omega > 0 and n_periods >= 1")
    period = 2.0 * math.pi / omega
    ic = np.asarray(ic, dtype=float).reshape(-1)
    bound = DEFAULT_BLOWUP_FACTOR * max(1.0, float(np.linalg.norm(ic)))

    def blowup_event(t, u):
        return np.linalg.norm(u) - bound
    blowup_event.terminal = True

    t_end = (skip + n_periods) * period
    sol = solve_ivp(f.rhs, (0.0, t_end), ic, method="RK45", rtol=rtol,
                    atol=atol, dense_output=True, events=[blowup_event])
    flags: List[str] = []
    reached = sol.t[-1]
    if sol.status == 1:
        flags.append(f"blowup at t={reached:.6g}; samples truncated")
    elif sol.status != 0:
        raise NumericalError(f"integration failed: {sol.message}")
    stamps = np.array([(skip + j) * period for j in range(1, n_periods + 1)])
    stamps = stamps[stamps <= reached + 1e-12]
    if len(stamps) == 0:
        raise NumericalError("trajectory ended before the first section")
    return TrajectoryData(stamps, sol.sol(stamps).T, flags)


@dataclass
class LyapunovEstimate:
    value: float
    fit_error: float
    log_growth: np.ndarray
    times: np.ndarray
    flags: List[str] = field(default_factory=list)


def lyapunov_estimate(f: ReducedField, ic, perturbation_size: float = 1e-7,
                      horizon: float = 200.0, renorm_interval: float = 1.0,
                      transient: float = 50.0, rtol: float = 1e-9,
                      atol: float = 1e-12) -> LyapunovEstimate:
    """Largest Lyapunov exponent by two-trajectory renormalization.

    The cumulative log separation is fitted against time by least squares;
    renormalization after every interval keeps the pair inside the linear
    regime.  If the very first interval already saturates (separation
    comparable to the state scale) the estimate is flagged as unreliable.
    """
    if perturbation_size <= 0:
        raise ValidationError("perturbation_size must be positive")
    ic = np.asarray(ic, dtype=float).reshape(-1)
    if transient > 0:
        warm = solve_ivp(f.rhs, (0.0, transient), ic, method="RK45",
                         rtol=rtol, atol=atol)
        if warm.status != 0:
            raise NumericalError(f"transient integration failed: {warm.message}")
        u = warm.y[:, -1]
        t0 = transient
    else:
        u, t0 = ic.copy(), 0.0
    direction = np.ones_like(u) / math.sqrt(len(u))
    v = u + perturbation_size * direction

    n_steps = int(round(horizon / renorm_interval))
    times = np.zeros(n_steps)
    log_growth = np.zeros(n_steps)
    total = 0.0
    flags: List[str] = []
    for k in range(n_steps):
        t1 = t0 + renorm_interval
        pair = np.concatenate([u, v])

        def pair_rhs(t, z):
            return np.concatenate([f.rhs(t, z[:len(u)]), f.rhs(t, z[len(u):])])

        sol = solve_ivp(pair_rhs, (t0, t1), pair, method="RK45",
                        rtol=rtol, atol=atol)
        if sol.status != 0:
            raise NumericalError(f"integration failed: {sol.message}")
        z = sol.y[:, -1]
        u, v = z[:len(u)], z[len(u):]
        dist = np.linalg.norm(v - u)
        if dist == 0.0:
            raise NumericalError("trajectories collapsed to machine identity")
        scale = max(np.linalg.norm(u), 1.0)
        if k == 0 and dist > 0.1 * scale:
            flags.append("separation saturated within one interval; "
                         "shorten renorm_interval or the horizon")
        total += math.log(dist / perturbation_size)
        times[k] = t1 - transient
        log_growth[k] = total
        v = u + (v - u) * (perturbation_size / dist)
        t0 = t1

    if n_steps >= 3:
        coeffs, diag = np.polyfit(times, log_growth, 1, cov=True)
        slope = float(coeffs[0])
        fit_error = float(math.sqrt(max(diag[0, 0], 0.0)))
    else:
        slope = float(log_growth[-1] / times[-1])
        fit_error = float("nan")
        flags.append("too few intervals for a fit-error estimate")
    return LyapunovEstimate(slope, fit_error, log_growth, times, flags)


def psd_estimate(traj: TrajectoryData, component: int = 0
                 ) -> Tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram of a component, mean removed."""
    dt = traj.uniform_dt()
    x = traj.component(component)
    x = x - np.mean(x)
    freq, power = periodogram(x, fs=1.0 / dt)
    return freq, power


def double_well_field(damping: float = 0.3, amplitude: float = 0.5,
                      frequency: float = 1.2) -> ReducedField:
    """Forced double-well (Duffing) field, chaotic at the default values.

    x' = v, v' = x - x^3 - damping v + amplitude cos(frequency t).
    """
    g = MultiSeries(2, 2, 3, {
        (0, 1): [1.0, -damping],
        (1, 0): [0.0, 1.0],
        (3, 0): [0.0, -1.0],
    })
    forcing = Forcing(amplitude, frequency, np.array([0.0, 1.0]))
    return ReducedField.from_series(g, forcing=forcing)
