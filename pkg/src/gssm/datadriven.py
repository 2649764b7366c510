"""Data-driven reduced models from scalar time series.

The pipeline is delay embedding -> PCA tangent chart -> finite-difference
derivative targets -> regression of the reduced vector field, either as
polynomials or as rationals with a shared, positivity-constrained
denominator. The positivity constraint is what keeps fitted denominators
from sneaking a zero into the training region.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.signal import savgol_filter

from .errors import NumericalError, ValidationError
from .pade import RationalMap
from .reduced import ReducedField, integrate_reduced
from .series import MultiSeries, format_float, indices_up_to_order
from .trajectory import TrajectoryData

ORTHONORMAL_TOL = 1e-10
DEFAULT_MARGIN = 1e-3
CONSTRAINT_SLACK = 1e-9
HUGE_OBJECTIVE = 1e50


@dataclass
class EmbeddingConfig:
    """Sliding-window delay map y(t) -> (y(t), y(t-lag*dt), ...)."""

    delays: int
    lag: int = 1
    observable: int = 0

    def __post_init__(self):
        if int(self.delays) != self.delays or self.delays < 1:
            raise ValidationError("delays must be a positive integer")
        if int(self.lag) != self.lag or self.lag < 1:
            raise ValidationError("lag must be a positive integer")
        self.delays = int(self.delays)
        self.lag = int(self.lag)

    def window_length(self) -> int:
        return (self.delays - 1) * self.lag + 1

    def check_for_dimension(self, d: int) -> None:
        """Embedding-theorem margin: more than twice the manifold dimension."""
        if self.delays <= 2 * d:
            raise ValidationError(
                f"{self.delays} delays cannot chart a {d}-dimensional "
                f"manifold reliably; need more than {2 * d}")


def delay_embed(series: TrajectoryData, cfg: EmbeddingConfig) -> TrajectoryData:
    series.uniform_dt()
    y = np.asarray(series.values[:, cfg.observable], dtype=float)
    need = cfg.window_length()
    if series.n_samples < need:
        raise ValidationError(
            f"series of length {series.n_samples} is too short to embed "
            f"with {cfg.delays} delays at lag {cfg.lag}; need {need}")
    start = (cfg.delays - 1) * cfg.lag
    cols = [y[start - j * cfg.lag: len(y) - j * cfg.lag]
            for j in range(cfg.delays)]
    return TrajectoryData(series.times[start:], np.column_stack(cols))


@dataclass
class ChartProjection:
    """Orthonormal basis of the tangent space plus the chart origin."""

    basis: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        if self.basis.ndim != 2:
            raise ValidationError("basis must be a q x d matrix")
        q, d = self.basis.shape
        if self.center.shape != (q,):
            raise ValidationError("center length must match the basis rows")
        gram = self.basis.T @ self.basis
        if np.max(np.abs(gram - np.eye(d))) > ORTHONORMAL_TOL:
            raise ValidationError("basis columns are not orthonormal")

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def reduced_dim(self) -> int:
        return self.basis.shape[1]

    def project(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return (pts - self.center) @ self.basis

    def reconstruct(self, reduced) -> np.ndarray:
        eta = np.asarray(reduced, dtype=float)
        return eta @ self.basis.T + self.center


def tangent_space_pca(embedded, d: int,
                      center: Optional[np.ndarray] = None,
                      late_fraction: float = 0.1) -> ChartProjection:
    """Top-d principal directions of the centered embedded samples.

    The center defaults to the mean of the late-time samples of each
    trajectory, which is where trajectories have settled near the anchor
    fixed point.
    """
    if isinstance(embedded, (TrajectoryData, np.ndarray)):
        embedded = [embedded]
    blocks = [t.values if isinstance(t, TrajectoryData) else
              np.asarray(t, dtype=float) for t in embedded]
    q = blocks[0].shape[1]
    if any(b.shape[1] != q for b in blocks):
        raise ValidationError("embedded trajectories have mixed dimensions")
    if d < 1 or d > q:
        raise ValidationError(f"cannot extract {d} directions from {q} dims")
    if center is None:
        tails = [b[-max(1, int(round(late_fraction * len(b)))):]
                 for b in blocks]
        center = np.mean(np.vstack(tails), axis=0)
    center = np.asarray(center, dtype=float)
    X = np.vstack(blocks) - center
    _, svals, vt = np.linalg.svd(X, full_matrices=False)
    tol = max(X.shape) * np.finfo(float).eps * svals[0]
    if len(svals) < d or svals[d - 1] <= tol:
        raise NumericalError(
            f"sample matrix rank is below {d}; the data does not span "
            "the requested tangent space")
    basis = vt[:d].T.copy()
    for j in range(d):
        k = int(np.argmax(np.abs(basis[:, j])))
        if basis[k, j] < 0:
            basis[:, j] = -basis[:, j]
    return ChartProjection(basis, center)


def estimate_derivatives(traj: TrajectoryData,
                         smooth_window: Optional[int] = None,
                         smooth_order: int = 3) -> TrajectoryData:
    """Fourth-order finite-difference time derivatives of each component."""
    dt = traj.uniform_dt()
    if traj.n_samples < 5:
        raise ValidationError("need at least 5 samples for the stencil")
    vals = np.asarray(traj.values, dtype=float)
    if smooth_window is not None:
        vals = savgol_filter(vals, smooth_window, smooth_order, axis=0)
    f = vals
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * dt)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2]
            + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dt)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2]
            - 6.0 * f[3] + f[4]) / (12.0 * dt)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3]
             + 6.0 * f[-4] - f[-5]) / (12.0 * dt)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3]
             - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * dt)
    return TrajectoryData(traj.times, d)


@dataclass
class RegressionProblem:
    """Samples (eta_i, zeta_i) and the rational orders to fit."""

    inputs: np.ndarray
    targets: np.ndarray
    numerator_order: int
    denominator_order: int
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValidationError("inputs and targets disagree on the "
                                  "number of samples")
        if self.numerator_order < 0 or self.denominator_order < 0:
            raise ValidationError("orders must be nonnegative")
        if not self.margin > 0:
            raise ValidationError("positivity margin must be positive")
        if self.inputs.shape[0] < self.n_parameters:
            raise ValidationError(
                f"{self.inputs.shape[0]} samples cannot determine "
                f"{self.n_parameters} coefficients")

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    @property
    def n_parameters(self) -> int:
        p = len(indices_up_to_order(self.dim, self.numerator_order))
        q = len(indices_up_to_order(self.dim, self.denominator_order))
        return self.n_outputs * p + q - 1


@dataclass
class RationalFit:
    rational: RationalMap
    error: float
    stage1_error: float
    n_parameters: int
    active_constraints: int
    min_denominator: float
    flags: List[str] = field(default_factory=list)
    restart_den_ranges: List[tuple] = field(default_factory=list)

    def summary(self) -> str:
        n_const = self.rational.numerator.dim_out
        lines = [
            f"fit error: {self.error:.6e}",
            f"linearized-stage error: {self.stage1_error:.6e}",
            f"coefficients: {self.n_parameters} "
            f"({self.n_parameters - n_const} excluding constant terms)",
            f"min denominator on data: {self.min_denominator:.6e}",
            f"active positivity constraints: {self.active_constraints}",
        ]
        lines += [f"note: {fl}" for fl in self.flags]
        return "\n".join(lines)


@dataclass
class PolynomialFit:
    series: MultiSeries
    error: float
    n_parameters: int
    flags: List[str] = field(default_factory=list)

    def summary(self) -> str:
        lines = [
            f"fit error: {self.error:.6e}",
            f"coefficients: {self.n_parameters} "
            f"({self.n_parameters - self.series.dim_out} excluding "
            "constant terms)",
        ]
        lines += [f"note: {fl}" for fl in self.flags]
        return "\n".join(lines)


def _monomial_matrix(points: np.ndarray, exponents) -> np.ndarray:
    out = np.ones((points.shape[0], len(exponents)))
    for k, ex in enumerate(exponents):
        for j, e in enumerate(ex):
            if e:
                out[:, k] *= points[:, j] ** e
    return out


def _quotient_error(theta, phi, psi_tail, targets, n_out):
    p = phi.shape[1]
    a = theta[:n_out * p].reshape(n_out, p)
    b = theta[n_out * p:]
    den = 1.0 + psi_tail @ b
    with np.errstate(all="ignore"):
        resid = targets - (phi @ a.T) / den[:, None]
        val = float(np.sum(resid * resid))
    return val if np.isfinite(val) else HUGE_OBJECTIVE


def _quotient_grad(theta, phi, psi_tail, targets, n_out):
    p = phi.shape[1]
    a = theta[:n_out * p].reshape(n_out, p)
    b = theta[n_out * p:]
    den = 1.0 + psi_tail @ b
    with np.errstate(all="ignore"):
        num = phi @ a.T
        resid = targets - num / den[:, None]
        ga = -2.0 * (resid / den[:, None]).T @ phi
        gb = 2.0 * psi_tail.T @ (np.sum(resid * num, axis=1) / den ** 2)
    g = np.concatenate([ga.ravel(), gb])
    return np.nan_to_num(g, nan=0.0, posinf=0.0, neginf=0.0)


def _solve_a_given_b(phi, psi_tail, targets, b):
    """Componentwise least squares for the numerator at a frozen denominator."""
    den = 1.0 + psi_tail @ b
    a = np.linalg.lstsq(phi / den[:, None], targets, rcond=None)[0].T
    return a


def _feasibility_certificate(psi_tail, margin):
    """Largest achievable min-denominator; proves infeasibility when < margin."""
    k, m = psi_tail.shape
    if m == 0:
        return 1.0
    # maximize s subject to 1 + psi_tail b >= s for every sample
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-psi_tail, np.ones((k, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.ones(k),
                  bounds=[(None, None)] * (m + 1), method="highs")
    if res.status == 3:
        return float("inf")
    if not res.success:
        return 1.0
    return float(res.x[-1])


def fit_rational_field(prob: RegressionProblem, restarts: int = 1,
                       seed: int = 0, constrained: bool = True) -> RationalFit:
    """Shared-denominator rational fit of a sampled vector field.

    Stage 1 minimizes the linearized residual |den*zeta - num|^2, stage 2
    descends the true quotient error from there. Both stages keep
    den(eta_i) >= margin on every training point unless constrained=False,
    which reproduces the spurious-pole failure mode and exists for
    comparison experiments only.
    """
    d, n_out = prob.dim, prob.n_outputs
    delta = prob.margin
    exps_num = indices_up_to_order(d, prob.numerator_order)
    exps_den = indices_up_to_order(d, prob.denominator_order)
    phi = _monomial_matrix(prob.inputs, exps_num)
    psi = _monomial_matrix(prob.inputs, exps_den)
    psi_tail = psi[:, 1:]
    k, p = phi.shape
    q = psi.shape[1]
    flags: List[str] = []

    if constrained and delta >= 1.0:
        best_floor = _feasibility_certificate(psi_tail, delta)
        if best_floor < delta:
            raise ValidationError(
                f"positivity margin {delta:g} is infeasible: no denominator "
                f"with unit constant exceeds {best_floor:.6g} on all samples")

    def margin_of(b):
        if b.size == 0:
            return 1.0
        return float(np.min(1.0 + psi_tail @ b))

    def shrink_to_feasible(b):
        # scaling toward b = 0 (denominator 1) restores the constraint
        for _ in range(80):
            if margin_of(b) >= delta:
                return b
            b = 0.5 * b
        return np.zeros_like(b)

    # stage 1: linearized problem
    big = np.zeros((k * n_out, n_out * p + q - 1))
    rhs = np.empty(k * n_out)
    for j in range(n_out):
        rows = slice(j * k, (j + 1) * k)
        big[rows, j * p:(j + 1) * p] = -phi
        big[rows, n_out * p:] = psi_tail * prob.targets[:, j:j + 1]
        rhs[j * k:(j + 1) * k] = -prob.targets[:, j]
    theta1 = np.linalg.lstsq(big, rhs, rcond=None)[0]
    if constrained and margin_of(theta1[n_out * p:]) < delta:
        def lin_obj(th):
            r = big @ th - rhs
            return float(r @ r)

        def lin_grad(th):
            return 2.0 * big.T @ (big @ th - rhs)

        a0 = np.linalg.lstsq(phi, prob.targets, rcond=None)[0].T
        start = np.concatenate([a0.ravel(), np.zeros(q - 1)])
        cons = [{"type": "ineq",
                 "fun": lambda th: 1.0 + psi_tail @ th[n_out * p:] - delta,
                 "jac": lambda th: np.hstack(
                     [np.zeros((k, n_out * p)), psi_tail])}]
        res = minimize(lin_obj, start, jac=lin_grad, method="SLSQP",
                       constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-14})
        theta1 = res.x if res.success else start
        b1 = shrink_to_feasible(theta1[n_out * p:])
        theta1 = np.concatenate(
            [_solve_a_given_b(phi, psi_tail, prob.targets, b1).ravel(), b1])
    stage1_error = _quotient_error(theta1, phi, psi_tail, prob.targets, n_out)

    # stage 2: descend the true quotient objective
    cons = []
    if constrained and q > 1:
        cons = [{"type": "ineq",
                 "fun": lambda th: 1.0 + psi_tail @ th[n_out * p:] - delta,
                 "jac": lambda th: np.hstack(
                     [np.zeros((k, n_out * p)), psi_tail])}]
    rng = np.random.default_rng(seed)
    scale = np.max(np.abs(theta1)) or 1.0
    starts = [theta1]
    for _ in range(restarts - 1):
        cand = theta1 + rng.normal(scale=0.3 * scale, size=theta1.shape)
        if constrained:
            b = shrink_to_feasible(cand[n_out * p:])
            cand = np.concatenate([cand[:n_out * p], b])
        starts.append(cand)
    best_theta, best_err = theta1, stage1_error
    refined = False
    den_ranges = []
    for start in starts:
        res = minimize(_quotient_error, start,
                       args=(phi, psi_tail, prob.targets, n_out),
                       jac=_quotient_grad, method="SLSQP", constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-14})
        if not np.all(np.isfinite(res.x)):
            continue
        bs = res.x[n_out * p:]
        dvals = 1.0 + psi_tail @ bs if bs.size else np.ones(k)
        den_ranges.append((float(np.min(dvals)), float(np.max(dvals))))
        if constrained and margin_of(bs) < delta - CONSTRAINT_SLACK:
            continue
        err = _quotient_error(res.x, phi, psi_tail, prob.targets, n_out)
        if err < best_err:
            best_theta, best_err, refined = res.x, err, True
    if not refined:
        flags.append("refinement did not improve the linearized fit; "
                     "keeping the stage-1 coefficients")
    if constrained:
        final_margin = margin_of(best_theta[n_out * p:])
        if final_margin < delta - CONSTRAINT_SLACK:
            raise NumericalError(
                f"fitted denominator drops to {final_margin:.6g} on the "
                f"training data, below the margin {delta:g}")

    a = best_theta[:n_out * p].reshape(n_out, p)
    b = best_theta[n_out * p:]
    num = MultiSeries(d, n_out, prob.numerator_order,
                      {ex: a[:, i] for i, ex in enumerate(exps_num)
                       if np.any(a[:, i])})
    den_coeffs = {exps_den[0]: [1.0]}
    for i, ex in enumerate(exps_den[1:]):
        if b[i]:
            den_coeffs[ex] = [b[i]]
    den = MultiSeries(d, 1, prob.denominator_order, den_coeffs)
    rational = RationalMap(num, den,
                           (prob.numerator_order, prob.denominator_order))
    den_vals = 1.0 + psi_tail @ b if b.size else np.ones(k)
    active = int(np.sum(den_vals - delta < 1e-8 * max(1.0, delta)))
    return RationalFit(rational, best_err, stage1_error, prob.n_parameters,
                       active if constrained else 0,
                       float(np.min(den_vals)), flags, den_ranges)


def fit_polynomial_field(inputs, targets, order: int) -> PolynomialFit:
    """Graded-monomial least squares, the all-polynomial baseline."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if inputs.shape[0] != targets.shape[0]:
        raise ValidationError("inputs and targets disagree on the "
                              "number of samples")
    d, n_out = inputs.shape[1], targets.shape[1]
    exps = indices_up_to_order(d, order)
    phi = _monomial_matrix(inputs, exps)
    if inputs.shape[0] < len(exps):
        raise ValidationError(
            f"{inputs.shape[0]} samples cannot determine "
            f"{n_out * len(exps)} coefficients")
    a, _, rank, _ = np.linalg.lstsq(phi, targets, rcond=None)
    flags = []
    if rank < len(exps):
        flags.append(f"rank-deficient basis ({rank} < {len(exps)}); "
                     "minimum-norm coefficients")
    resid = targets - phi @ a
    series = MultiSeries(d, n_out, order,
                         {ex: a[i, :] for i, ex in enumerate(exps)
                          if np.any(a[i, :])})
    return PolynomialFit(series, float(np.sum(resid * resid)),
                         n_out * len(exps), flags)


def chart_to_text(chart: ChartProjection, cfg: EmbeddingConfig) -> str:
    lines = [f"chart {chart.ambient_dim} {chart.reduced_dim} "
             f"{cfg.delays} {cfg.lag} {cfg.observable}"]
    lines.append("CENTER")
    lines.append(" ".join(format_float(c) for c in chart.center))
    lines.append("BASIS")
    for row in chart.basis:
        lines.append(" ".join(format_float(c) for c in row))
    return "\n".join(lines) + "\n"


def chart_from_text(text: str):
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.strip().startswith("#")]
    if not lines or not lines[0].startswith("chart "):
        raise ValidationError("missing chart header")
    head = lines[0].split()
    if len(head) != 6:
        raise ValidationError(f"bad chart header: {lines[0]!r}")
    q, d, delays, lag, observable = (int(t) for t in head[1:])
    if lines[1] != "CENTER" or lines[3] != "BASIS":
        raise ValidationError("chart file needs CENTER and BASIS sections")
    center = np.array([float(t) for t in lines[2].split()])
    rows = [[float(t) for t in ln.split()] for ln in lines[4:4 + q]]
    if len(rows) != q:
        raise ValidationError(f"expected {q} basis rows")
    chart = ChartProjection(np.array(rows), center)
    if chart.reduced_dim != d:
        raise ValidationError("basis width disagrees with the header")
    return chart, EmbeddingConfig(delays, lag, observable)


def predict(chart: ChartProjection,
            fitted: Union[RationalMap, MultiSeries, ReducedField],
            window: TrajectoryData, cfg: EmbeddingConfig, horizon: float,
            n_out: int = 1001) -> TrajectoryData:
    """Embed the tail of a measured window, integrate, and reconstruct.

    Returns the observable (first embedding component) over the horizon;
    integration flags such as blowups ride along on the trajectory.
    """
    embedded = delay_embed(window, cfg)
    if embedded.n_components != chart.ambient_dim:
        raise ValidationError("embedding width does not match the chart")
    y0 = embedded.values[-1]
    t0 = float(embedded.times[-1])
    eta0 = chart.project(y0)
    if isinstance(fitted, ReducedField):
        rf = fitted
    elif isinstance(fitted, RationalMap):
        rf = ReducedField.from_rationals(fitted)
    else:
        rf = ReducedField.from_series(fitted)
    traj = integrate_reduced(rf, eta0, (t0, t0 + horizon), n_out=n_out)
    recon = chart.reconstruct(traj.values)
    return TrajectoryData(traj.times, recon[:, 0], list(traj.flags))
