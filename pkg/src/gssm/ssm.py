"""Slow spectral-submanifold computation for polynomial vector fields.

The invariance equation A W(p) + f(W(p)) = DW(p) R(p) is solved order by
order in the eigenbasis of A.  At total order m the coefficient of row j
satisfies

    (lambda_j - <m, lambda_E>) W~_{j,m} = X_{j,m} - F_{j,m} + [j master] R_{i,m}

where F collects the nonlinearity composed with lower orders of W~ and X
collects the lower-order DW~*R cross terms.  Graph style keeps master rows
of W~ zero and solves them for R; normal-form style keeps only (near-)
resonant reduced-dynamics monomials and pushes everything else into W~.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NumericalError, SmallDivisorError, ValidationError
from .series import (MultiSeries, coeff_lines, compose_truncated, format_float,
                     indices_of_order, invert_map, multiply_truncated,
                     parse_coeff_lines)

RESONANCE_TOL_FACTOR = 1e-8
STYLES = ("graph", "normal-form")


# ---- systems ---------------------------------------------------------------


@dataclass
class PolySystem:
    """First-order analytic system x' = A x + f(x) + eps * f_ext * cos(Omega t).

    f is a MultiSeries with no constant or linear terms.  rhs_callable, when
    given, replaces A x + f(x) entirely (demo systems with rational right-hand
    sides); the polynomial SSM solver rejects such systems.
    """

    linear_part: np.ndarray
    nonlinearity: MultiSeries
    forcing_vector: Optional[np.ndarray] = None
    forcing_amplitude: float = 0.0
    forcing_frequency: float = 0.0
    rhs_callable: Optional[Callable] = None
    _jac_series: Optional[List[MultiSeries]] = field(default=None, repr=False)

    def __post_init__(self):
        self.linear_part = np.asarray(self.linear_part, dtype=float)
        n = self.linear_part.shape[0]
        if self.linear_part.shape != (n, n):
            raise ValidationError("linear part must be square")
        if self.nonlinearity.dim_in != n or self.nonlinearity.dim_out != n:
            raise ValidationError("nonlinearity must map state space to itself")
        if self.nonlinearity.coeffs and self.nonlinearity.min_order_present() < 2:
            raise ValidationError("nonlinearity must start at total order 2")
        if self.forcing_vector is not None:
            self.forcing_vector = np.asarray(self.forcing_vector, dtype=float)
            if self.forcing_vector.shape != (n,):
                raise ValidationError("forcing vector shape mismatch")

    @property
    def dim(self) -> int:
        return self.linear_part.shape[0]

    def autonomous_rhs(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.rhs_callable is not None:
            return np.asarray(self.rhs_callable(x))
        out = self.linear_part @ x + self.nonlinearity.evaluate(x)
        return out.real if np.isrealobj(x) else out

    def rhs(self, x, t: float = 0.0) -> np.ndarray:
        out = self.autonomous_rhs(x)
        if self.forcing_amplitude and self.forcing_vector is not None:
            out = out + self.forcing_amplitude * self.forcing_vector * \
                np.cos(self.forcing_frequency * t)
        return out

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.rhs_callable is not None:
            n = self.dim
            jac = np.zeros((n, n))
            h = 1e-7 * (1.0 + np.abs(x))
            for i in range(n):
                dx = np.zeros(n)
                dx[i] = h[i]
                jac[:, i] = (self.autonomous_rhs(x + dx) -
                             self.autonomous_rhs(x - dx)) / (2 * h[i])
            return jac
        if self._jac_series is None:
            self._jac_series = self.nonlinearity.jacobian_rows()
        jac = self.linear_part.astype(complex).copy()
        for i, ds in enumerate(self._jac_series):
            jac[:, i] += ds.evaluate(x)
        return jac.real


@dataclass
class SpectralData:
    """Eigen-decomposition with a designated master (slow) subset.

    eigenvalues are sorted by descending real part (descending imaginary
    part within ties, so a conjugate pair lists its +Im member first);
    left_vectors rows are dual to right_vectors columns.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    master: List[int]
    flags: List[str] = field(default_factory=list)

    @property
    def master_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.master]

    @property
    def master_right(self) -> np.ndarray:
        return self.right_vectors[:, self.master]

    @property
    def master_left(self) -> np.ndarray:
        return self.left_vectors[self.master, :]


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    i0 = int(np.argmax(mags > 1e-12 * mags.max()))
    phase = v[i0] / abs(v[i0])
    v = v / phase
    return v / np.linalg.norm(v)


def spectral_analysis(sys: PolySystem, d: int,
                      master_indices: Optional[Sequence[int]] = None) -> SpectralData:
    """Eigen-structure of the linear part with the d slow modes marked.

    The default master set is the d eigenvalues closest to zero in modulus
    (conjugate pairs kept together); pass master_indices (positions in the
    sorted eigenvalue list) to override, e.g. for mixed-mode manifolds.
    """
    if d not in (1, 2):
        raise ValidationError("only 1- and 2-dimensional manifolds are supported")
    a = np.asarray(sys.linear_part, dtype=float)
    n = a.shape[0]
    if d > n:
        raise ValidationError("manifold dimension exceeds state dimension")
    vals, vecs = np.linalg.eig(a)
    if np.linalg.cond(vecs) > 1e12:
        raise NumericalError("linear part is defective or near-defective")

    order = sorted(range(n), key=lambda i: (-vals[i].real, -vals[i].imag))
    vals = vals[order]
    vecs = vecs[:, order]

    # enforce exact conjugate pairing and the normalization gauge
    used = np.zeros(n, dtype=bool)
    imag_tol = 1e-10 * max(np.max(np.abs(vals)), 1.0)
    for i in range(n):
        if used[i]:
            continue
        if abs(vals[i].imag) <= imag_tol:
            vals[i] = vals[i].real
            vecs[:, i] = _normalize_phase(vecs[:, i])
            used[i] = True
            continue
        partner = None
        for j in range(i + 1, n):
            if not used[j] and abs(vals[j] - np.conj(vals[i])) <= \
                    1e-6 * max(abs(vals[i]), 1.0):
                partner = j
                break
        if partner is None:
            raise NumericalError(f"unpaired complex eigenvalue {vals[i]}")
        hi, lo = (i, partner) if vals[i].imag > 0 else (partner, i)
        vecs[:, hi] = _normalize_phase(vecs[:, hi])
        vals[lo] = np.conj(vals[hi])
        vecs[:, lo] = np.conj(vecs[:, hi])
        used[i] = used[partner] = True

    left = np.linalg.inv(vecs)
    flags: List[str] = []

    if master_indices is None:
        by_modulus = sorted(range(n), key=lambda i: (abs(vals[i]), i))
        master = sorted(by_modulus[:d])
    else:
        master = sorted(int(i) for i in master_indices)
        if len(master) != d or any(not 0 <= i < n for i in master):
            raise ValidationError("master_indices must be d distinct positions")
        flags.append("explicit master selection")

    # conjugate-pair integrity
    for i in master:
        if abs(vals[i].imag) > imag_tol:
            mate = [j for j in range(n) if j != i and
                    abs(vals[j] - np.conj(vals[i])) <= imag_tol * 10]
            if not mate or mate[0] not in master:
                raise ValidationError(
                    "master set splits a complex-conjugate pair")

    enslaved = [i for i in range(n) if i not in master]
    if enslaved and master_indices is None:
        gap = max(vals[i].real for i in enslaved) - min(vals[i].real for i in master)
        if gap >= -1e-12:
            raise NumericalError(
                f"no spectral gap: slowest enslaved Re {max(vals[i].real for i in enslaved):.6g} "
                f"does not lie below the master real parts")
    elif enslaved:
        gap = max(vals[i].real for i in enslaved) - min(vals[i].real for i in master)
        if gap >= -1e-12:
            flags.append("spectral gap check skipped for explicit master set")

    return SpectralData(vals, vecs, left, master, flags)


def check_nonresonance(spec: SpectralData, order: int) -> List[Tuple[int, tuple, complex]]:
    """Near-resonant (row, multi-index, divisor) triples through the given order.

    Master-row entries are informational (they are absorbed into the reduced
    dynamics); enslaved-row entries make the solve fail.
    """
    lam_e = spec.master_eigenvalues
    tol = RESONANCE_TOL_FACTOR * max(np.max(np.abs(spec.eigenvalues)), 1e-300)
    out = []
    for k in range(2, order + 1):
        for m in indices_of_order(len(spec.master), k):
            dot = complex(np.dot(m, lam_e))
            for j, lam in enumerate(spec.eigenvalues):
                if abs(lam - dot) < tol:
                    out.append((j, m, lam - dot))
    return out


# ---- the model -------------------------------------------------------------


@dataclass
class SSMModel:
    """Computed or imported manifold parametrization with reduced dynamics.

    W maps reduced coordinates p (dim d) to ambient states (dim n); R is the
    reduced vector field p' = R(p).  master_left is needed only for forcing
    projections and may be absent on imported models.
    """

    n: int
    d: int
    style: str
    order: int
    master_eigenvalues: np.ndarray
    master_right: np.ndarray
    W: MultiSeries
    R: MultiSeries
    master_left: Optional[np.ndarray] = None
    flags: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.master_eigenvalues = np.asarray(self.master_eigenvalues, dtype=complex)
        self.master_right = np.asarray(self.master_right, dtype=complex)
        if self.style not in STYLES:
            raise ValidationError(f"style must be one of {STYLES}")
        if self.W.dim_in != self.d or self.W.dim_out != self.n:
            raise ValidationError("W must map d reduced coordinates to n states")
        if self.R.dim_in != self.d or self.R.dim_out != self.d:
            raise ValidationError("R must be a d-dimensional vector field")

    def is_oscillatory_pair(self) -> bool:
        return (self.d == 2 and
                abs(self.master_eigenvalues[0] -
                    np.conj(self.master_eigenvalues[1])) <
                1e-8 * max(np.max(np.abs(self.master_eigenvalues)), 1.0) and
                abs(self.master_eigenvalues[0].imag) > 0)


def compute_ssm(sys: PolySystem, spec: SpectralData, order: int,
                style: str = "normal-form") -> SSMModel:
    """Order-by-order cohomological solve of the invariance equation."""
    if style not in STYLES:
        raise ValidationError(f"style must be one of {STYLES}")
    if order < 1:
        raise ValidationError("order must be >= 1")
    if sys.rhs_callable is not None:
        raise ValidationError("SSM solver requires a polynomial right-hand side")
    n = sys.dim
    d = len(spec.master)
    lam_all = spec.eigenvalues
    lam_e = spec.master_eigenvalues
    v = spec.right_vectors
    lft = spec.left_vectors
    tol = RESONANCE_TOL_FACTOR * max(np.max(np.abs(lam_all)), 1e-300)

    # conjugate-pair bookkeeping for the structural resonance pattern
    oscillatory = (d == 2 and abs(lam_e[0] - np.conj(lam_e[1])) < tol * 10
                   and abs(lam_e[0].imag) > tol)
    plus_local = int(np.argmax(lam_e.imag)) if oscillatory else 0

    def structurally_resonant(idx: tuple, local_row: int) -> bool:
        if not oscillatory:
            return False
        a, b = idx if plus_local == 0 else idx[::-1]
        return (a == b + 1) if local_row == plus_local else (b == a + 1)

    # eigen-coordinate parametrization W~ and reduced dynamics R, linear parts
    w_coeffs = {}
    r_coeffs = {}
    for i, mi in enumerate(spec.master):
        e_i = tuple(1 if j == i else 0 for j in range(d))
        col = np.zeros(n, dtype=complex)
        col[mi] = 1.0
        w_coeffs[e_i] = col
        rv = np.zeros(d, dtype=complex)
        rv[i] = lam_e[i]
        r_coeffs[e_i] = rv
    w_tilde = MultiSeries(d, n, order, w_coeffs)
    r_series = MultiSeries(d, d, order, r_coeffs)
    f = sys.nonlinearity

    for k in range(2, order + 1):
        amb = w_tilde.truncated(k - 1).linear_transform(v)
        f_k = compose_truncated(f, amb, k).linear_transform(lft) if f.coeffs \
            else MultiSeries.zero(d, n, k)
        x_k = MultiSeries.zero(d, n, k)
        for i in range(d):
            tail = r_series.component(i).drop_below(2).truncated(k - 1)
            if tail.coeffs:
                x_k = x_k + multiply_truncated(tail, w_tilde.truncated(k - 1).derivative(i), k)

        new_w = dict(w_tilde.coeffs)
        new_r = dict(r_series.coeffs)
        for idx in indices_of_order(d, k):
            dot = complex(np.dot(idx, lam_e))
            rhs_vec = x_k.get(idx) - f_k.get(idx)
            w_vec = np.zeros(n, dtype=complex)
            r_vec = np.zeros(d, dtype=complex)
            for j in range(n):
                delta = lam_all[j] - dot
                if j in spec.master:
                    local = spec.master.index(j)
                    if style == "graph":
                        resonant = True
                    else:
                        resonant = structurally_resonant(idx, local) or abs(delta) < tol
                    if resonant:
                        r_vec[local] = -rhs_vec[j]
                    else:
                        w_vec[j] = rhs_vec[j] / delta
                else:
                    if abs(delta) < tol:
                        raise SmallDivisorError(j, idx, delta)
                    w_vec[j] = rhs_vec[j] / delta
            if np.any(w_vec != 0):
                new_w[idx] = w_vec
            if np.any(r_vec != 0):
                new_r[idx] = r_vec
        w_tilde = MultiSeries(d, n, order, new_w)
        r_series = MultiSeries(d, d, order, new_r)

    w_ambient = w_tilde.linear_transform(v)
    return SSMModel(n=n, d=d, style=style, order=order,
                    master_eigenvalues=lam_e, master_right=spec.master_right,
                    W=w_ambient, R=r_series, master_left=spec.master_left,
                    flags=list(spec.flags))


# ---- polar normal form ------------------------------------------------------


@dataclass
class PolarNormalForm:
    """Amplitude-dependent damping and frequency: rho' = kappa(rho) rho,
    theta' = omega(rho), with kappa(rho) = sum kappa_n rho^(2n)."""

    kappa: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.kappa = np.asarray(self.kappa, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.kappa.shape != self.omega.shape:
            raise ValidationError("kappa and omega must have equal length")

    def kappa_at(self, rho):
        rho2 = np.asarray(rho, dtype=float) ** 2
        return sum(c * rho2 ** i for i, c in enumerate(self.kappa))

    def omega_at(self, rho):
        rho2 = np.asarray(rho, dtype=float) ** 2
        return sum(c * rho2 ** i for i, c in enumerate(self.omega))

    def kappa_prime_at(self, rho):
        rho = np.asarray(rho, dtype=float)
        return sum(2 * i * c * rho ** (2 * i - 1)
                   for i, c in enumerate(self.kappa) if i > 0)

    def omega_prime_at(self, rho):
        rho = np.asarray(rho, dtype=float)
        return sum(2 * i * c * rho ** (2 * i - 1)
                   for i, c in enumerate(self.omega) if i > 0)

    def omega_series(self) -> MultiSeries:
        return MultiSeries(1, 1, 2 * (len(self.omega) - 1),
                           {(2 * i,): np.array([complex(c)])
                            for i, c in enumerate(self.omega)})

    def kappa_series(self) -> MultiSeries:
        return MultiSeries(1, 1, 2 * (len(self.kappa) - 1),
                           {(2 * i,): np.array([complex(c)])
                            for i, c in enumerate(self.kappa)})


def extract_polar(model: SSMModel) -> PolarNormalForm:
    """kappa_n + i omega_n from the resonant coefficients R_{(n+1,n)}.

    Requires a normal-form model over a complex-conjugate master pair.
    """
    if model.style != "normal-form":
        raise ValidationError("polar extraction requires a normal-form model")
    if not model.is_oscillatory_pair():
        raise ValidationError("polar extraction requires a conjugate master pair")
    plus = int(np.argmax(model.master_eigenvalues.imag))
    n_terms = (model.order - 1) // 2 + 1
    kappa = np.zeros(n_terms)
    omega = np.zeros(n_terms)
    scale = max(np.max(np.abs(val)) for val in model.R.coeffs.values())
    for nn in range(n_terms):
        idx = (nn + 1, nn) if plus == 0 else (nn, nn + 1)
        c = model.R.get(idx)[plus]
        # conjugate row must mirror it; a mismatch signals a gauge error
        mate = model.R.get(idx[::-1])[1 - plus]
        if abs(mate - np.conj(c)) > 1e-9 * scale:
            raise NumericalError(
                f"reduced dynamics are not conjugate-symmetric at {idx}")
        kappa[nn] = c.real
        omega[nn] = c.imag
    return PolarNormalForm(kappa, omega)


# ---- realification ----------------------------------------------------------


def _conjugate_substitution(order: int) -> MultiSeries:
    """(a, b) -> (a + ib, a - ib) as a linear series."""
    return MultiSeries(2, 2, order, {
        (1, 0): np.array([1.0 + 0j, 1.0 + 0j]),
        (0, 1): np.array([1j, -1j]),
    })


def realify_parametrization(model: SSMModel) -> MultiSeries:
    """Real series for W in real reduced coordinates.

    d=1 real master: coefficients must already be real.  Conjugate pair:
    substitute p = a + ib, p_bar = a - ib; the imaginary parts of the result
    must cancel for a real system.
    """
    if model.d == 1:
        w = model.W
    elif model.is_oscillatory_pair():
        w = compose_truncated(model.W, _conjugate_substitution(model.order),
                              model.order)
    else:
        w = model.W
    scale = max((np.max(np.abs(v)) for v in w.coeffs.values()), default=1.0)
    if w.max_abs_imag() > 1e-9 * scale:
        raise NumericalError("parametrization does not realify: residual "
                             f"imaginary part {w.max_abs_imag():.2e}")
    return MultiSeries(w.dim_in, w.dim_out, w.order,
                       {k: v.real.astype(complex) for k, v in w.coeffs.items()})


def realify_reduced(model: SSMModel) -> MultiSeries:
    """Real 2D (or 1D) vector field in the real coordinates of the pair."""
    if model.d == 1:
        r = model.R
        scale = max((np.max(np.abs(v)) for v in r.coeffs.values()), default=1.0)
        if r.max_abs_imag() > 1e-9 * scale:
            raise NumericalError("reduced dynamics do not realify")
        return MultiSeries(1, 1, r.order,
                           {k: v.real.astype(complex) for k, v in r.coeffs.items()})
    if not model.is_oscillatory_pair():
        return model.R
    plus = int(np.argmax(model.master_eigenvalues.imag))
    c = compose_truncated(model.R.component(plus), _conjugate_substitution(model.order),
                          model.order)
    re_part = (c + c.conjugate_coeffs()).scaled(0.5)
    im_part = (c - c.conjugate_coeffs()).scaled(-0.5j)
    return MultiSeries.from_components([re_part, im_part])


# ---- invariance residual ----------------------------------------------------


@dataclass
class ResidualStats:
    radii: np.ndarray
    max_residual: np.ndarray
    term_scale: np.ndarray
    valid: np.ndarray
    slope: float

    def max_over_valid(self) -> float:
        if not np.any(self.valid):
            return float("nan")
        return float(np.max(self.max_residual[self.valid]))


def _sample_points(model: SSMModel, radius: float, n_angles: int) -> np.ndarray:
    if model.d == 1:
        return np.array([[radius], [-radius]], dtype=complex)
    thetas = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    if model.is_oscillatory_pair():
        z = radius * np.exp(1j * thetas)
        return np.stack([z, np.conj(z)], axis=1)
    return radius * np.stack([np.cos(thetas), np.sin(thetas)], axis=1).astype(complex)


def invariance_residual(sys: PolySystem, model: SSMModel,
                        radii=None, n_angles: int = 12) -> ResidualStats:
    """Defect of A W + f(W) - DW R on circles |p| = r, with a fitted slope.

    The log-log slope is fitted only where the defect stands clear of the
    floating-point noise floor of the participating terms and below the
    regime where the truncation has fully diverged.
    """
    if radii is None:
        radii = np.logspace(-6.0, 0.3, 34)
    radii = np.asarray(radii, dtype=float)
    a = np.asarray(sys.linear_part, dtype=complex)
    dw = model.W.jacobian_rows()
    a_norm = np.linalg.norm(a)

    max_res = np.zeros(len(radii))
    scales = np.zeros(len(radii))
    floors = np.zeros(len(radii))
    for ir, r in enumerate(radii):
        pts = _sample_points(model, r, n_angles)
        # pre-cancellation magnitude bound: series evaluations can cancel
        # down from these scales, so the measurable defect sits above
        # epsilon times this, not above the cancelled term norms
        w_scale = model.W.coeff_scale(r)
        r_scale = model.R.coeff_scale(r)
        j_scale = sum(ds.coeff_scale(r) for ds in dw)
        f_scale = sys.nonlinearity.coeff_scale(w_scale) if sys.nonlinearity.coeffs \
            else w_scale ** 2
        floors[ir] = a_norm * w_scale + f_scale + j_scale * r_scale
        worst = 0.0
        scale = 0.0
        for p in pts:
            x = model.W.evaluate(p)
            t1 = a @ x
            if sys.rhs_callable is not None:
                t2 = np.asarray(sys.rhs_callable(x)) - t1
            else:
                t2 = sys.nonlinearity.evaluate(x)
            jac = np.stack([ds.evaluate(p) for ds in dw], axis=1)
            t3 = jac @ model.R.evaluate(p)
            res = np.linalg.norm(t1 + t2 - t3)
            mag = np.linalg.norm(t1) + np.linalg.norm(t2) + np.linalg.norm(t3)
            worst = max(worst, res)
            scale = max(scale, mag)
        max_res[ir] = worst
        scales[ir] = scale

    noise = 1e-13 * np.maximum(floors, 1e-300)
    valid = (max_res > 50.0 * noise) & (max_res < 0.05 * np.maximum(scales, 1e-300))
    slope = float("nan")
    if np.count_nonzero(valid) >= 3 and \
            np.ptp(np.log10(radii[valid])) >= 0.5:
        slope = float(np.polyfit(np.log10(radii[valid]),
                                 np.log10(max_res[valid]), 1)[0])
    return ResidualStats(radii, max_res, scales, valid, slope)


# ---- graphs over ambient coordinates ----------------------------------------


@dataclass
class CoordinateGraph:
    """The manifold re-expressed as a graph over chosen ambient coordinates.

    parametrization maps u = x[coords] to the full state; reduced is the
    vector field u' = g(u) in those coordinates.
    """

    coords: List[int]
    order: int
    parametrization: MultiSeries
    reduced: MultiSeries


def to_coordinate_graph(model: SSMModel, coords: Sequence[int]) -> CoordinateGraph:
    coords = [int(c) for c in coords]
    if len(coords) != model.d:
        raise ValidationError("need exactly d coordinates to re-parametrize")
    phi = MultiSeries.from_components([model.W.component(c) for c in coords])
    try:
        g = invert_map(phi, model.order)
    except ValueError as exc:
        raise NumericalError(
            f"coordinates {coords} do not chart the manifold: {exc}") from exc
    param = compose_truncated(model.W, g, model.order)
    # chain rule: u' = Dphi(p) R(p), then substitute p = g(u)
    rows = []
    for a in range(model.d):
        acc = MultiSeries.zero(model.d, 1, model.order)
        comp = phi.component(a)
        for i in range(model.d):
            acc = acc + multiply_truncated(comp.derivative(i),
                                           model.R.component(i), model.order)
        rows.append(acc)
    reduced = compose_truncated(MultiSeries.from_components(rows), g, model.order)
    return CoordinateGraph(coords, model.order, param, reduced)


# ---- model files -------------------------------------------------------------


def _complex_pair(c: complex) -> str:
    return f"{format_float(c.real)} {format_float(c.imag)}"


def model_to_text(model: SSMModel) -> str:
    lines = [f"ssm {model.n} {model.d} {model.style} {model.order}"]
    lines.append("EIGENVALUES")
    for lam in model.master_eigenvalues:
        lines.append(_complex_pair(lam))
    lines.append("EIGENVECTORS")
    for row in model.master_right:
        lines.append(" ".join(_complex_pair(c) for c in row))
    if model.master_left is not None:
        lines.append("LEFT_EIGENVECTORS")
        for row in model.master_left:
            lines.append(" ".join(_complex_pair(c) for c in row))
    lines.append("W")
    lines.extend(coeff_lines(model.W))
    lines.append("R")
    lines.extend(coeff_lines(model.R))
    # derivable convenience block: amplitude-dependent damping and frequency
    if model.style == "normal-form" and model.is_oscillatory_pair():
        try:
            polar = extract_polar(model)
        except (ValidationError, NumericalError):
            polar = None
        if polar is not None:
            lines.append("POLAR")
            for kap, om in zip(polar.kappa, polar.omega):
                lines.append(f"{format_float(kap)} {format_float(om)}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> SSMModel:
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.strip().startswith("#")]
    if not lines or not lines[0].startswith("ssm "):
        raise ValidationError("missing ssm header")
    head = lines[0].split()
    if len(head) != 5:
        raise ValidationError(f"bad ssm header: {lines[0]!r}")
    n, d = int(head[1]), int(head[2])
    style, order = head[3], int(head[4])

    sections = {}
    current = None
    for ln in lines[1:]:
        if ln in ("EIGENVALUES", "EIGENVECTORS", "LEFT_EIGENVECTORS",
                  "W", "R", "POLAR"):
            # POLAR is informational; kappa/omega re-derive from R on demand
            current = ln
            sections[current] = []
            continue
        if current is None:
            raise ValidationError(f"content before first section: {ln!r}")
        sections[current].append(ln)
    for required in ("EIGENVALUES", "EIGENVECTORS", "W", "R"):
        if required not in sections:
            raise ValidationError(f"missing {required} section")

    def parse_complex_row(ln, count):
        toks = [float(t) for t in ln.split()]
        if len(toks) != 2 * count:
            raise ValidationError(f"expected {count} complex pairs: {ln!r}")
        return np.array([complex(toks[2 * i], toks[2 * i + 1]) for i in range(count)])

    lam = np.array([parse_complex_row(ln, 1)[0] for ln in sections["EIGENVALUES"]])
    if len(lam) != d:
        raise ValidationError(f"expected {d} eigenvalues, found {len(lam)}")
    right = np.array([parse_complex_row(ln, d) for ln in sections["EIGENVECTORS"]])
    if right.shape != (n, d):
        raise ValidationError(f"eigenvector block must be {n} rows of {d} pairs")
    left = None
    if "LEFT_EIGENVECTORS" in sections:
        left = np.array([parse_complex_row(ln, n) for ln in sections["LEFT_EIGENVECTORS"]])
        if left.shape != (d, n):
            raise ValidationError("left eigenvector block must be d rows of n pairs")
    w = parse_coeff_lines(sections["W"], d, n, order)
    r = parse_coeff_lines(sections["R"], d, d, order)

    model = SSMModel(n=n, d=d, style=style, order=order, master_eigenvalues=lam,
                     master_right=right, W=w, R=r, master_left=left)
    # imported coefficients must be consistent: tangency of W to the stated
    # eigenvectors and R to the stated eigenvalues
    for i in range(d):
        e_i = tuple(1 if j == i else 0 for j in range(d))
        wlin = w.get(e_i)
        scale = max(np.max(np.abs(right)), 1e-300)
        if np.max(np.abs(wlin - right[:, i])) > 1e-9 * scale:
            raise ValidationError(f"W linear part does not match eigenvector {i}")
        rlin = r.get(e_i)
        expect = np.zeros(d, dtype=complex)
        expect[i] = lam[i]
        if np.max(np.abs(rlin - expect)) > 1e-9 * max(np.max(np.abs(lam)), 1e-300):
            raise ValidationError(f"R linear part does not match eigenvalue {i}")
    return model
