"""Univariate and homogeneous multivariate Pade approximants.

The univariate constructor uses the SVD-based robust solve: the denominator
is the smallest right singular vector of the Toeplitz coefficient matrix,
with degrees reduced whenever that matrix is numerically rank-deficient, so
that noise and degenerate (block-structured) inputs shrink the approximant
instead of planting spurious poles.  The multivariate constructor matches
coefficients on total-order lattices, denominator solved in least squares
with b0 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import PoleProximityError, ValidationError
from .series import (MultiIndex, MultiSeries, coeff_lines, indices_of_order,
                     indices_up_to_order, multiply_truncated,
                     parse_coeff_lines, reciprocal_truncated)

DEFAULT_SVD_TOL = 1e-13
DEFAULT_POLE_FLOOR = 1e-12


@dataclass
class RationalMap:
    """Rational function numerator/denominator with b0 = 1.

    numerator: MultiSeries (dim_in -> dim_out), order <= N
    denominator: scalar MultiSeries, order <= M, constant term exactly 1
    type_tag: requested or degraded (N, M)
    flags: construction diagnostics (degree reductions, least-squares rank)
    """

    numerator: MultiSeries
    denominator: MultiSeries
    type_tag: Tuple[int, int]
    flags: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.numerator.dim_in != self.denominator.dim_in:
            raise ValidationError("numerator/denominator dim_in mismatch")
        if self.denominator.dim_out != 1:
            raise ValidationError("denominator must be scalar-valued")
        zero = (0,) * self.denominator.dim_in
        b0 = self.denominator.get(zero)[0]
        if b0 != 1.0:
            raise ValidationError(f"denominator constant term must be 1, got {b0}")

    @property
    def dim_in(self) -> int:
        return self.numerator.dim_in

    @property
    def dim_out(self) -> int:
        return self.numerator.dim_out

    def denominator_at(self, point) -> complex:
        return self.denominator.evaluate(point)[0]


def evaluate_rational(r: RationalMap, point, floor: float = DEFAULT_POLE_FLOOR) -> np.ndarray:
    den = r.denominator.evaluate(point)[0]
    if abs(den) < floor:
        raise PoleProximityError(np.asarray(point), den, floor)
    return r.numerator.evaluate(point) / den


def evaluate_rational_many(r: RationalMap, points, floor: float = DEFAULT_POLE_FLOOR) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    den = r.denominator.evaluate_many(pts)[:, 0]
    bad = np.abs(den) < floor
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PoleProximityError(pts[i], den[i], floor)
    return r.numerator.evaluate_many(pts) / den[:, None]


def taylor_of_rational(r: RationalMap, order: int) -> MultiSeries:
    """Series of the quotient: numerator times truncated reciprocal of denominator."""
    recip = reciprocal_truncated(r.denominator.truncated(min(r.denominator.order, order)),
                                 order)
    return multiply_truncated(recip, r.numerator.truncated(min(r.numerator.order, order)),
                              order)


# ---- univariate -----------------------------------------------------------


def _toeplitz_block(c: np.ndarray, n_start: int, rows: int, cols: int) -> np.ndarray:
    z = np.zeros((rows, cols), dtype=complex)
    for i in range(rows):
        for j in range(cols):
            k = n_start + i - j
            if 0 <= k < len(c):
                z[i, j] = c[k]
    return z


def pade_univariate(coeffs, N: int, M: int,
                    svd_tol: float = DEFAULT_SVD_TOL) -> RationalMap:
    """[N/M] approximant of a univariate scalar series.

    coeffs may be a MultiSeries (d=1, scalar) or a flat coefficient sequence
    (c_0, ..., c_K) with K >= N+M.  Degrees are reduced when the Toeplitz
    system is rank-deficient at svd_tol (relative to the largest singular
    value), or when the denominator solution has a vanishing constant term.
    """
    if isinstance(coeffs, MultiSeries):
        if coeffs.dim_in != 1 or coeffs.dim_out != 1:
            raise ValidationError("pade_univariate needs a scalar univariate series")
        if coeffs.order < N + M:
            raise ValidationError(f"series order {coeffs.order} < N+M = {N + M}")
        c = coeffs.univariate_coeffs()
    else:
        c = np.asarray(list(coeffs), dtype=complex)
        if len(c) < N + M + 1:
            raise ValidationError(f"need {N + M + 1} coefficients, got {len(c)}")
    if N < 0 or M < 0:
        raise ValidationError("orders must be nonnegative")

    flags: List[str] = []
    c = c[:N + M + 1] if len(c) > N + M + 1 else c
    # Equilibrate graded coefficient growth (|c_k| ~ 1/r^k with small r would
    # otherwise swamp every relative tolerance below).  The substitution
    # x -> x/alpha with alpha a power of two is exact in floating point; the
    # result is mapped back at the end.
    alpha = 1.0
    ks = np.nonzero(np.abs(c))[0]
    ks = ks[ks > 0]
    if len(ks):
        growth = max(float(np.abs(c[k])) ** (1.0 / k) for k in ks)
        if growth > 0.0 and np.isfinite(growth):
            alpha = 2.0 ** float(np.clip(round(np.log2(growth)), -256, 256))
    if alpha != 1.0:
        c = c * alpha ** -np.arange(len(c), dtype=float)
    scale = float(np.max(np.abs(c)))
    if scale == 0.0:
        return RationalMap(MultiSeries.zero(1, 1, 0),
                           MultiSeries.from_univariate([1.0]), (0, 0),
                           ["all-zero input"])
    tol_abs = svd_tol * scale

    # strip leading (numerically) zero coefficients; the factor z^shift goes
    # to the numerator afterwards
    shift = 0
    while shift <= N and abs(c[shift]) <= tol_abs:
        shift += 1
    if shift > N:
        return RationalMap(MultiSeries.zero(1, 1, 0),
                           MultiSeries.from_univariate([1.0]), (0, 0),
                           ["input vanishes through requested numerator order"])
    if shift:
        flags.append(f"leading zeros: numerator carries z^{shift}")
    cs = c[shift:]
    n = N - shift
    m = M

    while True:
        if m == 0:
            b = np.array([1.0 + 0j])
            break
        z = _toeplitz_block(cs, n + 1, m, m + 1)
        u, s, vh = np.linalg.svd(z)
        smax = s[0] if len(s) else 0.0
        rank = int(np.sum(s > svd_tol * smax)) if smax > 0 else 0
        if rank < m:
            n_new = max(n - (m - rank), 0)
            flags.append(f"rank deficiency: [{n + shift}/{m}] -> [{n_new + shift}/{rank}]")
            n, m = n_new, rank
            continue
        b = np.conj(vh[-1])
        if abs(b[0]) < 1e-8 * np.max(np.abs(b)):
            flags.append(f"vanishing b0 at M={m}, reducing denominator order")
            m -= 1
            continue
        b = b / b[0]
        b[0] = 1.0  # complex division is not exact; the normalization is
        break

    a = np.zeros(n + 1, dtype=complex)
    for k in range(n + 1):
        for j in range(min(k, m) + 1):
            a[k] += cs[k - j] * b[j]
    # trim numerically-zero trailing coefficients so type_tag reflects the
    # actual degrees
    a_sig = np.abs(a) > tol_abs
    n_eff = int(np.max(np.nonzero(a_sig))) if np.any(a_sig) else 0
    a = a[:n_eff + 1]
    b_sig = np.abs(b) > svd_tol * np.max(np.abs(b))
    m_eff = int(np.max(np.nonzero(b_sig)))
    b = b[:m_eff + 1]
    if n_eff < n or m_eff < m:
        flags.append(f"trailing trim: [{n + shift}/{m}] -> [{n_eff + shift}/{m_eff}]")

    if alpha != 1.0:
        a = a * alpha ** (shift + np.arange(len(a), dtype=float))
        b = b * alpha ** np.arange(len(b), dtype=float)
    num = MultiSeries(1, 1, n_eff + shift,
                      {(k + shift,): np.array([a[k]]) for k in range(n_eff + 1)
                       if a[k] != 0})
    den = MultiSeries.from_univariate(b)
    return RationalMap(num, den, (n_eff + shift, m_eff), flags)


# ---- multivariate ---------------------------------------------------------


def pade_multivariate(coeffs: MultiSeries, N: int, M: int,
                      shared_denominator: bool = False,
                      svd_tol: float = DEFAULT_SVD_TOL):
    """Homogeneous [N/M] approximant of a multivariate series.

    Denominator coefficients minimize the homogeneous matching conditions
    over total orders N+1..N+M in least squares with b0 = 1; numerator
    coefficients then come from the convolution conditions on total orders
    0..N.  Vector-valued input is solved per component with independent
    denominators (a list of scalar RationalMaps) unless shared_denominator
    is requested.
    """
    if coeffs.order < N + M:
        raise ValidationError(f"series order {coeffs.order} < N+M = {N + M}")
    if coeffs.dim_in < 2:
        return pade_univariate(coeffs, N, M, svd_tol) if coeffs.dim_out == 1 else \
            [pade_univariate(coeffs.component(j), N, M, svd_tol)
             for j in range(coeffs.dim_out)]
    if coeffs.dim_out > 1 and not shared_denominator:
        return [pade_multivariate(coeffs.component(j), N, M, True, svd_tol)
                for j in range(coeffs.dim_out)]

    d = coeffs.dim_in
    l = coeffs.dim_out
    den_idx = indices_up_to_order(d, M)          # includes (0,...,0) = b0
    hom_idx = [k for deg in range(N + 1, N + M + 1)
               for k in indices_of_order(d, deg)]
    flags: List[str] = []

    if M == 0:
        num = coeffs.truncated(N)
        return RationalMap(num, MultiSeries.constant([1.0], d, 0), (N, 0), flags)

    # rows: one per (component, homogeneous index); columns: denominator coeffs
    rows = []
    for j in range(l):
        for k in hom_idx:
            row = np.zeros(len(den_idx), dtype=complex)
            for col, kb in enumerate(den_idx):
                diff = tuple(a - b for a, b in zip(k, kb))
                if all(x >= 0 for x in diff):
                    row[col] = coeffs.get(diff)[j]
            rows.append(row)
    z = np.array(rows)
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    if scale == 0.0:
        b = np.zeros(len(den_idx), dtype=complex)
        b[0] = 1.0
        flags.append("homogeneous system vanishes; denominator defaults to 1")
    else:
        # b0 = 1: move the first column to the right-hand side
        a_mat = z[:, 1:]
        rhs = -z[:, 0]
        sol, _, rank, sv = np.linalg.lstsq(a_mat, rhs, rcond=svd_tol)
        if rank < a_mat.shape[1]:
            flags.append(f"underdetermined denominator system (rank {rank} of "
                         f"{a_mat.shape[1]}): smallest-norm solution chosen")
        b = np.concatenate([[1.0 + 0j], sol])

    den = MultiSeries(d, 1, M, {k: np.array([b[i]]) for i, k in enumerate(den_idx)
                                if b[i] != 0})
    # numerator via convolution over total orders 0..N
    num_coeffs: Dict[MultiIndex, np.ndarray] = {}
    for k in indices_up_to_order(d, N):
        acc = np.zeros(l, dtype=complex)
        for i, kb in enumerate(den_idx):
            if b[i] == 0:
                continue
            diff = tuple(a - x for a, x in zip(k, kb))
            if all(x >= 0 for x in diff):
                acc += b[i] * coeffs.get(diff)
        if np.any(acc != 0):
            num_coeffs[k] = acc
    num = MultiSeries(d, l, N, num_coeffs)
    return RationalMap(num, den, (N, M), flags)


# ---- serialization --------------------------------------------------------


def rational_to_text(r: RationalMap) -> str:
    lines = [f"pade {r.dim_in} {r.dim_out} {r.type_tag[0]} {r.type_tag[1]}"]
    lines.append("NUMERATOR")
    lines.extend(coeff_lines(r.numerator))
    lines.append("DENOMINATOR")
    lines.extend(coeff_lines(r.denominator))
    return "\n".join(lines) + "\n"


def rationals_to_text(rs: Sequence[RationalMap]) -> str:
    return "".join(rational_to_text(r) for r in rs)


def rationals_from_text(text: str) -> List[RationalMap]:
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.strip().startswith("#")]
    out: List[RationalMap] = []
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "pade" or len(head) != 5:
            raise ValidationError(f"bad rational header: {lines[i]!r}")
        d, l, n, m = (int(t) for t in head[1:])
        i += 1
        if i >= len(lines) or lines[i] != "NUMERATOR":
            raise ValidationError("missing NUMERATOR block")
        i += 1
        num_lines = []
        while i < len(lines) and lines[i] != "DENOMINATOR":
            if lines[i] == "NUMERATOR" or lines[i].startswith("pade "):
                raise ValidationError("missing DENOMINATOR block")
            num_lines.append(lines[i])
            i += 1
        if i >= len(lines):
            raise ValidationError("missing DENOMINATOR block")
        i += 1
        den_lines = []
        while i < len(lines) and not lines[i].startswith("pade "):
            den_lines.append(lines[i])
            i += 1
        num = parse_coeff_lines(num_lines, d, l, n)
        den = parse_coeff_lines(den_lines, d, 1, m)
        out.append(RationalMap(num, den, (n, m)))
    if not out:
        raise ValidationError("no rational blocks found")
    return out


def rational_from_text(text: str) -> RationalMap:
    rs = rationals_from_text(text)
    if len(rs) != 1:
        raise ValidationError(f"expected one rational block, found {len(rs)}")
    return rs[0]
