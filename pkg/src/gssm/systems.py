"""Built-in example systems and the brute-force oracles used to test them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import ValidationError
from .series import MultiSeries, compose_truncated
from .ssm import PolySystem, SSMModel

SYSTEM_IDS = ("euler", "dauchot_manneville", "imaginary_sing", "shaw_pierre", "custom")


@dataclass
class NamedSystem:
    id: str
    parameters: Dict[str, float]
    realization: PolySystem
    notes: str = ""


def _euler_system() -> PolySystem:
    # x' = x^2, y' = x - y: a one-dimensional slow manifold y = h(x) carries
    # the divergent-series resummation example
    a = np.array([[0.0, 0.0], [1.0, -1.0]])
    f = MultiSeries(2, 2, 2, {(2, 0): [1.0, 0.0]})
    return PolySystem(a, f)


def _dauchot_manneville_system(s1: float, s2: float) -> PolySystem:
    a = np.array([[s1, 1.0], [0.0, s2]])
    f = MultiSeries(2, 2, 2, {(1, 1): [1.0, 0.0], (2, 0): [0.0, -1.0]})
    return PolySystem(a, f)


def _imaginary_sing_system() -> PolySystem:
    # x' = x, y' = -y + 2x/(x^2+1)^2: rational right-hand side; the solver
    # path uses the exact parametrization y = x/(1+x^2) instead
    a = np.array([[1.0, 0.0], [2.0, -1.0]])
    f = MultiSeries.zero(2, 2, 2)

    def rhs(x):
        return np.array([x[0], -x[1] + 2.0 * x[0] / (x[0] ** 2 + 1.0) ** 2])

    return PolySystem(a, f, rhs_callable=rhs)


def _shaw_pierre_system(k: float, c: float, gamma: float,
                        eps: float, omega_f: float) -> PolySystem:
    # two unit masses, springs/dampers to ground and between, cubic spring on
    # the first mass; state (q1, q1', q2, q2')
    a = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-2.0 * k, -2.0 * c, k, c],
        [0.0, 0.0, 0.0, 1.0],
        [k, c, -2.0 * k, -2.0 * c],
    ])
    f = MultiSeries(4, 4, 3, {(3, 0, 0, 0): [0.0, -gamma, 0.0, 0.0]})
    return PolySystem(a, f, forcing_vector=np.array([0.0, 1.0, 0.0, 0.0]),
                      forcing_amplitude=eps, forcing_frequency=omega_f)


DEFAULTS: Dict[str, Dict[str, float]] = {
    "euler": {},
    "dauchot_manneville": {"s1": -0.038, "s2": -1.0},
    "imaginary_sing": {},
    "shaw_pierre": {"k": 3.0, "c": 0.003, "gamma": 0.5, "eps": 0.0, "omega_f": 0.0},
    "custom": {},
}


def make_system(system_id: str, **params) -> NamedSystem:
    if system_id not in SYSTEM_IDS:
        raise ValidationError(f"unknown system id {system_id!r}; "
                              f"known: {', '.join(SYSTEM_IDS)}")
    merged = dict(DEFAULTS[system_id])
    for key, val in params.items():
        if system_id != "custom" and key not in merged:
            raise ValidationError(f"unknown parameter {key!r} for {system_id}")
        merged[key] = val
    if system_id == "euler":
        return NamedSystem(system_id, merged, _euler_system())
    if system_id == "dauchot_manneville":
        return NamedSystem(system_id, merged,
                           _dauchot_manneville_system(merged["s1"], merged["s2"]))
    if system_id == "imaginary_sing":
        return NamedSystem(system_id, merged, _imaginary_sing_system(),
                           notes="rational right-hand side; use imaginary_sing_model")
    if system_id == "shaw_pierre":
        return NamedSystem(system_id, merged,
                           _shaw_pierre_system(merged["k"], merged["c"],
                                               merged["gamma"], merged["eps"],
                                               merged["omega_f"]))
    # custom: caller supplies the realization pieces directly
    if "linear_part" not in params or "nonlinearity" not in params:
        raise ValidationError("custom system needs linear_part and nonlinearity")
    sys = PolySystem(params["linear_part"], params["nonlinearity"],
                     forcing_vector=params.get("forcing_vector"),
                     forcing_amplitude=params.get("forcing_amplitude", 0.0),
                     forcing_frequency=params.get("forcing_frequency", 0.0))
    return NamedSystem("custom", {}, sys)


# ---- closed forms and oracles -----------------------------------------------


def euler_series(order: int) -> MultiSeries:
    """The alternating factorial series c_n = (-1)^(n+1) (n-1)!, c_0 = 0."""
    coeffs = {(n,): np.array([complex((-1) ** (n + 1) * math.factorial(n - 1))])
              for n in range(1, order + 1)}
    return MultiSeries(1, 1, order, coeffs)


def euler_exact(x: float) -> float:
    """Stieltjes integral representation of the resummed series.

    h(x) = integral_0^inf exp(-t)/(1 + x t) dt; defined off the negative
    real axis, here restricted to x > 0.
    """
    if x <= 0:
        raise ValidationError("euler_exact requires x > 0")
    val, err = quad(lambda t: math.exp(-t) / (1.0 + x * t), 0.0, np.inf,
                    epsabs=1e-12, epsrel=1e-12, limit=400)
    if err > 1e-8:
        raise ValidationError(f"quadrature did not converge: err={err:.2e}")
    return float(x * val)


def odd_geometric_series(order: int) -> MultiSeries:
    """Series of x/(1+x^2): alternating odd powers."""
    coeffs = {(2 * n + 1,): np.array([complex((-1) ** n)])
              for n in range(0, (order - 1) // 2 + 1)}
    return MultiSeries(1, 1, order, coeffs)


def imaginary_sing_model(order: int) -> SSMModel:
    """Exact unstable-manifold parametrization y = x/(1+x^2), truncated.

    Built directly from the closed form (the system's right-hand side is
    rational, so the polynomial solver does not apply).  The chart is the
    unit-norm eigenvector gauge: x = p/sqrt(2), and p' = p exactly.
    """
    scale = 1.0 / math.sqrt(2.0)
    x_of_p = MultiSeries(1, 1, order, {(1,): [scale]})
    h = odd_geometric_series(order)
    y_of_p = compose_truncated(h, x_of_p, order)
    w = MultiSeries.from_components([x_of_p, y_of_p])
    r = MultiSeries(1, 1, order, {(1,): [1.0]})
    return SSMModel(n=2, d=1, style="graph", order=order,
                    master_eigenvalues=np.array([1.0 + 0j]),
                    master_right=np.array([[scale], [scale]], dtype=complex),
                    W=w, R=r,
                    flags=["planted from the exact closed-form parametrization"])


@dataclass
class FixedPoint:
    location: np.ndarray
    eigenvalues: np.ndarray
    label: str


def _stability_label(eigs: np.ndarray, tol: float = 1e-10) -> str:
    re = eigs.real
    if np.all(re < -tol):
        return "stable"
    if np.all(re > tol):
        return "unstable"
    if np.any(np.abs(re) <= tol):
        return "marginal"
    return "saddle"


def fixed_points_oracle(sys: PolySystem, box: List[Tuple[float, float]],
                        seeds_per_axis: int = 7,
                        dedupe_tol: float = 1e-8) -> List[FixedPoint]:
    """Damped-Newton roots of the autonomous right-hand side from a seed grid."""
    n = sys.dim
    if len(box) != n:
        raise ValidationError("box must give one (lo, hi) interval per state")
    axes = [np.linspace(lo, hi, seeds_per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    seeds = np.stack([m.ravel() for m in mesh], axis=1)

    roots: List[np.ndarray] = []
    for seed in seeds:
        x = seed.astype(float).copy()
        converged = False
        for _ in range(120):
            fval = sys.autonomous_rhs(x)
            fnorm = np.linalg.norm(fval)
            if fnorm < 1e-12 * (1.0 + np.linalg.norm(x)):
                converged = True
                break
            jac = sys.jacobian(x)
            step, *_ = np.linalg.lstsq(jac, -fval, rcond=None)
            # backtracking: accept the first step with residual decrease
            lam = 1.0
            for _ in range(40):
                trial = x + lam * step
                if np.linalg.norm(sys.autonomous_rhs(trial)) < fnorm:
                    break
                lam *= 0.5
            else:
                break
            x = x + lam * step
        if not converged:
            continue
        # polish: plain Newton past the residual exit, so clusters around a
        # degenerate root (linear convergence) collapse to one point
        for _ in range(60):
            fval = sys.autonomous_rhs(x)
            step, *_ = np.linalg.lstsq(sys.jacobian(x), -fval, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            x = x + step
            if np.linalg.norm(step) < 1e-15 * (1.0 + np.linalg.norm(x)):
                break
        if any(lo - 1e-9 > xi or xi > hi + 1e-9
               for xi, (lo, hi) in zip(x, box)):
            continue
        if any(np.linalg.norm(x - r) < dedupe_tol * (1 + np.linalg.norm(r))
               for r in roots):
            continue
        roots.append(x)

    out = []
    for r in sorted(roots, key=lambda v: tuple(v)):
        eigs = np.linalg.eigvals(sys.jacobian(r))
        out.append(FixedPoint(r, eigs, _stability_label(eigs)))
    return out


# closed forms for the triangular-system manifold graph y = h(x):
# h(x) = -x^2/(2 s1 - s2) - 2 x^3/((2 s1 - s2)^2 (3 s1 - s2)) + ...


def dauchot_w2(s1: float, s2: float) -> float:
    return -1.0 / (2.0 * s1 - s2)


def dauchot_w3(s1: float, s2: float) -> float:
    return -2.0 / ((2.0 * s1 - s2) ** 2 * (3.0 * s1 - s2))
