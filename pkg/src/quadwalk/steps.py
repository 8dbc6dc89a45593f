"""Finite-support lattice step distributions.

A step set is a weighted list of integer increments (dx, dy).  This module
normalizes and validates step sets, computes exact first and second moments,
decomposes each coordinate into its arithmetic sublattice a + d*Z, and
implements exponential tilting together with a Newton solver that finds the
tilt achieving a prescribed drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSupportError,
    EmptyStepSetError,
    InfeasibleDriftError,
    NegativeWeightError,
    ZeroTotalWeightError,
)

__all__ = [
    "StepDistribution",
    "Moments",
    "LatticeStructure",
    "TiltParams",
    "validate_steps",
    "compute_moments",
    "tilt",
    "solve_drift",
    "lattice_decompose",
    "in_lattice_support",
    "load_steps",
    "dump_steps",
    "singular_steps",
]


@dataclass(frozen=True)
class StepDistribution:
    """Normalized finite-support step law on Z^2.

    ``atoms`` holds distinct (dx, dy, weight) triples with the weights
    summing to 1; ``total_weight`` is the weight sum before normalization.
    """

    atoms: tuple[tuple[int, int, float], ...]
    total_weight: float
    normalized: bool = True

    def probabilities(self):
        return [(dx, dy, w) for dx, dy, w in self.atoms]

    def vertical_pmf(self) -> dict[int, float]:
        """Marginal law of dy."""
        out: dict[int, float] = {}
        for _, dy, w in self.atoms:
            out[dy] = out.get(dy, 0.0) + w
        return out

    def horizontal_pmf(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for dx, _, w in self.atoms:
            out[dx] = out.get(dx, 0.0) + w
        return out

    def max_abs_dx(self) -> int:
        return max(abs(dx) for dx, _, _ in self.atoms)

    def max_abs_dy(self) -> int:
        return max(abs(dy) for _, dy, _ in self.atoms)


@dataclass(frozen=True)
class Moments:
    """First moment and central covariance of a step law."""

    mu: tuple[float, float]
    sigma: tuple[tuple[float, float], float]  # ((sig1^2, sig2^2), rho)

    @property
    def mu1(self) -> float:
        return self.mu[0]

    @property
    def mu2(self) -> float:
        return self.mu[1]

    @property
    def sigma11(self) -> float:
        return self.sigma[0][0]

    @property
    def sigma22(self) -> float:
        return self.sigma[0][1]

    @property
    def rho(self) -> float:
        return self.sigma[1]


@dataclass(frozen=True)
class LatticeStructure:
    """Arithmetic decomposition X_i = a_i + d_i * Y_i with Y aperiodic."""

    a1: int
    d1: int
    a2: int
    d2: int


@dataclass(frozen=True)
class TiltParams:
    """Tilt vector h and the moment generating value phi(h)."""

    h: tuple[float, float]
    phi: float


def validate_steps(raw) -> StepDistribution:
    """Merge duplicate increments, validate weights and normalize.

    ``raw`` is an iterable of ((dx, dy), weight) or (dx, dy, weight).
    """
    items = list(raw)
    if not items:
        raise EmptyStepSetError("step set is empty")
    merged: dict[tuple[int, int], float] = {}
    for item in items:
        if len(item) == 2:
            (dx, dy), w = item
        else:
            dx, dy, w = item
        dx, dy, w = int(dx), int(dy), float(w)
        if w < 0:
            raise NegativeWeightError(f"negative weight {w} for step ({dx},{dy})")
        merged[(dx, dy)] = merged.get((dx, dy), 0.0) + w
    total = math.fsum(merged.values())
    if total <= 0:
        raise ZeroTotalWeightError("total weight is zero")
    atoms = tuple(
        (dx, dy, w / total) for (dx, dy), w in sorted(merged.items()) if w > 0
    )
    if not atoms:
        raise ZeroTotalWeightError("total weight is zero")
    return StepDistribution(atoms=atoms, total_weight=total, normalized=True)


def singular_steps() -> StepDistribution:
    """Uniform law on {(1,-1), (1,1), (-1,1)}."""
    return validate_steps([((1, -1), 1.0), ((1, 1), 1.0), ((-1, 1), 1.0)])


def compute_moments(sd: StepDistribution) -> Moments:
    """Exact first and second central moments of the atom law."""
    m1 = math.fsum(dx * w for dx, _, w in sd.atoms)
    m2 = math.fsum(dy * w for _, dy, w in sd.atoms)
    s11 = math.fsum((dx - m1) ** 2 * w for dx, _, w in sd.atoms)
    s22 = math.fsum((dy - m2) ** 2 * w for _, dy, w in sd.atoms)
    s12 = math.fsum((dx - m1) * (dy - m2) * w for dx, dy, w in sd.atoms)
    return Moments(mu=(m1, m2), sigma=((s11, s22), s12))


def _phi(sd: StepDistribution, h) -> float:
    h1, h2 = h
    return math.fsum(w * math.exp(h1 * dx + h2 * dy) for dx, dy, w in sd.atoms)


def tilt(sd: StepDistribution, h) -> tuple[StepDistribution, TiltParams]:
    """Exponentially tilt the law: weights scaled by exp(h.step)/phi(h)."""
    h1, h2 = float(h[0]), float(h[1])
    weights = [w * math.exp(h1 * dx + h2 * dy) for dx, dy, w in sd.atoms]
    phi = math.fsum(weights)
    atoms = tuple(
        (dx, dy, wt / phi) for (dx, dy, _), wt in zip(sd.atoms, weights)
    )
    return StepDistribution(atoms=atoms, total_weight=phi), TiltParams(h=(h1, h2), phi=phi)


def _grad_hess_logphi(sd: StepDistribution, h):
    """Gradient (= tilted mean) and Hessian (= tilted covariance) of log phi."""
    h = np.asarray(h, dtype=float)
    dx = np.array([a[0] for a in sd.atoms], dtype=float)
    dy = np.array([a[1] for a in sd.atoms], dtype=float)
    w = np.array([a[2] for a in sd.atoms], dtype=float)
    logits = h[0] * dx + h[1] * dy + np.log(w)
    logits -= logits.max()
    p = np.exp(logits)
    p /= p.sum()
    mx = float(p @ dx)
    my = float(p @ dy)
    cxx = float(p @ (dx - mx) ** 2)
    cyy = float(p @ (dy - my) ** 2)
    cxy = float(p @ ((dx - mx) * (dy - my)))
    return np.array([mx, my]), np.array([[cxx, cxy], [cxy, cyy]])


def solve_drift(sd: StepDistribution, target_mu, tol: float = 1e-13,
                max_iter: int = 100) -> TiltParams:
    """Find h with tilted drift equal to ``target_mu`` by damped Newton.

    Newton iterates on grad log phi(h) = target; divergence of |h| beyond
    1e3 is reported as an infeasible target (on or outside the hull).
    """
    target = np.asarray(target_mu, dtype=float)
    h = np.zeros(2)
    grad, hess = _grad_hess_logphi(sd, h)
    res = float(np.linalg.norm(grad - target))
    for _ in range(max_iter):
        if res <= tol:
            break
        det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
        if not np.isfinite(det) or abs(det) < 1e-300:
            raise DegenerateSupportError(
                "singular tilt Hessian: step support is degenerate"
            )
        try:
            delta = np.linalg.solve(hess, target - grad)
        except np.linalg.LinAlgError as exc:
            raise DegenerateSupportError(str(exc)) from exc
        # damped step: halve until the residual does not increase
        step = 1.0
        for _ in range(60):
            h_new = h + step * delta
            grad_new, hess_new = _grad_hess_logphi(sd, h_new)
            res_new = float(np.linalg.norm(grad_new - target))
            if res_new <= res or res_new <= tol:
                break
            step *= 0.5
        h, grad, hess, res = h_new, grad_new, hess_new, res_new
        if np.linalg.norm(h) > 1e3:
            raise InfeasibleDriftError(
                f"target drift {tuple(target)} infeasible: |h| diverged"
            )
    if res > tol:
        raise InfeasibleDriftError(
            f"target drift {tuple(target)} not reached: residual {res:.3e}"
        )
    return TiltParams(h=(float(h[0]), float(h[1])), phi=_phi(sd, h))


def lattice_decompose(sd: StepDistribution) -> LatticeStructure:
    """Maximal d_i with support(X_i) contained in a_i + d_i*Z, 0 <= a_i < d_i."""
    out = []
    for idx in (0, 1):
        vals = sorted({atom[idx] for atom in sd.atoms})
        if len(vals) == 1:
            raise DegenerateSupportError(
                f"coordinate {idx + 1} has a single support value {vals[0]}"
            )
        d = 0
        for v in vals[1:]:
            d = math.gcd(d, v - vals[0])
        a = vals[0] % d
        out.append((a, d))
    return LatticeStructure(a1=out[0][0], d1=out[0][1], a2=out[1][0], d2=out[1][1])


def in_lattice_support(ls: LatticeStructure, n: int, z) -> bool:
    """True iff z is reachable modulo the lattice after n steps: (z_i - a_i n) % d_i == 0."""
    z1, z2 = int(z[0]), int(z[1])
    return (z1 - ls.a1 * n) % ls.d1 == 0 and (z2 - ls.a2 * n) % ls.d2 == 0


def load_steps(path) -> StepDistribution:
    """Read a step-set JSON file: {"steps": [{"dx": int, "dy": int, "w": number}, ...]}."""
    with open(path) as fh:
        obj = json.load(fh)
    return validate_steps([(s["dx"], s["dy"], s["w"]) for s in obj["steps"]])


def dump_steps(sd: StepDistribution, path) -> None:
    obj = {"steps": [{"dx": dx, "dy": dy, "w": w} for dx, dy, w in sd.atoms]}
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
