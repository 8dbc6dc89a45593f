"""The quadrant harmonic function W.

W(x) is the limit of the nonincreasing sequence E[V(x2 + S2(n)); T_x > n],
where V is the renewal function paired with the walk's kill rule.  Each
evaluation is one dynamic-programming run with V-weighted terminal
aggregation; the bracket below the monotone upper value comes from a
Chernoff bound on late horizontal exits combined with the linear growth of
V.  The same machinery with the Doob-transformed kernel (transition weights
V(y2)/V(x2)) yields W(x) = V(x2) * Phat(sigma_x > n), algebraically equal
at every finite n and used as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .dp import ExitSpec, QuadrantMeasure, chernoff_gamma, step_measure
from .errors import InputError
from .steps import StepDistribution

__all__ = [
    "HarmonicEstimate",
    "TailBound",
    "w_series",
    "w_hat_survival",
    "w_check_harmonic",
    "export_w_grid",
]


@dataclass(frozen=True)
class HarmonicEstimate:
    """Bracketed value of W(x)."""

    value: float
    upper: float
    lower: float
    n_used: int
    warned: bool = False
    history: tuple[tuple[int, float], ...] = ()

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class TailBound:
    """Ingredients for the bracket on E[V(x2+S2(sigma)); sigma > n].

    ``phi_min`` is min_s E[exp(-s X1)] and ``s_star`` its argmin, so
    P(sigma_x = k) <= exp(-s* x1) phi_min^k; ``v_slope`` bounds V(u) <= v_slope*u
    (the geometric resummation gives V_weak(u) <= (u+1)/(1-p0)).
    """

    s_star: float
    phi_min: float
    v_slope: float
    max_dy: int

    def tail(self, x, n: int) -> float:
        """Bound on sum_{k>n} E[V(x2+S2(k)); tau>k, sigma=k]."""
        if self.phi_min >= 1.0:
            return math.inf
        if self.phi_min == 0.0:
            return 0.0
        r = self.phi_min
        a = self.v_slope * (x[1] + 0.0)
        b = self.v_slope * self.max_dy
        g = r ** (n + 1) / (1 - r)
        return math.exp(-self.s_star * x[0]) * (
            (a + b * (n + 1)) * g + b * r * g / (1 - r)
        )


def make_tail_bound(sd: StepDistribution, v_slope: float) -> TailBound:
    """Chernoff ingredients for the W bracket."""
    hp = sd.horizontal_pmf()
    if min(hp) >= 0:
        # the walk never moves left: sigma_x is impossible from x1 >= 1
        return TailBound(s_star=0.0, phi_min=0.0, v_slope=v_slope,
                         max_dy=sd.max_abs_dy())

    def neg_mgf(s):
        return math.fsum(p * math.exp(-s * v) for v, p in hp.items())

    res = minimize_scalar(neg_mgf, bounds=(1e-9, 50.0), method="bounded",
                          options={"xatol": 1e-12})
    return TailBound(s_star=float(res.x), phi_min=float(res.fun),
                     v_slope=v_slope, max_dy=sd.max_abs_dy())


def _v_weighted_mass(m: QuadrantMeasure, v_eff: np.ndarray) -> float:
    """sum over the measure of V_eff at the vertical coordinate."""
    lo, col = m.vertical_marginal()
    hi = lo + len(col)
    if hi > len(v_eff):
        raise InputError(f"V table too short: need {hi}, have {len(v_eff)}")
    return float(col @ v_eff[lo:hi])


def w_series(sd: StepDistribution, x, spec: ExitSpec, v_eff: np.ndarray,
             tail_bound: TailBound, n_max: int = 2048, tol: float = 1e-10,
             barrier: int | None = None) -> HarmonicEstimate:
    """Bracketed W(x) = lim_n E[V_eff(x2 + S2(n)); T_x > n].

    The expectation is evaluated along n = 2^k; it is nonincreasing and
    supplies the upper end of the bracket, the Chernoff tail bound the
    lower end.  Stops as soon as the bracket is narrower than ``tol``;
    if that never happens the widest-n estimate is returned with
    ``warned=True``.
    """
    gamma = chernoff_gamma(sd) if barrier is not None else math.inf
    m = QuadrantMeasure.point_mass(x, spec, barrier=barrier, gamma=gamma)
    checkpoints = []
    k = 1
    while k <= n_max:
        checkpoints.append(k)
        k *= 2
    if not checkpoints or checkpoints[-1] != n_max:
        checkpoints.append(n_max)
    history = [(0, _v_weighted_mass(m, v_eff))]
    best = None
    for n_target in checkpoints:
        while m.n < n_target:
            m = step_measure(m, sd, spec)
        upper = _v_weighted_mass(m, v_eff)
        history.append((m.n, upper))
        width = tail_bound.tail(x, m.n)
        # barrier bias: leaked mass never horizontally killed again
        if m.barrier is not None and m.leaked_total > 0:
            _, col = m.vertical_marginal()
            vmax_reach = x[1] + m.n * tail_bound.max_dy
            width += (m.leaked_total * math.exp(-m.gamma * (m.barrier + 1))
                      * tail_bound.v_slope * vmax_reach)
        # float accumulation allowance for the DP sums
        width += 1e-13 * max(1.0, upper) * math.sqrt(max(m.n, 1))
        best = HarmonicEstimate(
            value=upper - 0.5 * min(width, upper),
            upper=upper,
            lower=max(upper - width, 0.0),
            n_used=m.n,
            warned=False,
            history=tuple(history),
        )
        if best.width <= tol:
            return best
    return HarmonicEstimate(
        value=best.value, upper=best.upper, lower=best.lower,
        n_used=best.n_used, warned=True, history=best.history,
    )


def w_hat_survival(sd: StepDistribution, x, spec: ExitSpec,
                   v_eff: np.ndarray, n_max: int) -> float:
    """V_eff(x2) * Phat(sigma_x > n_max) under the V-transformed kernel.

    The kernel Phat(x, y) = V_eff(y2)/V_eff(x2) P(step) absorbs the
    vertical kill (V_eff vanishes at killed heights); only the horizontal
    kill removes mass.  Algebraically equal to the w_series expectation at
    the same n.
    """
    x1, x2 = int(x[0]), int(x[1])
    t = spec.threshold
    if x1 < t or x2 < t:
        raise InputError(f"start {x} is outside the survival region")
    if v_eff[x2] <= 0:
        raise InputError("V_eff vanishes at the starting height")
    atoms = [(int(dx), int(dy), float(w)) for dx, dy, w in sd.atoms]
    dx_lo = min(a[0] for a in atoms)
    dx_hi = max(a[0] for a in atoms)
    dy_lo = min(a[1] for a in atoms)
    dy_hi = max(a[1] for a in atoms)
    A = np.array([[1.0]])
    lo1, lo2 = x1, x2
    for n in range(n_max):
        H1, H2 = A.shape
        hi2 = lo2 + H2 - 1
        need = hi2 + dy_hi + 1
        if need > len(v_eff):
            raise InputError(f"V table too short: need {need}, have {len(v_eff)}")
        src_v = v_eff[lo2:hi2 + 1]
        new = np.zeros((H1 + dx_hi - dx_lo, H2 + dy_hi - dy_lo))
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_src = np.where(src_v > 0, 1.0 / np.where(src_v > 0, src_v, 1.0), 0.0)
        for dx, dy, w in atoms:
            tgt_v = v_eff[lo2 + dy:hi2 + dy + 1]
            ratio = w * tgt_v * inv_src
            new[dx - dx_lo:dx - dx_lo + H1, dy - dy_lo:dy - dy_lo + H2] += (
                A * ratio[None, :]
            )
        nlo1, nlo2 = lo1 + dx_lo, lo2 + dy_lo
        # horizontal kill (the sigma event)
        if nlo1 < t:
            cut = t - nlo1
            new = new[cut:, :]
            nlo1 = t
        # heights below threshold carry V_eff = 0 already; drop the dead edge
        if nlo2 < t:
            cut = t - nlo2
            new = new[:, cut:]
            nlo2 = t
        A, lo1, lo2 = new, nlo1, nlo2
    return float(v_eff[x2] * A.sum())


def w_check_harmonic(sd: StepDistribution, w_eval, x, spec: ExitSpec) -> float:
    """|W(x) - sum_steps p W(x + step) 1{survive}|."""
    t = spec.threshold
    s = 0.0
    for dx, dy, w in sd.atoms:
        nx = (x[0] + dx, x[1] + dy)
        ok = True
        if spec.kills_x1 and nx[0] < t:
            ok = False
        if spec.kills_x2 and nx[1] < t:
            ok = False
        if ok:
            s += w * w_eval(nx)
    return abs(w_eval(x) - s)


def export_w_grid(estimates: dict[tuple[int, int], HarmonicEstimate], fh) -> None:
    """CSV export: x1, x2, lower, value, upper, n_used."""
    fh.write("x1,x2,lower,value,upper,n_used\n")
    for (x1, x2) in sorted(estimates):
        e = estimates[(x1, x2)]
        fh.write(f"{x1},{x2},{e.lower!r},{e.value!r},{e.upper!r},{e.n_used}\n")
