"""Ladder heights of the vertical component and their renewal functions.

The weak descending ladder height is the nonnegative overshoot -S2 at the
first time the vertical walk is <= 0; the strict ascending ladder height is
S2 at the first time it is > 0.  Both are computed by evolving the absorbed
sub-probability measure of the vertical walk.  Because the absorption of a
driftless walk is heavy tailed in time (the surviving mass decays like
1/sqrt(N)), the iteration alone cannot certify tolerances like 1e-10; the
remaining alive mass is therefore redistributed exactly using the bounded
solutions of the step recurrence (characteristic roots inside the unit
disk), which give the crossing law from any height in closed form.

The renewal series V built from the weak ladder law satisfies the one-step
harmonicity identity under exactly one kill rule; ``resolve_convention``
finds which one and reports the shift needed to pair V with a walk killed
on nonpositive values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConventionError,
    DegenerateSupportError,
    HorizonTooSmallError,
    InputError,
    NonzeroDriftError,
    ToleranceNotReachedError,
    UnsupportedLatticeError,
)
from .steps import StepDistribution

__all__ = [
    "BoundaryConvention",
    "LadderDist",
    "RenewalTable",
    "descending_ladder",
    "ascending_ladder",
    "renewal_V",
    "renewal_H",
    "kappa",
    "harmonic_defect_V",
    "harmonicity_residual",
    "resolve_convention",
    "ConventionReport",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class BoundaryConvention(enum.Enum):
    """Kill rule for a coordinate: exit on <= 0, or exit on < 0."""

    KILL_ON_NONPOSITIVE = "nonpositive"
    KILL_ON_NEGATIVE = "negative"


@dataclass(frozen=True)
class LadderDist:
    """Ladder height law with truncation bookkeeping."""

    pmf: dict[int, float]
    truncation_error: float
    mean: float
    kind: str = ""  # "weak-descending" | "strict-descending" | "strict-ascending"

    def max_value(self) -> int:
        return max(self.pmf) if self.pmf else 0


@dataclass(frozen=True)
class RenewalTable:
    """Tabulated renewal function on integers 0..U."""

    kind: str  # "V" or "H"
    values: np.ndarray
    U: int

    def __call__(self, u: int) -> float:
        if u < 0:
            return 0.0
        if u > self.U:
            raise InputError(f"renewal table of size {self.U} queried at {u}")
        return float(self.values[u])

    def to_csv(self, fh) -> None:
        fh.write("u,value\n")
        for u in range(self.U + 1):
            fh.write(f"{u},{self.values[u]!r}\n")


def _vertical_pmf(sd: StepDistribution) -> dict[int, float]:
    return sd.vertical_pmf()


def _check_zero_drift(pmf: dict[int, float], tol: float = 1e-10) -> None:
    mean = math.fsum(v * p for v, p in pmf.items())
    if abs(mean) > tol:
        raise NonzeroDriftError(f"vertical drift {mean:.3e} is not zero")


class CrossingSolver:
    """First-entry law into (-inf, 0] for a zero-drift bounded lattice walk.

    For a walk with step pmf p on [-d, u] the function h -> P(first entry
    at -j | start h) solves the step recurrence for h >= 1 with indicator
    boundary values on {1-d, ..., 0}.  The bounded solutions are spanned by
    the constant together with z^h over the d-1 characteristic roots with
    |z| < 1, after removing the double root at z = 1 forced by zero drift.
    """

    def __init__(self, pmf: dict[int, float]):
        vals = sorted(pmf)
        self.d = -vals[0]
        self.u = vals[-1]
        if self.d < 1 or self.u < 1:
            raise DegenerateSupportError(
                "crossing solver needs both up and down steps"
            )
        deg = self.u + self.d
        coeffs = np.zeros(deg + 1)
        for s, p in pmf.items():
            coeffs[s + self.d] += p
        coeffs[self.d] -= 1.0
        # deflate the double root at z=1 (zero drift): two synthetic divisions
        quot = coeffs
        for _ in range(2):
            quot, rem = self._divide_by_z_minus_1(quot)
            if abs(rem) > 1e-9:
                raise NonzeroDriftError(
                    f"characteristic polynomial remainder {rem:.2e} at z=1"
                )
        roots = np.roots(quot[::-1]) if len(quot) > 1 else np.array([])
        inside = [z for z in roots if abs(z) < 1 - 1e-8]
        on_circle = [z for z in roots if 1 - 1e-8 <= abs(z) <= 1 + 1e-8]
        if on_circle:
            raise UnsupportedLatticeError(
                "vertical step law has extra characteristic roots on the unit "
                "circle (sublattice with zero offset); rescale the walk"
            )
        if len(inside) != self.d - 1:
            raise UnsupportedLatticeError(
                f"expected {self.d - 1} interior roots, found {len(inside)}"
            )
        self.roots = np.array([1.0 + 0j] + inside)
        # boundary rows x = 0, -1, ..., 1-d so that column j solves the
        # indicator at x = -j
        xs = np.arange(0, -self.d, -1)
        M = self.roots[None, :] ** xs[:, None]
        self.coeffs = np.linalg.solve(M, np.eye(self.d, dtype=complex))

    @staticmethod
    def _divide_by_z_minus_1(c):
        # c[k] is the coefficient of z^k; returns quotient and remainder
        n = len(c) - 1
        quot = np.zeros(n, dtype=float)
        carry = 0.0
        for k in range(n, 0, -1):
            carry += c[k]
            quot[k - 1] = carry
        rem = carry + c[0]
        return quot, rem

    def overshoot_matrix(self, heights: np.ndarray) -> np.ndarray:
        """X[h_i, j] = P(first entry into <=0 lands at -j | start heights[i])."""
        powers = self.roots[None, :] ** heights[:, None]
        X = (powers @ self.coeffs).real
        return np.clip(X, 0.0, 1.0)

    def mean_entry_position(self, heights: np.ndarray) -> np.ndarray:
        """E[position at first entry into <=0 | start h] = -sum_j j X_h(j)."""
        X = self.overshoot_matrix(heights)
        j = np.arange(self.d)
        return -(X @ j)


def _ladder_engine(pmf: dict[int, float], strict: bool, tol: float,
                   max_steps: int, exact_tail: bool,
                   completion_after: int = 512):
    """Absorbing iteration for the descending ladder of the walk with law ``pmf``.

    Weak (strict=False): absorb on position <= 0, overshoot -pos >= 0.
    Strict: absorb on position < 0, overshoot -pos >= 1.
    Returns (overshoot pmf dict, truncation_error, steps_used).
    """
    _check_zero_drift(pmf)
    vals = sorted(pmf)
    smin, smax = vals[0], vals[-1]
    if smin >= 0:
        raise DegenerateSupportError("walk has no down steps: ladder undefined")
    if smax <= 0:
        raise DegenerateSupportError("walk has no up steps: absorption trivial")
    kernel = np.zeros(smax - smin + 1)
    for s, p in pmf.items():
        kernel[s - smin] = p
    d = -smin
    lo = 0 if strict else 1          # lowest alive height
    thr = -1 if strict else 0        # absorb on position <= thr
    absorbed = np.zeros(d + 1)       # index = overshoot -pos
    # start at height 0: a single step may absorb immediately
    alive = np.array([1.0])
    alive_lo = 0
    dropped = 0.0
    steps = 0
    while True:
        steps += 1
        if len(alive) == 0:
            alive = np.zeros(1)
            break
        conv = np.convolve(alive, kernel)
        conv_lo = alive_lo + smin
        # split absorbed (position <= thr) from alive (position >= lo)
        n_abs = thr - conv_lo + 1
        if n_abs > 0:
            chunk = conv[:n_abs]
            for i, m in enumerate(chunk):
                if m:
                    absorbed[-(conv_lo + i)] += m
            conv = conv[n_abs:]
            conv_lo = thr + 1
        if conv_lo < lo:  # only when thr+1 < lo, i.e. never; kept for clarity
            conv = conv[lo - conv_lo:]
            conv_lo = lo
        # trim the far tail of hard-underflowed heights
        if len(conv) and conv[-1] <= 1e-300:
            nz = np.where(conv > 1e-300)[0]
            if len(nz) == 0:
                dropped += float(conv.sum())
                conv = conv[:0]
            elif nz[-1] + 1 < len(conv):
                dropped += float(conv[nz[-1] + 1:].sum())
                conv = conv[:nz[-1] + 1]
        alive, alive_lo = conv, conv_lo
        rest = float(alive.sum())
        if rest <= tol:
            break
        if exact_tail and steps >= completion_after:
            solver = CrossingSolver(pmf)
            heights = np.arange(alive_lo, alive_lo + len(alive))
            if strict:
                X = solver.overshoot_matrix(heights + 1)
                absorbed[1:solver.d + 1] += alive @ X
            else:
                X = solver.overshoot_matrix(np.maximum(heights, 1))
                absorbed[:solver.d] += alive @ X
            alive = np.zeros(1)
            break
        if steps >= max_steps:
            partial = {j: float(m) for j, m in enumerate(absorbed) if m > 0}
            raise ToleranceNotReachedError(
                f"ladder iteration residual {rest:.3e} > tol {tol:.3e} "
                f"after {steps} steps",
                residual=rest + dropped,
                partial=partial,
            )
    total = math.fsum(absorbed)
    trunc = max(0.0, 1.0 - total)
    out = {j: float(m) for j, m in enumerate(absorbed) if m > 0.0}
    return out, trunc, steps


def _make_ladder(pmf_steps, strict, tol, max_steps, exact_tail, kind,
                 completion_after=512) -> LadderDist:
    pmf, trunc, _ = _ladder_engine(pmf_steps, strict, tol, max_steps,
                                   exact_tail, completion_after)
    mean = math.fsum(j * p for j, p in pmf.items())
    return LadderDist(pmf=pmf, truncation_error=trunc, mean=mean, kind=kind)


def descending_ladder(sd: StepDistribution,
                      conv: BoundaryConvention = BoundaryConvention.KILL_ON_NONPOSITIVE,
                      tol: float = 1e-10, max_steps: int = 10 ** 6,
                      exact_tail: bool = True,
                      completion_after: int = 512) -> LadderDist:
    """Descending ladder height law of the vertical component.

    KILL_ON_NONPOSITIVE gives the weak ladder (-S2 at the first time
    S2 <= 0, overshoot 0 allowed); KILL_ON_NEGATIVE the strict one.
    """
    pmf = _vertical_pmf(sd)
    strict = conv is BoundaryConvention.KILL_ON_NEGATIVE
    kind = "strict-descending" if strict else "weak-descending"
    return _make_ladder(pmf, strict, tol, max_steps, exact_tail, kind,
                        completion_after)


def ascending_ladder(sd: StepDistribution, tol: float = 1e-10,
                     max_steps: int = 10 ** 6, exact_tail: bool = True,
                     completion_after: int = 512) -> LadderDist:
    """Strict ascending ladder height law: S2 at the first time S2 > 0.

    Computed as the strict descending ladder of the reflected walk.
    """
    pmf = {-v: p for v, p in _vertical_pmf(sd).items()}
    return _make_ladder(pmf, True, tol, max_steps, exact_tail,
                        "strict-ascending", completion_after)


def _conditioned_positive(ld: LadderDist):
    p0 = ld.pmf.get(0, 0.0)
    if p0 >= 1.0 - 1e-15:
        raise InputError("ladder law has all mass at overshoot 0")
    jmax = ld.max_value()
    arr = np.zeros(jmax + 1)
    for j, p in ld.pmf.items():
        if j > 0:
            arr[j] = p / (1.0 - p0)
    return p0, arr


def renewal_V(ld: LadderDist, U: int) -> RenewalTable:
    """V(u) = 1_{u>=0} + sum_k P(chi_1 + ... + chi_k <= u) for the weak law.

    The atom at 0 is resummed geometrically: with p0 = P(chi = 0) and
    chi~ the law conditioned positive, V(u) = (1/(1-p0)) sum_{k>=0}
    P(chi~_1 + ... + chi~_k <= u), a finite sum since chi~ >= 1.
    """
    if ld.mean <= 0:
        raise InputError("weak ladder mean must be positive for V")
    p0, pos = _conditioned_positive(ld)
    S = np.zeros(U + 1)
    f = np.zeros(U + 1)
    f[0] = 1.0
    while f.any():
        S += np.cumsum(f)
        f = np.convolve(f, pos)[:U + 1]
    return RenewalTable(kind="V", values=S / (1.0 - p0), U=U)


def renewal_H(ld: LadderDist, U: int) -> RenewalTable:
    """H(u) = 1_{u>0} + sum_k P(chi+_1 + ... + chi+_k < u), strict ascent."""
    if ld.pmf.get(0, 0.0) > 0:
        raise InputError("strict ascending ladder law cannot charge 0")
    jmax = ld.max_value()
    arr = np.zeros(jmax + 1)
    for j, p in ld.pmf.items():
        arr[j] = p
    H = np.zeros(U + 1)
    if U >= 1:
        H[1:] = 1.0
        f = arr[:U + 1].copy() if len(arr) > U + 1 else np.pad(arr, (0, U + 1 - len(arr)))
        while f.any():
            # P(Z_k < u) = P(Z_k <= u-1): shift the CDF right by one
            H[1:] += np.cumsum(f)[:-1]
            f = np.convolve(f, arr)[:U + 1]
    return RenewalTable(kind="H", values=H, U=U)


def kappa(ld: LadderDist) -> float:
    """sqrt(2/pi) times the ladder mean."""
    return SQRT_2_OVER_PI * ld.mean


def harmonic_defect_V(sd: StepDistribution, x2: int,
                      conv: BoundaryConvention = BoundaryConvention.KILL_ON_NONPOSITIVE,
                      horizon: int = 4096, band: float = 1e-9,
                      exact_tail: bool = True) -> float:
    """x2 - E[x2 + S2(tau)] for the vertical walk absorbed at the boundary.

    This is the standard alternative harmonic function of the killed walk;
    the alive mass left at the horizon is completed exactly through the
    crossing solver (or reported against ``band`` when exact_tail=False).
    """
    pmf = _vertical_pmf(sd)
    _check_zero_drift(pmf)
    if x2 < 1:
        raise InputError("x2 must be >= 1")
    vals = sorted(pmf)
    smin, smax = vals[0], vals[-1]
    kernel = np.zeros(smax - smin + 1)
    for s, p in pmf.items():
        kernel[s - smin] = p
    strict = conv is BoundaryConvention.KILL_ON_NEGATIVE
    thr = -1 if strict else 0
    alive = np.array([1.0])
    alive_lo = x2
    e_abs = 0.0  # running E[absorbed position; absorbed]
    n_iter = min(horizon, 512) if exact_tail else horizon
    for _ in range(n_iter):
        conv_arr = np.convolve(alive, kernel)
        conv_lo = alive_lo + smin
        n_abs = thr - conv_lo + 1
        if n_abs > 0:
            chunk = conv_arr[:n_abs]
            pos = conv_lo + np.arange(len(chunk))
            e_abs += float(chunk @ pos)
            conv_arr = conv_arr[n_abs:]
            conv_lo = thr + 1
        alive, alive_lo = conv_arr, conv_lo
        if alive.sum() <= 1e-16:
            break
    rest = float(alive.sum())
    if rest > 0 and exact_tail:
        solver = CrossingSolver(pmf)
        heights = np.arange(alive_lo, alive_lo + len(alive))
        if strict:
            # entry into <= -1 from h equals shifted entry into <=0 from h+1
            mean_pos = solver.mean_entry_position(heights + 1) - 1.0
        else:
            mean_pos = solver.mean_entry_position(heights)
        e_abs += float(alive @ mean_pos)
        rest = 0.0
    if rest * (abs(x2) + horizon * max(abs(smin), abs(smax))) > band:
        raise HorizonTooSmallError(
            f"horizon {horizon} leaves alive mass {rest:.3e}",
            residual=rest,
        )
    return x2 - e_abs


def harmonicity_residual(vert_pmf: dict[int, float], table: np.ndarray,
                         conv: BoundaryConvention, x2: int) -> float:
    """|V(x2) - E[V(x2 + X2); survive]| for one kill rule, table indexed 0..U."""
    t = 0 if conv is BoundaryConvention.KILL_ON_NEGATIVE else 1
    s = math.fsum(p * table[x2 + dy] for dy, p in vert_pmf.items()
                  if x2 + dy >= t)
    return abs(table[x2] - s)


@dataclass(frozen=True)
class ConventionReport:
    """Outcome of the V-harmonicity convention test."""

    selected: BoundaryConvention
    v_shift: int          # shift pairing V with a kill-on-nonpositive walk
    max_residual_selected: float
    max_residual_rejected: float
    rejected: BoundaryConvention = field(default=BoundaryConvention.KILL_ON_NONPOSITIVE)


def resolve_convention(sd: StepDistribution, xmax: int = 50,
                       tol: float = 1e-9) -> ConventionReport:
    """Find the unique kill rule under which the weak-ladder series V is harmonic.

    The series V is always built from the weak descending ladder law;
    what varies is whether the one-step identity holds when killing on <= 0
    or on < 0.  Exactly one rule must pass on x2 in [1, xmax], otherwise a
    ConventionError is raised.  ``v_shift`` translates the winner into the
    shift making u -> V(u - v_shift) harmonic for a walk killed on <= 0.
    """
    pmf = _vertical_pmf(sd)
    ld = descending_ladder(sd)
    maxdy = max(abs(v) for v in pmf)
    table = renewal_V(ld, xmax + maxdy + 1).values
    residuals = {}
    for conv in BoundaryConvention:
        residuals[conv] = max(
            harmonicity_residual(pmf, table, conv, x2)
            for x2 in range(1, xmax + 1)
        )
    passing = [c for c, r in residuals.items() if r <= tol]
    if len(passing) != 1:
        raise ConventionError(
            f"expected exactly one passing convention, residuals: "
            + ", ".join(f"{c.value}={r:.3e}" for c, r in residuals.items())
        )
    selected = passing[0]
    rejected = next(c for c in BoundaryConvention if c is not selected)
    shift = 1 if selected is BoundaryConvention.KILL_ON_NEGATIVE else 0
    return ConventionReport(
        selected=selected,
        v_shift=shift,
        max_residual_selected=residuals[selected],
        max_residual_rejected=residuals[rejected],
        rejected=rejected,
    )
