"""Exact finite-n dynamics of the killed walk by sparse measure propagation.

The alive sub-probability measure is stored as a dense array over its
(shrink-wrapped) bounding box and convolved with the step law one step at a
time; mass landing outside the survival region is removed and accounted.
For quadrant runs with positive horizontal drift a truncation barrier L may
be enabled: mass crossing x1 > L migrates to a one-dimensional vertical
measure that keeps the vertical kill but drops the horizontal one.  The
resulting error is bounded by the leaked mass times the Chernoff bound
exp(-gamma (L+1)) on the walk ever returning, gamma the positive root of
E[exp(-gamma X1)] = 1.

Counting mode (exact integers) uses a separate dict-based propagation with
arbitrary precision and no barrier.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BarrierError, InputError
from .ladders import BoundaryConvention
from .steps import StepDistribution

__all__ = [
    "Region",
    "ExitSpec",
    "QuadrantMeasure",
    "step_measure",
    "run_dp",
    "survival_prob",
    "local_prob",
    "half_plane_survival",
    "half_plane_local",
    "count_paths",
    "count_line",
    "chernoff_gamma",
    "auto_barrier",
]

PRUNE_DEFAULT = 1e-300


class Region(enum.Enum):
    QUADRANT = "quadrant"
    UPPER_HALF_PLANE = "upper-half-plane"
    RIGHT_HALF_PLANE = "right-half-plane"


@dataclass(frozen=True)
class ExitSpec:
    """Survival region plus the kill rule at its boundary."""

    region: Region = Region.QUADRANT
    conv: BoundaryConvention = BoundaryConvention.KILL_ON_NONPOSITIVE

    @property
    def threshold(self) -> int:
        """Lowest surviving coordinate value."""
        return 1 if self.conv is BoundaryConvention.KILL_ON_NONPOSITIVE else 0

    @property
    def kills_x1(self) -> bool:
        return self.region in (Region.QUADRANT, Region.RIGHT_HALF_PLANE)

    @property
    def kills_x2(self) -> bool:
        return self.region in (Region.QUADRANT, Region.UPPER_HALF_PLANE)


@dataclass
class QuadrantMeasure:
    """Alive measure after n steps, with leak and kill bookkeeping.

    ``weights[i, j]`` is the mass at (lo1 + i, lo2 + j).  ``leaked`` is the
    vertical distribution of mass that crossed the barrier, indexed from
    ``leak_lo``.  Total mass alive + leaked + killed + dropped is conserved.
    """

    n: int
    weights: np.ndarray
    lo1: int
    lo2: int
    spec: ExitSpec
    barrier: int | None = None
    leaked: np.ndarray = field(default_factory=lambda: np.zeros(0))
    leak_lo: int = 0
    killed_mass: float = 0.0
    dropped_mass: float = 0.0
    leaked_total: float = 0.0
    gamma: float = math.inf  # Chernoff rate for the barrier bound

    @classmethod
    def point_mass(cls, x, spec: ExitSpec, barrier: int | None = None,
                   gamma: float = math.inf, value: float = 1.0):
        x1, x2 = int(x[0]), int(x[1])
        t = spec.threshold
        if spec.kills_x1 and x1 < t or spec.kills_x2 and x2 < t:
            raise InputError(f"start {x} is not inside the survival region")
        w = np.zeros((1, 1))
        w[0, 0] = value
        return cls(n=0, weights=w, lo1=x1, lo2=x2, spec=spec,
                   barrier=barrier, gamma=gamma)

    # -- observables ------------------------------------------------------

    def alive_mass(self) -> float:
        return float(self.weights.sum())

    def survival(self) -> float:
        return float(self.weights.sum() + self.leaked.sum())

    def error_bound(self) -> float:
        """Bound on the barrier-induced survival error plus pruned mass."""
        leak_err = 0.0
        if self.barrier is not None and self.leaked_total > 0:
            leak_err = self.leaked_total * math.exp(-self.gamma * (self.barrier + 1))
        return leak_err + self.dropped_mass

    def _require_exact_joint(self):
        if self.barrier is not None and self.leaked_total > 0:
            raise InputError(
                "joint-position query on a barrier-truncated measure"
            )

    def local(self, y) -> float:
        self._require_exact_joint()
        i = int(y[0]) - self.lo1
        j = int(y[1]) - self.lo2
        if 0 <= i < self.weights.shape[0] and 0 <= j < self.weights.shape[1]:
            return float(self.weights[i, j])
        return 0.0

    def vertical_marginal(self) -> tuple[int, np.ndarray]:
        """(lowest x2, array of masses) including any leaked component."""
        col = self.weights.sum(axis=0)
        lo = self.lo2
        if self.leaked.size:
            lo = min(lo, self.leak_lo)
            hi = max(self.lo2 + len(col), self.leak_lo + len(self.leaked))
            out = np.zeros(hi - lo)
            out[self.lo2 - lo:self.lo2 - lo + len(col)] += col
            out[self.leak_lo - lo:self.leak_lo - lo + len(self.leaked)] += self.leaked
            return lo, out
        return lo, col

    def line_sum(self, y2: int) -> float:
        """P(x2 + S2(n) = y2, alive) -- valid also under a barrier."""
        lo, col = self.vertical_marginal()
        j = y2 - lo
        if 0 <= j < len(col):
            return float(col[j])
        return 0.0

    def row(self, y2: int) -> tuple[int, np.ndarray]:
        """(lowest x1, masses along the horizontal line x2 = y2)."""
        self._require_exact_joint()
        j = y2 - self.lo2
        if 0 <= j < self.weights.shape[1]:
            return self.lo1, self.weights[:, j].copy()
        return self.lo1, np.zeros(0)

    def window_mass(self, u, mu, n: int | None = None) -> float:
        """Mass with ((pos - n*mu)/sqrt(n)) in the half-open unit square u + [0,1)^2."""
        self._require_exact_joint()
        n = self.n if n is None else n
        s = math.sqrt(n)
        lo_c = []
        hi_c = []
        for k in range(2):
            a = n * mu[k] + u[k] * s
            b = n * mu[k] + (u[k] + 1.0) * s
            lo_c.append(int(math.ceil(a)))
            hi_c.append(int(math.ceil(b)) - 1)
        i0 = max(lo_c[0] - self.lo1, 0)
        i1 = min(hi_c[0] - self.lo1 + 1, self.weights.shape[0])
        j0 = max(lo_c[1] - self.lo2, 0)
        j1 = min(hi_c[1] - self.lo2 + 1, self.weights.shape[1])
        if i0 >= i1 or j0 >= j1:
            return 0.0
        return float(self.weights[i0:i1, j0:j1].sum())

    def to_csv(self, fh) -> None:
        fh.write("x1,x2,weight\n")
        idx = np.argwhere(self.weights > 0)
        for i, j in idx:
            fh.write(f"{self.lo1 + i},{self.lo2 + j},{self.weights[i, j]!r}\n")


def chernoff_gamma(sd: StepDistribution) -> float:
    """Positive root gamma of E[exp(-gamma X1)] = 1; inf if X1 >= 0 a.s."""
    hp = sd.horizontal_pmf()
    mu1 = math.fsum(v * p for v, p in hp.items())
    if mu1 <= 0:
        raise InputError("Chernoff barrier rate needs positive horizontal drift")
    if min(hp) >= 0:
        return math.inf  # the walk can never move left of its start

    def logmgf(s):
        return math.log(math.fsum(p * math.exp(-s * v) for v, p in hp.items()))

    hi = 1.0
    while logmgf(hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise InputError("no positive Chernoff root found")
    return float(brentq(logmgf, 1e-12, hi, xtol=1e-14, rtol=1e-15))


def auto_barrier(sd: StepDistribution, x, target: float = 1e-12) -> int:
    """Smallest barrier L with exp(-gamma(L+1)) <= target."""
    gamma = chernoff_gamma(sd)
    if math.isinf(gamma):
        L = 0
    else:
        L = int(math.ceil(-math.log(target) / gamma)) + 1
    return max(L, sd.max_abs_dx(), int(x[0]) + sd.max_abs_dx())


def _sorted_atoms(sd: StepDistribution):
    return [(int(dx), int(dy), float(w)) for dx, dy, w in sd.atoms]


def step_measure(m: QuadrantMeasure, sd: StepDistribution,
                 spec: ExitSpec | None = None,
                 prune: float = PRUNE_DEFAULT) -> QuadrantMeasure:
    """One convolution-and-kill step; returns a fresh measure."""
    spec = m.spec if spec is None else spec
    atoms = _sorted_atoms(sd)
    if m.barrier is not None and m.barrier < sd.max_abs_dx():
        raise BarrierError(
            f"barrier {m.barrier} smaller than max |dx| {sd.max_abs_dx()}"
        )
    dxs = [a[0] for a in atoms]
    dys = [a[1] for a in atoms]
    dx_lo, dx_hi = min(dxs), max(dxs)
    dy_lo, dy_hi = min(dys), max(dys)
    H1, H2 = m.weights.shape
    new = np.zeros((H1 + dx_hi - dx_lo, H2 + dy_hi - dy_lo))
    for dx, dy, w in atoms:
        r, c = dx - dx_lo, dy - dy_lo
        new[r:r + H1, c:c + H2] += w * m.weights
    lo1 = m.lo1 + dx_lo
    lo2 = m.lo2 + dy_lo
    killed = m.killed_mass
    t = spec.threshold
    if spec.kills_x2 and lo2 < t:
        cut = t - lo2
        killed += float(new[:, :cut].sum())
        new = new[:, cut:]
        lo2 = t
    if spec.kills_x1 and lo1 < t:
        cut = t - lo1
        killed += float(new[:cut, :].sum())
        new = new[cut:, :]
        lo1 = t

    # evolve any previously leaked mass (vertical kill only)
    leaked, leak_lo = m.leaked, m.leak_lo
    leaked_total = m.leaked_total
    if leaked.size:
        vker_items = sorted(sd.vertical_pmf().items())
        vk = np.zeros(vker_items[-1][0] - vker_items[0][0] + 1)
        for v, p in vker_items:
            vk[v - vker_items[0][0]] = p
        conv = np.convolve(leaked, vk)
        clo = leak_lo + vker_items[0][0]
        if spec.kills_x2 and clo < t:
            cut = t - clo
            killed += float(conv[:cut].sum())
            conv = conv[cut:]
            clo = t
        leaked, leak_lo = conv, clo

    # migrate mass beyond the barrier into the vertical-only measure
    if m.barrier is not None and lo1 + new.shape[0] - 1 > m.barrier:
        keep = m.barrier - lo1 + 1
        spill = new[keep:, :].sum(axis=0)
        amt = float(spill.sum())
        if amt > 0:
            leaked_total += amt
            if leaked.size == 0:
                leaked, leak_lo = spill.copy(), lo2
            else:
                lo = min(leak_lo, lo2)
                hi = max(leak_lo + len(leaked), lo2 + len(spill))
                out = np.zeros(hi - lo)
                out[leak_lo - lo:leak_lo - lo + len(leaked)] += leaked
                out[lo2 - lo:lo2 - lo + len(spill)] += spill
                leaked, leak_lo = out, lo
        new = new[:keep, :]

    # shrink-wrap: drop all-below-prune edge rows/columns
    dropped = m.dropped_mass
    if new.size:
        rows = np.where(new.max(axis=1) > prune)[0]
        cols = np.where(new.max(axis=0) > prune)[0]
        if len(rows) == 0 or len(cols) == 0:
            dropped += float(new.sum())
            new = np.zeros((1, 1))
        else:
            r0, r1 = rows[0], rows[-1] + 1
            c0, c1 = cols[0], cols[-1] + 1
            if (r0, r1, c0, c1) != (0, new.shape[0], 0, new.shape[1]):
                dropped += float(new[:r0, :].sum()) + float(new[r1:, :].sum())
                dropped += float(new[r0:r1, :c0].sum()) + float(new[r0:r1, c1:].sum())
                new = new[r0:r1, c0:c1].copy()
                lo1 += r0
                lo2 += c0
    return QuadrantMeasure(
        n=m.n + 1, weights=new, lo1=lo1, lo2=lo2, spec=spec,
        barrier=m.barrier, leaked=leaked, leak_lo=leak_lo,
        killed_mass=killed, dropped_mass=dropped,
        leaked_total=leaked_total, gamma=m.gamma,
    )


def run_dp(sd: StepDistribution, x, spec: ExitSpec, n_max: int,
           snapshots=(), barrier: int | str | None = None,
           barrier_target: float = 1e-12,
           prune: float = PRUNE_DEFAULT) -> dict[int, QuadrantMeasure]:
    """Propagate n_max steps, returning the measures at the snapshot times.

    ``barrier='auto'`` sizes the barrier so the error bound is below
    ``barrier_target``; ``barrier=None`` keeps the exact joint measure.
    """
    if n_max < 0:
        raise InputError("n must be >= 0")
    gamma = math.inf
    L = None
    if barrier is not None:
        if not spec.kills_x1:
            raise InputError("a barrier only makes sense with a horizontal kill")
        gamma = chernoff_gamma(sd)
        L = auto_barrier(sd, x, barrier_target) if barrier == "auto" else int(barrier)
        if L < sd.max_abs_dx():
            raise BarrierError(f"barrier {L} smaller than max |dx|")
    m = QuadrantMeasure.point_mass(x, spec, barrier=L, gamma=gamma)
    want = set(snapshots) if snapshots else {n_max}
    out: dict[int, QuadrantMeasure] = {}
    if 0 in want:
        out[0] = m
    for _ in range(n_max):
        m = step_measure(m, sd, spec, prune=prune)
        if m.n in want:
            out[m.n] = m
    return out


def survival_prob(sd: StepDistribution, x, n: int, spec: ExitSpec,
                  barrier: int | str | None = "auto",
                  barrier_target: float = 1e-12) -> tuple[float, float]:
    """(P(exit time > n), error bound)."""
    if not spec.kills_x1:
        barrier = None
    m = run_dp(sd, x, spec, n, snapshots={n}, barrier=barrier,
               barrier_target=barrier_target)[n]
    return m.survival(), m.error_bound()


def local_prob(sd: StepDistribution, x, y, n: int, spec: ExitSpec) -> float:
    """P(x + S(n) = y, exit time > n), exact (no barrier)."""
    m = run_dp(sd, x, spec, n, snapshots={n}, barrier=None)[n]
    return m.local(y)


class VerticalDP:
    """One-dimensional vertical walk killed at the boundary."""

    def __init__(self, sd: StepDistribution, x2: int, conv: BoundaryConvention):
        items = sorted(sd.vertical_pmf().items())
        self.smin = items[0][0]
        self.kernel = np.zeros(items[-1][0] - self.smin + 1)
        for v, p in items:
            self.kernel[v - self.smin] = p
        self.t = 1 if conv is BoundaryConvention.KILL_ON_NONPOSITIVE else 0
        if x2 < self.t:
            raise InputError(f"start height {x2} is outside the region")
        self.alive = np.array([1.0])
        self.lo = x2
        self.n = 0

    def step(self):
        conv = np.convolve(self.alive, self.kernel)
        lo = self.lo + self.smin
        if lo < self.t:
            cut = self.t - lo
            conv = conv[cut:]
            lo = self.t
        self.alive, self.lo = conv, lo
        self.n += 1

    def survival(self) -> float:
        return float(self.alive.sum())


def half_plane_survival(sd: StepDistribution, x2: int, n: int,
                        conv: BoundaryConvention = BoundaryConvention.KILL_ON_NONPOSITIVE
                        ) -> float:
    """P(tau_x > n): exact 1-D dynamic program, no barrier needed."""
    if n < 0:
        raise InputError("n must be >= 0")
    dp = VerticalDP(sd, x2, conv)
    for _ in range(n):
        dp.step()
    return dp.survival()


def half_plane_local(sd: StepDistribution, x, y, n: int,
                     conv: BoundaryConvention = BoundaryConvention.KILL_ON_NONPOSITIVE
                     ) -> float:
    """P(x + S(n) = y, tau_x > n): vertical kill only, x1 enumerated exactly."""
    spec = ExitSpec(region=Region.UPPER_HALF_PLANE, conv=conv)
    m = run_dp(sd, x, spec, n, snapshots={n}, barrier=None)[n]
    return m.local(y)


def _count_run(sd: StepDistribution, x, n: int, threshold: int = 1):
    """Exact integer path counts by state after n steps (quadrant kill)."""
    if n < 0:
        raise InputError("n must be >= 0")
    steps = [(int(dx), int(dy)) for dx, dy, _ in sd.atoms]
    cur = {(int(x[0]), int(x[1])): 1}
    if min(cur)[0] < threshold or min(cur, key=lambda z: z[1])[1] < threshold:
        raise InputError(f"start {x} is not inside the survival region")
    for _ in range(n):
        nxt: dict[tuple[int, int], int] = {}
        for (a, b), c in cur.items():
            for dx, dy in steps:
                na, nb = a + dx, b + dy
                if na >= threshold and nb >= threshold:
                    key = (na, nb)
                    nxt[key] = nxt.get(key, 0) + c
        cur = nxt
    return cur


def count_paths(sd: StepDistribution, x, y, n: int, threshold: int = 1) -> int:
    """Exact number of n-step paths x -> y staying inside the quadrant."""
    return _count_run(sd, x, n, threshold).get((int(y[0]), int(y[1])), 0)


def count_line(sd: StepDistribution, x, n: int, y2: int = 1,
               threshold: int = 1) -> int:
    """M_n(x): paths of length n from x ending on the line x2 = y2.

    M_0(x) = 1 when x already sits on the line (empty path), else 0.
    """
    cur = _count_run(sd, x, n, threshold)
    return sum(c for (a, b), c in cur.items() if b == y2)
