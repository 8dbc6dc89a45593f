"""Assembly of the conditioned-walk pipeline.

Given a normalized step law with driftless vertical component and positive
horizontal drift, this builds every downstream ingredient in one place:
moments and lattice structure, both ladder laws, the renewal tables, the
boundary-convention resolution (which fixes how V pairs with the literal
kill-on-nonpositive stopping times), the Gaussian parameters, the
asymptotic constants, and a memoized evaluator for the harmonic function W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ladders
from .asymptotics import AsymptoticConstants, GaussParams, int_q
from .dp import ExitSpec, Region, auto_barrier
from .errors import InputError, NonzeroDriftError
from .harmonic import HarmonicEstimate, TailBound, make_tail_bound, w_hat_survival, w_series
from .ladders import BoundaryConvention, ConventionReport, LadderDist, RenewalTable
from .steps import LatticeStructure, Moments, StepDistribution, compute_moments, lattice_decompose, in_lattice_support

__all__ = ["ConditionedWalkPipeline"]

DRIFT_TOL = 1e-10


@dataclass
class ConditionedWalkPipeline:
    """Everything derived from one step law, built once and shared."""

    sd: StepDistribution
    moments: Moments
    lattice: LatticeStructure
    gauss: GaussParams
    chi_minus: LadderDist
    chi_plus: LadderDist
    conv_report: ConventionReport
    consts: AsymptoticConstants
    spec: ExitSpec
    h_residual: float
    _V: RenewalTable = field(repr=False, default=None)
    _H: RenewalTable = field(repr=False, default=None)
    _w_memo: dict = field(repr=False, default_factory=dict)
    _tail_bound: TailBound = field(repr=False, default=None)
    _tail_bound_linear: TailBound = field(repr=False, default=None)

    @classmethod
    def build(cls, sd: StepDistribution,
              conv: BoundaryConvention = BoundaryConvention.KILL_ON_NONPOSITIVE,
              xmax_convention: int = 50) -> "ConditionedWalkPipeline":
        moments = compute_moments(sd)
        if abs(moments.mu2) > DRIFT_TOL:
            raise NonzeroDriftError(
                f"vertical drift {moments.mu2:.3e}: tilt the walk first"
            )
        if moments.mu1 <= 0:
            raise InputError("horizontal drift must be positive")
        lattice = lattice_decompose(sd)
        gauss = GaussParams.from_moments(moments)
        chi_minus = ladders.descending_ladder(sd)
        chi_plus = ladders.ascending_ladder(sd)
        conv_report = ladders.resolve_convention(sd, xmax=xmax_convention)
        kap = ladders.kappa(chi_minus)
        kap_p = ladders.kappa(chi_plus)
        consts = AsymptoticConstants(
            kappa=kap, kappa_prime=kap_p,
            int_q=kap * kap_p * math.sqrt(math.pi / 2.0) / gauss.sigma2,
        )
        pipe = cls(
            sd=sd, moments=moments, lattice=lattice, gauss=gauss,
            chi_minus=chi_minus, chi_plus=chi_plus, conv_report=conv_report,
            consts=consts, spec=ExitSpec(region=Region.QUADRANT, conv=conv),
            h_residual=0.0,
        )
        pipe.h_residual = pipe._check_h_harmonicity(xmax_convention)
        if pipe.h_residual > 1e-9:
            raise ladders.ConventionError(
                f"H fails reversed-walk harmonicity: residual {pipe.h_residual:.3e}"
            )
        return pipe

    # -- renewal tables ----------------------------------------------------

    def _ensure_V(self, U: int) -> RenewalTable:
        if self._V is None or self._V.U < U:
            self._V = ladders.renewal_V(self.chi_minus, max(U, 64))
        return self._V

    def _ensure_H(self, U: int) -> RenewalTable:
        if self._H is None or self._H.U < U:
            self._H = ladders.renewal_H(self.chi_plus, max(U, 64))
        return self._H

    def V(self, u: int) -> float:
        """The literal weak-ladder renewal series."""
        if u < 0:
            return 0.0
        return self._ensure_V(u)(u)

    def H(self, u: int) -> float:
        if u < 0:
            return 0.0
        return self._ensure_H(u)(u)

    def v_eff(self, u: int) -> float:
        """Renewal function paired with the kill-on-nonpositive walk."""
        return self.V(u - self.conv_report.v_shift)

    def v_eff_vector(self, max_height: int) -> np.ndarray:
        shift = self.conv_report.v_shift
        table = self._ensure_V(max_height)
        out = np.zeros(max_height + 1)
        for u in range(max_height + 1):
            if u - shift >= 0:
                out[u] = table(u - shift)
        return out

    def _check_h_harmonicity(self, xmax: int) -> float:
        """H must be harmonic for the reversed vertical walk killed on <= 0."""
        pmf = {-v: p for v, p in self.sd.vertical_pmf().items()}
        maxdy = max(abs(v) for v in pmf)
        table = self._ensure_H(xmax + maxdy + 1).values
        return max(
            ladders.harmonicity_residual(
                pmf, table, BoundaryConvention.KILL_ON_NONPOSITIVE, y)
            for y in range(1, xmax + 1)
        )

    # -- harmonic function W -------------------------------------------------

    def _v_slope(self) -> float:
        p0 = self.chi_minus.pmf.get(0, 0.0)
        return 1.0 / (1.0 - p0)

    def w(self, x, tol: float = 1e-10, n_max: int = 4096,
          barrier_target: float = 1e-16) -> HarmonicEstimate:
        x = (int(x[0]), int(x[1]))
        key = (x, tol)
        if key in self._w_memo:
            return self._w_memo[key]
        if self._tail_bound is None:
            self._tail_bound = make_tail_bound(self.sd, self._v_slope())
        L = auto_barrier(self.sd, x, barrier_target)
        v_vec = self.v_eff_vector(x[1] + (n_max + 1) * self.sd.max_abs_dy())
        est = w_series(self.sd, x, self.spec, v_vec, self._tail_bound,
                       n_max=n_max, tol=tol, barrier=L)
        self._w_memo[key] = est
        return est

    def w_value(self, x) -> float:
        return self.w(x).value

    def w_hat(self, x, n_max: int) -> float:
        """Doob-transform representation V(x2) Phat(sigma_x > n_max)."""
        v_vec = self.v_eff_vector(x[1] + (n_max + 1) * self.sd.max_abs_dy())
        return w_hat_survival(self.sd, x, self.spec, v_vec, n_max)

    def w_star(self, x, tol: float = 1e-10, n_max: int = 4096,
               barrier_target: float = 1e-16) -> HarmonicEstimate:
        """Series value with the identity weight u in place of V.

        For a walk whose vertical part is the simple symmetric one this is
        the explicit harmonic function of the counting application.
        """
        x = (int(x[0]), int(x[1]))
        if self._tail_bound_linear is None:
            self._tail_bound_linear = make_tail_bound(self.sd, 1.0)
        L = auto_barrier(self.sd, x, barrier_target)
        height = x[1] + (n_max + 1) * self.sd.max_abs_dy()
        v_vec = np.arange(height + 1, dtype=float)
        return w_series(self.sd, x, self.spec, v_vec,
                        self._tail_bound_linear, n_max=n_max, tol=tol,
                        barrier=L)

    # -- lattice helpers -----------------------------------------------------

    def feasible(self, x, n: int, y) -> bool:
        return in_lattice_support(self.lattice, n,
                                  (y[0] - x[0], y[1] - x[1]))

    def _nearest_residue(self, target: float, residue: int, d: int,
                         lo: int) -> int:
        # ties round down
        c = int(round(target))
        c += (residue - c) % d
        if c - d >= lo and abs(c - d - target) <= abs(c - target):
            c -= d
        return max(c, lo + ((residue - lo) % d))

    def nearest_lattice_point(self, x, n: int, target, fixed_y2: bool = False):
        """Feasible point of D_n(x) inside the region nearest to ``target``.

        With fixed_y2=True the second coordinate must equal target[1]
        exactly; returns None when that height is not reachable at time n.
        """
        t = self.spec.threshold
        r1 = (x[0] + self.lattice.a1 * n) % self.lattice.d1
        r2 = (x[1] + self.lattice.a2 * n) % self.lattice.d2
        y1 = self._nearest_residue(target[0], r1, self.lattice.d1, t)
        if fixed_y2:
            y2 = int(round(target[1]))
            if (y2 - x[1] - self.lattice.a2 * n) % self.lattice.d2 != 0:
                return None
            return (y1, y2)
        y2 = self._nearest_residue(target[1], r2, self.lattice.d2, t)
        return (y1, y2)

    # -- predictions (thin wrappers bound to this pipeline) -------------------

    def int_q_value(self) -> float:
        return int_q(self.gauss, self.consts)
