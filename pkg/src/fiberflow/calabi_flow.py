"""Reduced collapse flow for rotationally symmetric fibered metrics.

The dilation profile f(rho, t) on a twisted line-bundle chart over a
Kahler-Einstein surface obeys the quasilinear equation

    df/dt = k (f_rr / f_r + n f_r / f) - R_h / n

with exponential tails f - k a(t) ~ e^rho on the left and k b(t) - f ~
e^(-rho) on the right.  The endpoints themselves move linearly,

    d(ka)/dt = k - R_h/n        d(kb)/dt = -k - R_h/n,

the unique rates compatible with the equation and smooth pole closure
(the tail ratios f_rr/f_r approach +-1).  The fiber therefore loses area
at constant rate and collapses at T = (b0 - a0)/2, which is what the
cohomology predictor computes without touching the PDE.

The equation is severely stiff near the poles: the parabolic scale is set
by v = f_r / k, which is ~e^(-L) in the tails, so explicit stepping would
need ~1e11 steps on the default grid.  Steps are taken with the TR-BDF2
one-step scheme (trapezoid stage then BDF2 stage, L-stable) and an
analytic banded Jacobian.

The spatially constant case runs on its exact linear closed form and is
used as the oracle for everything downstream of the PDE.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.linalg import solve_banded

from .chart_geometry import ChartError, ChartSampler, calabi_sampler

log = logging.getLogger(__name__)

GAMMA = 2.0 - np.sqrt(2.0)


class FlowError(ChartError):
    pass


class ConfigError(FlowError):
    """Run settings are internally inconsistent."""


class BadProfile(FlowError):
    """Initial profile violates monotonicity or endpoint asymptotics."""


class StepRejected(FlowError):
    """Implicit solve failed to converge after all step halvings."""


class MonotonicityLost(FlowError):
    """A step would destroy monotonicity of f (metric degeneration)."""


class PastSingularTime(FlowError):
    """Closed form queried at or beyond the collapse time."""


class WrongRegime(FlowError):
    """Base class collapses before the fiber; outside the scenario."""


# ---------------------------------------------------------------------------
# parameters and run records


@dataclass(frozen=True)
class HirzebruchParams:
    """Twisted-bundle collapse scenario over a Kahler-Einstein surface.

    f ranges over (k*a0, k*b0); R_h is the base scalar constant in the
    normalization where the Fubini-Study base has R_h = n(n+1).
    """

    a0: float = 1.0
    b0: float = 2.0
    n: int = 1
    k: int = 1
    R_h: float | None = None
    L: float = 20.0
    grid_points: int = 512

    @property
    def base_scalar(self) -> float:
        return float(self.n * (self.n + 1)) if self.R_h is None else self.R_h

    def validate(self) -> None:
        if not (0.0 < self.a0 < self.b0):
            raise BadProfile("need 0 < a0 < b0")
        if self.k < 1 or self.n < 1:
            raise BadProfile("k and n must be positive integers")
        if self.L <= 0.0 or self.grid_points < 64:
            raise BadProfile("grid too small")


@dataclass(frozen=True)
class ProductParams:
    """Spatially constant dilation over a Kahler-Einstein surface with a
    round fiber factor of initial area 2*pi*c0."""

    f0: float = 3.0
    c0: float = 1.0
    n: int = 1
    R_h: float | None = None

    @property
    def base_scalar(self) -> float:
        return float(self.n * (self.n + 1)) if self.R_h is None else self.R_h

    def validate(self) -> None:
        if self.f0 <= 0.0 or self.c0 <= 0.0:
            raise BadProfile("need positive f0 and c0")


@dataclass(frozen=True)
class RunSettings:
    dt_max: float = 0.01
    time_frac: float = 0.1
    stop_margin: float = 1e-3
    v_floor: float = 1e-6
    record_stride: int = 1
    newton_tol: float = 1e-10
    newton_max_iter: int = 12
    max_halvings: int = 10
    support_threshold: float = 1e-3
    dt_fixed: float | None = None

    def validate(self) -> None:
        if self.dt_max <= 0.0 or not (0.0 < self.time_frac <= 1.0):
            raise ConfigError("need dt_max > 0 and 0 < time_frac <= 1")
        if self.stop_margin <= 0.0 or self.v_floor < 0.0:
            raise ConfigError("need stop_margin > 0 and v_floor >= 0")
        if self.record_stride < 1 or self.max_halvings < 0:
            raise ConfigError("need record_stride >= 1, max_halvings >= 0")
        if self.dt_fixed is not None and self.dt_fixed <= 0.0:
            raise ConfigError("dt_fixed must be positive when set")


@dataclass(frozen=True)
class FlowState:
    """Profile snapshot.  `lower`/`upper` are the endpoint values k a(t),
    k b(t); v = (d_rho f)/k is the derived fiber density.

    `df` carries the node-to-node increments of f at full relative
    precision.  Near the poles f approaches its endpoint like e^(-|rho|),
    so on wide grids the increments fall below the float64 resolution of
    f itself; every derivative taken from nodal f there is noise.  All
    stepping and v extraction therefore run on `df` when present.
    """

    t: float
    rho: np.ndarray
    f: np.ndarray
    lower: float
    upper: float
    df: np.ndarray | None = None

    def increments(self) -> np.ndarray:
        return np.diff(self.f) if self.df is None else self.df

    def v_profile(self) -> np.ndarray:
        d = self.rho[1] - self.rho[0]
        inc = self.increments()
        v = np.empty_like(self.f)
        v[1:-1] = (inc[1:] + inc[:-1]) / (2.0 * d)
        v[0] = (1.5 * inc[0] - 0.5 * inc[1]) / d
        v[-1] = (1.5 * inc[-1] - 0.5 * inc[-2]) / d
        return v

    def validate(self) -> None:
        if np.any(self.increments() <= 0.0):
            raise BadProfile("profile not strictly increasing")
        if self.f[0] <= 0.0:
            raise BadProfile("profile not positive")


@dataclass(frozen=True)
class ProductState:
    t: float
    f: float
    c: float


@dataclass(frozen=True)
class MonitorReport:
    t: float
    heat_residual: float
    min_f: float
    max_f: float
    max_f_slack: float
    grad_f_sq_sup: float
    grad_bound_ok: bool
    width: float


@dataclass(frozen=True)
class DiagnosticsSample:
    """Per-step curvature sups over the supported part of the grid."""

    t: float
    node: int
    k_v_max: float
    a_sq_sup: float
    grad_ln_sq_sup: float
    horiz_sup: float
    mixed_sup: float
    rm_sup: float
    fiber_area: float
    roundness: float
    width: float
    max_v: float


@dataclass(frozen=True)
class FlowRun:
    scenario: str
    params: HirzebruchParams | ProductParams
    states: list
    monitors: list[MonitorReport]
    diagnostics: list[DiagnosticsSample]
    T_predicted: float
    T_observed: float
    stop_reason: str


# ---------------------------------------------------------------------------
# cohomology bookkeeping


@dataclass(frozen=True)
class CohomologyClass:
    base_coeff: float
    fiber_coeff: float
    c1_base_rate: float
    c1_fiber_rate: float

    def validate(self) -> None:
        if self.base_coeff <= 0.0 or self.fiber_coeff <= 0.0:
            raise WrongRegime("class coefficients must start positive")


def hirzebruch_class(params: HirzebruchParams) -> CohomologyClass:
    rh = params.base_scalar
    return CohomologyClass(
        base_coeff=params.k * params.a0,
        fiber_coeff=params.b0 - params.a0,
        c1_base_rate=params.k - rh / params.n,
        c1_fiber_rate=-2.0,
    )


def product_class(params: ProductParams) -> CohomologyClass:
    return CohomologyClass(
        base_coeff=params.f0,
        fiber_coeff=params.c0,
        c1_base_rate=-params.base_scalar / params.n,
        c1_fiber_rate=-2.0,
    )


def predict_max_time(cls: CohomologyClass) -> tuple[float, CohomologyClass]:
    """Collapse time of the fiber coefficient under linear class evolution,
    and the limit class at that time."""
    cls.validate()
    if cls.c1_fiber_rate >= 0.0:
        raise WrongRegime("fiber coefficient does not decay")
    t_max = cls.fiber_coeff / abs(cls.c1_fiber_rate)
    base_limit = cls.base_coeff + t_max * cls.c1_base_rate
    if base_limit <= 0.0:
        raise WrongRegime("base class collapses before the fiber")
    limit = CohomologyClass(base_coeff=base_limit, fiber_coeff=0.0,
                            c1_base_rate=cls.c1_base_rate,
                            c1_fiber_rate=cls.c1_fiber_rate)
    return t_max, limit


# ---------------------------------------------------------------------------
# initial profiles


def logistic_profile(lower: float, width: float
                     ) -> Callable[[float], tuple[float, float, float, float]]:
    """f = lower + width * sigma(rho) with three derivatives; tails have
    ratio f_rr/f_r -> +-1 exactly, which the pole closure needs."""

    def prof(rho: float):
        sig = 1.0 / (1.0 + np.exp(-rho))
        s1 = sig * (1.0 - sig)
        s2 = s1 * (1.0 - 2.0 * sig)
        s3 = s2 * (1.0 - 2.0 * sig) - 2.0 * s1 * s1
        return (lower + width * sig, width * s1, width * s2, width * s3)

    return prof


def skew_profile(lower: float, width: float, mix: float = 0.35,
                 shift: float = 1.2
                 ) -> Callable[[float], tuple[float, float, float, float]]:
    """Mixture of two shifted logistics: asymmetric but keeps unit tail
    rates, so the same endpoint dynamics apply."""
    p0 = logistic_profile(0.0, (1.0 - mix) * width)
    p1 = logistic_profile(0.0, mix * width)

    def prof(rho: float):
        a = p0(rho)
        b = p1(rho - shift)
        return tuple(lower * (i == 0) + x + y for i, (x, y) in
                     enumerate(zip(a, b)))

    return prof


def _sigma_increments(rho: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """sigma(b - shift) - sigma(a - shift) over grid cells, evaluated as
    sigma(b) (1 - sigma(a)) (1 - e^(a-b)): exact identity, every factor at
    full relative precision however deep in the tails a and b sit."""
    a = rho[:-1] - shift
    b = rho[1:] - shift
    sig_b = 1.0 / (1.0 + np.exp(-b))
    com_a = 1.0 / (1.0 + np.exp(a))  # 1 - sigma(a)
    return sig_b * com_a * (-np.expm1(a - b))


def _tanh_increments(rho: np.ndarray, width: float) -> np.ndarray:
    return width * _sigma_increments(rho)


def _skew_increments(rho: np.ndarray, width: float, mix: float = 0.35,
                     shift: float = 1.2) -> np.ndarray:
    return ((1.0 - mix) * width * _sigma_increments(rho)
            + mix * width * _sigma_increments(rho, shift))


PROFILE_SHAPES = {"tanh": logistic_profile, "skew": skew_profile}
_PROFILE_INCREMENTS = {"tanh": _tanh_increments, "skew": _skew_increments}


def init_hirzebruch_profile(params: HirzebruchParams,
                            shape: str = "tanh") -> FlowState:
    params.validate()
    if shape not in PROFILE_SHAPES:
        raise BadProfile(f"unknown shape {shape!r}")
    lower = params.k * params.a0
    upper = params.k * params.b0
    width = upper - lower
    prof = PROFILE_SHAPES[shape](lower, width)
    rho = np.linspace(-params.L, params.L, params.grid_points)
    f = np.array([prof(r)[0] for r in rho])
    df = _PROFILE_INCREMENTS[shape](rho, width)
    state = FlowState(t=0.0, rho=rho, f=f, lower=lower, upper=upper, df=df)
    state.validate()
    if abs(f[0] - lower) > 1e-6 or abs(f[-1] - upper) > 1e-6:
        raise BadProfile("grid half-width too small for endpoint closure")
    return state


# ---------------------------------------------------------------------------
# discrete operators and the implicit stepper


def _reconstruct(f0: float, inc: np.ndarray) -> np.ndarray:
    out = np.empty(inc.size + 1)
    out[0] = f0
    out[1:] = f0 + np.cumsum(inc)
    return out


class FlowProblem:
    """Grid, operators and parameters for one PDE run.

    The implicit solve works on u = (f[0], increments of f) rather than
    nodal values.  In the tails the increments are e^(-|rho|) times
    smaller than f, so nodal stencils lose up to ten digits to
    cancellation on wide grids and the Newton residual bottoms out above
    any usable tolerance; increments carry full relative precision.  The
    change of variables is triangular (cumsum), so the Newton systems
    still reduce to one banded solve:  with T = cumsum and D = diff its
    inverse, I - c D J T = D (I - c J) T.
    """

    def __init__(self, params: HirzebruchParams,
                 settings: RunSettings | None = None):
        params.validate()
        self.params = params
        self.settings = settings or RunSettings()
        self.settings.validate()
        self.rho = np.linspace(-params.L, params.L, params.grid_points)
        self.drho = float(self.rho[1] - self.rho[0])
        rh = params.base_scalar
        self.rate_lower = params.k - rh / params.n
        self.rate_upper = -params.k - rh / params.n
        self.sink = rh / params.n
        # Endpoint rows advance at the speed of the *discrete* exponential
        # tail: for f - endpoint ~ q^j the stencil ratio s2f/s1f is the
        # constant below, not exactly 1.  Pinning the continuum rate k
        # instead leaves an O(drho^2) mismatch against the neighbouring
        # interior nodes, which wipes out the e^(-L)-sized boundary
        # increment within one step.  The discrete rate converges to the
        # continuum one at the scheme's order.
        h = self.drho
        r_disc = 2.0 * (np.cosh(h) - 1.0) / (h * np.sinh(h))
        self.rate_lower_disc = params.k * r_disc - self.sink
        self.rate_upper_disc = -params.k * r_disc - self.sink

    # -- right-hand side ----------------------------------------------------

    def _derivs_from_increments(self, inc: np.ndarray
                                ) -> tuple[np.ndarray, np.ndarray]:
        d = self.drho
        n_pts = inc.size + 1
        s1f = np.empty(n_pts)
        s2f = np.empty(n_pts)
        s1f[1:-1] = (inc[1:] + inc[:-1]) / (2.0 * d)
        s2f[1:-1] = (inc[1:] - inc[:-1]) / d ** 2
        s1f[0] = s1f[-1] = 1.0  # placeholder, boundary rows are rates
        s2f[0] = s2f[-1] = 0.0
        return s1f, s2f

    def _rhs_nodal(self, f: np.ndarray, inc: np.ndarray) -> np.ndarray:
        k, n = self.params.k, self.params.n
        s1f, s2f = self._derivs_from_increments(inc)
        out = k * (s2f / s1f + n * s1f / f) - self.sink
        out[0] = self.rate_lower_disc
        out[-1] = self.rate_upper_disc
        return out

    def rhs(self, f: np.ndarray) -> np.ndarray:
        return self._rhs_nodal(f, np.diff(f))

    def jacobian_bands(self, f: np.ndarray, inc: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tridiagonal d(rhs)/d(nodal f) as (sub, diag, super) arrays;
        boundary rows are zero (their rates are constants)."""
        k, n = self.params.k, self.params.n
        h = self.drho
        s1f, s2f = self._derivs_from_increments(inc)
        lo = np.zeros_like(f)
        di = np.zeros_like(f)
        up = np.zeros_like(f)
        inv_s1 = 1.0 / s1f[1:-1]
        ratio = s2f[1:-1] * inv_s1 ** 2
        fi = f[1:-1]
        up[1:-1] = k * (inv_s1 / h ** 2 - ratio / (2.0 * h)
                        + n / (2.0 * h * fi))
        lo[1:-1] = k * (inv_s1 / h ** 2 + ratio / (2.0 * h)
                        - n / (2.0 * h * fi))
        di[1:-1] = k * (-2.0 * inv_s1 / h ** 2 - n * s1f[1:-1] / fi ** 2)
        return lo, di, up

    # -- implicit stages in increment space ----------------------------------

    def _phi(self, u: np.ndarray) -> np.ndarray:
        """Rates of (f[0], increments): (F[0], diff(F))."""
        f = _reconstruct(u[0], u[1:])
        rates = self._rhs_nodal(f, u[1:])
        out = np.empty_like(u)
        out[0] = rates[0]
        out[1:] = np.diff(rates)
        return out

    def _solve_newton_system(self, coeff: float, f: np.ndarray,
                             inc: np.ndarray,
                             resid: np.ndarray) -> np.ndarray:
        """x with (I - coeff * D J T) x = resid, via the banded f-space
        system (I - coeff * J) z = T resid and x = D z."""
        lo, di, up = self.jacobian_bands(f, inc)
        n_pts = f.size
        ab = np.zeros((3, n_pts))
        ab[0, 1:] = -coeff * up[:-1]
        ab[1, :] = 1.0 - coeff * di
        ab[2, :-1] = -coeff * lo[1:]
        z = solve_banded((1, 1), ab, _reconstruct(resid[0], resid[1:]))
        x = np.empty_like(resid)
        x[0] = z[0]
        x[1:] = np.diff(z)
        return x

    def _valid(self, u: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(u)) and u[0] > 0.0
                    and np.all(u[1:] > 0.0))

    def _newton(self, coeff: float, rhs_const: np.ndarray,
                guess: np.ndarray) -> np.ndarray:
        """Solve u - coeff * phi(u) = rhs_const; raises StepRejected on
        non-convergence.  Steps are halved while they would leave the
        monotone cone (phi is not defined outside it)."""
        u = guess.copy()
        if not self._valid(u):
            u = rhs_const.copy()
        if not self._valid(u):
            raise StepRejected("no valid starting iterate")
        scale = 1.0 + abs(rhs_const[0]) + float(np.sum(np.abs(rhs_const[1:])))
        for _ in range(self.settings.newton_max_iter):
            resid = u - coeff * self._phi(u) - rhs_const
            err = abs(resid[0]) + float(np.sum(np.abs(resid[1:])))
            if err <= self.settings.newton_tol * scale:
                return u
            f = _reconstruct(u[0], u[1:])
            x = self._solve_newton_system(coeff, f, u[1:], resid)
            for _ in range(6):
                candidate = u - x
                if self._valid(candidate):
                    break
                x = 0.5 * x
            else:
                raise StepRejected("iterate left the monotone cone")
            u = candidate
        raise StepRejected("implicit solve did not converge")

    def step_once(self, u: np.ndarray, dt: float) -> np.ndarray:
        """One TR-BDF2 step (trapezoid to t + gamma dt, then BDF2)."""
        g = GAMMA
        p0 = self._phi(u)
        c1 = 0.5 * g * dt
        u1 = self._newton(c1, u + c1 * p0, u + g * dt * p0)
        c2 = (1.0 - g) / (2.0 - g) * dt
        rhs_const = (u1 / (g * (2.0 - g))
                     - ((1.0 - g) ** 2 / (g * (2.0 - g))) * u)
        guess = u1 / g - (1.0 - g) / g * u
        return self._newton(c2, rhs_const, guess)


def step_flow(problem: FlowProblem, state: FlowState, dt: float) -> FlowState:
    """Advance one step; halves dt on solver failure or monotonicity loss
    and raises StepRejected / MonotonicityLost once halvings are spent."""
    if dt <= 0.0:
        raise FlowError("need dt > 0")
    remaining = dt
    u = np.empty(state.f.size)
    u[0] = state.f[0]
    u[1:] = state.increments()
    t = state.t
    halvings_left = problem.settings.max_halvings
    sub_dt = dt
    while remaining > 1e-15 * dt:
        sub_dt = min(sub_dt, remaining)
        try:
            u_new = problem.step_once(u, sub_dt)
        except StepRejected:
            halvings_left -= 1
            if halvings_left < 0:
                raise
            sub_dt *= 0.5
            continue
        if np.any(u_new[1:] <= 0.0) or u_new[0] <= 0.0:
            halvings_left -= 1
            if halvings_left < 0:
                raise MonotonicityLost("profile lost monotonicity")
            sub_dt *= 0.5
            continue
        u = u_new
        t += sub_dt
        remaining -= sub_dt
    f = _reconstruct(u[0], u[1:])
    return FlowState(t=t, rho=state.rho, f=f, lower=float(f[0]),
                     upper=float(f[-1]), df=u[1:].copy())


def flow_rhs_periodic(f: np.ndarray, drho: float, k: int, n: int,
                      sink: float) -> np.ndarray:
    """Right-hand side with periodic padding; only used to exhibit the
    translation equivariance of the interior scheme exactly."""
    s1f = (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * drho)
    s2f = (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / drho ** 2
    return k * (s2f / s1f + n * s1f / f) - sink


# ---------------------------------------------------------------------------
# profile-level diagnostics


def _d1(arr: np.ndarray, d: float) -> np.ndarray:
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - arr[:-2]) / (2.0 * d)
    out[0] = (-1.5 * arr[0] + 2.0 * arr[1] - 0.5 * arr[2]) / d
    out[-1] = (1.5 * arr[-1] - 2.0 * arr[-2] + 0.5 * arr[-3]) / d
    return out


def _d2(arr: np.ndarray, d: float) -> np.ndarray:
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - 2.0 * arr[1:-1] + arr[:-2]) / d ** 2
    out[0] = out[1]
    out[-1] = out[-2]
    return out


@dataclass(frozen=True)
class CurvatureProfiles:
    """Per-node curvature arrays at one recorded time.

    Arrays outside the support mask hold zeros rather than the raw
    stencil values: fiber curvature divides stencils of ln v by v, which
    amplifies noise where v underflows.
    """

    t: float
    rho: np.ndarray
    v: np.ndarray
    supp: np.ndarray
    k_v: np.ndarray
    grad_ln_sq: np.ndarray
    a_sq: np.ndarray
    kappa_h: np.ndarray
    vhc_r: np.ndarray
    vhc_t: np.ndarray
    rm: np.ndarray
    width: float
    area: float


def curvature_profiles(state: FlowState, params: HirzebruchParams,
                       support_threshold: float = 1e-3) -> CurvatureProfiles:
    """Curvature arrays from the profile alone (no chart reconstruction)."""
    if params.n != 1:
        raise FlowError("profile diagnostics implemented over surface bases")
    k = params.k
    d = state.rho[1] - state.rho[0]
    f = state.f
    v = state.v_profile()
    max_v = float(np.max(v))
    supp = v >= support_threshold * max_v
    lnv = np.log(np.where(v > 0.0, v, 1.0))
    lv1 = _d1(lnv, d)
    lv2 = _d2(lnv, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_v = np.where(supp, -lv2 / v, 0.0)
    grad_ln_sq = 2.0 * k ** 2 * v / f ** 2
    a_sq = 2.0 * params.n * grad_ln_sq
    kappa_h = params.base_scalar / f - grad_ln_sq
    v1 = _d1(v, d)
    lf1 = k * v / f
    lf2 = k * v1 / f - lf1 ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        hess_rr = np.where(supp, (2.0 / v) * (lf2 - 0.5 * lv1 * lf1), 0.0)
        hess_tt = np.where(supp, (1.0 / v) * lv1 * lf1, 0.0)
    vhc_r = -0.5 * (hess_rr + grad_ln_sq) + 0.25 * grad_ln_sq
    vhc_t = -0.5 * hess_tt + 0.25 * grad_ln_sq
    rm = np.where(supp, np.sqrt(4.0 * k_v ** 2 + 4.0 * kappa_h ** 2), 0.0)
    width = state.upper - state.lower
    return CurvatureProfiles(
        t=state.t, rho=state.rho, v=v, supp=supp, k_v=k_v,
        grad_ln_sq=grad_ln_sq, a_sq=a_sq, kappa_h=kappa_h,
        vhc_r=vhc_r, vhc_t=vhc_t, rm=rm,
        width=float(width), area=float(2.0 * np.pi * width / k))


def profile_diagnostics(state: FlowState, params: HirzebruchParams,
                        support_threshold: float = 1e-3) -> DiagnosticsSample:
    """Curvature sups over the supported nodes v >= threshold * max v."""
    prof = curvature_profiles(state, params, support_threshold)
    supp = prof.supp
    mixed_sup = float(max(np.max(np.abs(prof.vhc_r[supp])),
                          np.max(np.abs(prof.vhc_t[supp]))))
    node = int(np.argmax(prof.rm))
    center = int(np.argmax(prof.v))
    roundness = float(prof.k_v[center] * prof.area / (4.0 * np.pi))
    return DiagnosticsSample(
        t=state.t,
        node=node,
        k_v_max=float(np.max(np.where(supp, prof.k_v, -np.inf))),
        a_sq_sup=float(np.max(prof.a_sq)),
        grad_ln_sq_sup=float(np.max(prof.grad_ln_sq)),
        horiz_sup=float(np.max(np.abs(prof.kappa_h))),
        mixed_sup=mixed_sup,
        rm_sup=float(np.max(prof.rm)),
        fiber_area=prof.area,
        roundness=roundness,
        width=prof.width,
        max_v=float(np.max(prof.v)),
    )


def product_diagnostics(state: ProductState,
                        params: ProductParams) -> DiagnosticsSample:
    k_v = 2.0 / state.c
    kappa_h = params.base_scalar / params.n / state.f
    rm = float(np.sqrt(4.0 * k_v ** 2 + 4.0 * kappa_h ** 2))
    return DiagnosticsSample(
        t=state.t, node=0, k_v_max=k_v, a_sq_sup=0.0, grad_ln_sq_sup=0.0,
        horiz_sup=kappa_h, mixed_sup=0.0, rm_sup=rm,
        fiber_area=2.0 * np.pi * state.c, roundness=1.0,
        width=state.c, max_v=state.c)


# ---------------------------------------------------------------------------
# monitors


def _time_derivative(states: Sequence[FlowState], idx: int) -> np.ndarray:
    tm, t0, tp = (states[idx - 1].t, states[idx].t, states[idx + 1].t)
    dm, dp = t0 - tm, tp - t0
    wm = -dp / (dm * (dm + dp))
    w0 = (dp - dm) / (dm * dp)
    wp = dm / (dp * (dm + dp))
    return (wm * states[idx - 1].f + w0 * states[idx].f
            + wp * states[idx + 1].f)


def _d1_4th(f: np.ndarray, d: float) -> np.ndarray:
    out = np.full_like(f, np.nan)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * d)
    return out


def _d2_4th(f: np.ndarray, d: float) -> np.ndarray:
    out = np.full_like(f, np.nan)
    out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2]
                 + 16.0 * f[3:-1] - f[4:]) / (12.0 * d ** 2)
    return out


def heat_residual_series(states: Sequence[FlowState],
                         params: HirzebruchParams) -> np.ndarray:
    """Sup over the central half of the grid of |df/dt - RHS|, with
    4th-order space stencils and 3-point time stencils on the recorded
    states.  First and last entries are NaN (no centered time stencil)."""
    k, n = params.k, params.n
    sink = params.base_scalar / n
    m = len(states)
    out = np.full(m, np.nan)
    if m < 3:
        return out
    rho = states[0].rho
    d = rho[1] - rho[0]
    mask = np.abs(rho) <= params.L / 2.0
    for idx in range(1, m - 1):
        f = states[idx].f
        ft = _time_derivative(states, idx)
        f1 = _d1_4th(f, d)
        f2 = _d2_4th(f, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            rhs = k * (f2 / f1 + n * f1 / f) - sink
        resid = np.abs(ft - rhs)[mask]
        out[idx] = float(np.nanmax(resid))
    return out


def build_monitors(states: Sequence[FlowState], params: HirzebruchParams
                   ) -> list[MonitorReport]:
    k = params.k
    sink = params.base_scalar / params.n
    residuals = heat_residual_series(states, params)
    max0 = float(np.max(states[0].f))
    grad0 = 2.0 * k ** 2 * float(np.max(states[0].v_profile()))
    reports = []
    for idx, st in enumerate(states):
        grad_sup = 2.0 * k ** 2 * float(np.max(st.v_profile()))
        slack = float(np.max(st.f)) - (max0 - sink * st.t)
        reports.append(MonitorReport(
            t=st.t,
            heat_residual=float(residuals[idx]),
            min_f=float(np.min(st.f)),
            max_f=float(np.max(st.f)),
            max_f_slack=slack,
            grad_f_sq_sup=grad_sup,
            grad_bound_ok=grad_sup <= grad0 * (1.0 + 1e-9) + 1e-12,
            width=st.upper - st.lower,
        ))
    return reports


# ---------------------------------------------------------------------------
# closed-form product mode


def product_closed_form(f0: float, c0: float, R_h: float, n: int,
                        t: float) -> tuple[float, float, float]:
    """f(t) = f0 - (R_h/n) t, c(t) = c0 - 2t, fiber curvature 2/c(t)."""
    f = f0 - (R_h / n) * t
    c = c0 - 2.0 * t
    if f <= 0.0 or c <= 0.0:
        raise PastSingularTime("closed form queried at or past collapse")
    return f, c, 2.0 / c


# ---------------------------------------------------------------------------
# runs


def _fit_stop_time(times: np.ndarray, widths: np.ndarray,
                   t_pred: float) -> float:
    """Root of a linear fit of the collapse proxy over the last decade of
    remaining time; falls back to the last time if the fit degenerates."""
    remaining = t_pred - times
    cutoff = remaining[-1] * 10.0 if remaining[-1] > 0 else remaining[-1]
    sel = remaining <= max(cutoff, remaining[-1] + 1e-12)
    if np.count_nonzero(sel) < 2:
        sel = np.ones_like(times, dtype=bool)
    coeffs = np.polyfit(times[sel], widths[sel], 1)
    if coeffs[0] >= 0.0:
        return float(times[-1])
    return float(-coeffs[1] / coeffs[0])


def run_flow(params: HirzebruchParams | ProductParams,
             settings: RunSettings | None = None,
             shape: str = "tanh") -> FlowRun:
    settings = settings or RunSettings()
    settings.validate()
    if isinstance(params, ProductParams):
        return _run_product(params, settings)
    return _run_hirzebruch(params, settings, shape)


def _run_product(params: ProductParams, settings: RunSettings) -> FlowRun:
    """Stepped integration of the constant-rate system; the scheme is exact
    for linear-in-time solutions, so this reproduces the closed form."""
    params.validate()
    t_pred, _ = predict_max_time(product_class(params))
    rh = params.base_scalar
    states = [ProductState(t=0.0, f=params.f0, c=params.c0)]
    t = 0.0
    stop_reason = "time_exhausted"
    while True:
        remaining = t_pred - settings.stop_margin - t
        if remaining <= 0.0:
            break
        dt = min(settings.dt_max, settings.time_frac * (t_pred - t), remaining)
        # trapezoid step, exact for constant rates
        t = t + dt
        st = ProductState(t=t, f=params.f0 - (rh / params.n) * t,
                          c=params.c0 - 2.0 * t)
        states.append(st)
        if st.c < settings.v_floor:
            stop_reason = "fiber_collapsed"
            break
    monitors = [MonitorReport(t=s.t, heat_residual=0.0, min_f=s.f, max_f=s.f,
                              max_f_slack=0.0, grad_f_sq_sup=0.0,
                              grad_bound_ok=True, width=s.c)
                for s in states]
    diags = [product_diagnostics(s, params) for s in states]
    times = np.array([s.t for s in states])
    widths = np.array([s.c for s in states])
    t_obs = _fit_stop_time(times, widths, t_pred)
    return FlowRun(scenario="product", params=params, states=states,
                   monitors=monitors, diagnostics=diags,
                   T_predicted=t_pred, T_observed=t_obs,
                   stop_reason=stop_reason)


def _run_hirzebruch(params: HirzebruchParams, settings: RunSettings,
                    shape: str) -> FlowRun:
    problem = FlowProblem(params, settings)
    state = init_hirzebruch_profile(params, shape)
    t_pred, _ = predict_max_time(hirzebruch_class(params))
    states = [state]
    stop_reason = "time_exhausted"
    step_count = 0
    while True:
        remaining = t_pred - settings.stop_margin - state.t
        if remaining <= 1e-12:
            break
        if settings.dt_fixed is not None:
            dt = min(settings.dt_fixed, remaining)
        else:
            dt = min(settings.dt_max,
                     settings.time_frac * (t_pred - state.t), remaining)
        try:
            state = step_flow(problem, state, dt)
        except (StepRejected, MonotonicityLost) as exc:
            stop_reason = ("step_rejected" if isinstance(exc, StepRejected)
                           else "monotonicity_lost")
            log.warning("run stopped early at t=%.6f: %s", state.t, exc)
            break
        step_count += 1
        if step_count % settings.record_stride == 0:
            states.append(state)
        v_max = float(np.max(state.v_profile()))
        if 4.0 * params.k * v_max < settings.v_floor:
            stop_reason = "fiber_collapsed"
            if states[-1] is not state:
                states.append(state)
            break
    if states[-1] is not state:
        states.append(state)
    monitors = build_monitors(states, params)
    diags = [profile_diagnostics(s, params, settings.support_threshold)
             for s in states]
    times = np.array([s.t for s in states])
    proxy = np.array([4.0 * params.k * float(np.max(s.v_profile()))
                      for s in states])
    t_obs = _fit_stop_time(times, proxy, t_pred)
    return FlowRun(scenario="hirzebruch", params=params, states=states,
                   monitors=monitors, diagnostics=diags,
                   T_predicted=t_pred, T_observed=t_obs,
                   stop_reason=stop_reason)


def heat_residual_order(params: HirzebruchParams,
                        grids: Sequence[int] = (128, 256, 512),
                        stop_margin: float = 0.25,
                        dt_factor: float = 0.35
                        ) -> tuple[list[tuple[float, float]], float]:
    """Max heat residual per grid with dt tied to drho^2, plus the fitted
    log-log convergence order.  Expected ~2 for the TR-BDF2 + central
    stencil pair."""
    points = []
    for n_pts in grids:
        run_params = HirzebruchParams(
            a0=params.a0, b0=params.b0, n=params.n, k=params.k,
            R_h=params.R_h, L=params.L, grid_points=int(n_pts))
        drho = 2.0 * params.L / (n_pts - 1)
        settings = RunSettings(dt_fixed=dt_factor * drho ** 2,
                               stop_margin=stop_margin)
        run = run_flow(run_params, settings)
        resid = float(np.nanmax([m.heat_residual for m in run.monitors]))
        points.append((drho, resid))
    logs = np.log([p[0] for p in points]), np.log([p[1] for p in points])
    order = float(np.polyfit(logs[0], logs[1], 1)[0])
    return points, order


# ---------------------------------------------------------------------------
# chart reconstruction


def sampler_from_state(state: FlowState, params: HirzebruchParams,
                       **sampler_kwargs) -> ChartSampler:
    """Quintic-spline profile through the stored nodes, lifted to a full
    chart sampler.  The spline metric is an honest member of the ansatz
    family (any smooth increasing profile is), so chart-level identity
    checks on it are valid regardless of PDE accuracy."""
    spline = make_interp_spline(state.rho, state.f, k=5)
    d1 = spline.derivative(1)
    d2 = spline.derivative(2)
    d3 = spline.derivative(3)

    def prof(rho: float):
        return (float(spline(rho)), float(d1(rho)), float(d2(rho)),
                float(d3(rho)))

    return calabi_sampler(prof, n=params.n, k=params.k, **sampler_kwargs)
