"""Curvature bookkeeping for the fibration: fundamental tensor of the
horizontal distribution, gradient invariants, sectional-curvature splitting.

Everything operates on real orthonormal frames built at a single chart
point.  The fundamental tensor combines the non-integrability of the
horizontal distribution with its failure to be minimal; for the metrics
handled here both parts are controlled by the vertical gradient of the
dilation, which is what the closed forms below exploit.  Finite-difference
routines from `chart_geometry` act as the independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .chart_geometry import (
    ChartError,
    ChartMetricBlocks,
    ChartSampler,
    complex_structure,
    real_metric,
    real_partials,
    riemann_fd,
    riem4,
    sectional_from_riemann,
)


class NotHorizontal(ChartError):
    """Vector handed to a horizontal-slot operation is not horizontal."""


class DegeneratePlane(ChartError):
    """Spanning vectors are linearly dependent (or numerically so)."""


HORIZONTALITY_TOL = 1e-9


@dataclass(frozen=True)
class FramePoint:
    """Chart point with assembled real metric and adapted orthonormal frames.

    `vertical` has shape (2, d) and spans the fiber tangent; `horizontal`
    has shape (2n, d).  Rows are orthonormal for `g_real`.  `sampler` is
    kept when known so curvature oracles can stencil around the point.
    """

    blocks: ChartMetricBlocks
    point: np.ndarray
    g_real: np.ndarray
    g_real_inv: np.ndarray
    j: np.ndarray
    vertical: np.ndarray
    horizontal: np.ndarray
    sampler: ChartSampler | None = None

    @property
    def n(self) -> int:
        return self.blocks.n

    @property
    def dim(self) -> int:
        return 2 * self.blocks.n + 2


def _gram_schmidt(g: np.ndarray, seeds: list[np.ndarray],
                  against: list[np.ndarray]) -> np.ndarray:
    out: list[np.ndarray] = []
    for v in seeds:
        w = np.array(v, dtype=float)
        for u in against + out:
            w = w - (u @ g @ w) * u
        nrm = float(w @ g @ w)
        if nrm <= 1e-24:
            raise DegeneratePlane("frame seed collapsed under projection")
        out.append(w / np.sqrt(nrm))
    return np.array(out)


def frame_point_from_blocks(blocks: ChartMetricBlocks,
                            point: np.ndarray | None = None,
                            sampler: ChartSampler | None = None) -> FramePoint:
    n = blocks.n
    d = 2 * n + 2
    g = real_metric(blocks)
    ginv = np.linalg.inv(g)
    j = complex_structure(n + 1)
    eye = np.eye(d)
    vertical = _gram_schmidt(g, [eye[2 * n], eye[2 * n + 1]], [])
    horizontal = _gram_schmidt(g, [eye[a] for a in range(2 * n)],
                               list(vertical))
    if point is None:
        point = np.zeros(d)
    return FramePoint(blocks=blocks, point=np.asarray(point, dtype=float),
                      g_real=g, g_real_inv=ginv, j=j,
                      vertical=vertical, horizontal=horizontal,
                      sampler=sampler)


def frame_point(sampler: ChartSampler, point: np.ndarray) -> FramePoint:
    blocks = sampler.evaluate(np.asarray(point, dtype=float))
    return frame_point_from_blocks(blocks, point=point, sampler=sampler)


def inner(fp: FramePoint, x: np.ndarray, y: np.ndarray) -> float:
    return float(x @ fp.g_real @ y)


def omega(fp: FramePoint, x: np.ndarray, y: np.ndarray) -> float:
    """Kahler form omega(x, y) = g(Jx, y)."""
    return float((fp.j @ x) @ fp.g_real @ y)


def _require_horizontal(fp: FramePoint, x: np.ndarray) -> None:
    nrm = np.sqrt(max(inner(fp, x, x), 1e-30))
    for u in fp.vertical:
        if abs(inner(fp, u, x)) > HORIZONTALITY_TOL * nrm:
            raise NotHorizontal("vector has a vertical component")


# ---------------------------------------------------------------------------
# gradient invariants


def grad_f(fp: FramePoint) -> np.ndarray:
    """Real gradient vector of the dilation; vertical by construction."""
    b = fp.blocks
    d_hol = np.concatenate([b.df_dz_filled(), [complex(b.df_dxi)]])
    return fp.g_real_inv @ real_partials(d_hol)


def grad_ln_f(fp: FramePoint) -> np.ndarray:
    return grad_f(fp) / fp.blocks.f


def grad_f_norm_sq(fp: FramePoint) -> float:
    """|grad f|^2 = 2 |d_xi f|^2 / g_fiber when the gradient is vertical."""
    v = grad_f(fp)
    return inner(fp, v, v)


def grad_ln_f_norm_sq(fp: FramePoint) -> float:
    v = grad_ln_f(fp)
    return inner(fp, v, v)


# ---------------------------------------------------------------------------
# fundamental tensor of the horizontal distribution


def a_tensor(fp: FramePoint, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vertical value of the fundamental tensor on two horizontal vectors.

    A_xy = 1/2 (omega(x, y) J grad(ln f) - g(x, y) grad(ln f)); the skew
    part is the obstruction to integrability, the symmetric part the mean
    curvature of the horizontal distribution.
    """
    _require_horizontal(fp, x)
    _require_horizontal(fp, y)
    v = grad_ln_f(fp)
    return 0.5 * (omega(fp, x, y) * (fp.j @ v) - inner(fp, x, y) * v)


def a_tensor_mixed(fp: FramePoint, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Horizontal value on (horizontal, vertical), via the duality
    g(A_x u, y) = -g(A_x y, u)."""
    _require_horizontal(fp, x)
    out = np.zeros(fp.dim)
    for e in fp.horizontal:
        out = out - inner(fp, a_tensor(fp, x, e), u) * e
    return out


def a_norm_sq(fp: FramePoint) -> float:
    """Full tensor norm |A|^2, both slots counted.

    The (horizontal, vertical) frame sum equals the (horizontal,
    horizontal) one by duality, hence the factor two on a single brute
    double sum.
    """
    tot = 0.0
    for x in fp.horizontal:
        for y in fp.horizontal:
            w = a_tensor(fp, x, y)
            tot += inner(fp, w, w)
    return 2.0 * tot


def a_norm_sq_closed(fp: FramePoint) -> float:
    """|A|^2 = 2n |grad ln f|^2."""
    return 2.0 * fp.n * grad_ln_f_norm_sq(fp)


# ---------------------------------------------------------------------------
# sectional-curvature splitting


def dilation_grad_norm_sq(fp: FramePoint) -> float:
    """|grad ln lambda|^2 for the horizontally conformal factor lambda.

    The horizontal part of the metric is f times the base metric, so the
    conformality factor of the projection is lambda = f^(-1/2) and the
    gradient norm is one quarter of |grad ln f|^2.  The curvature split
    below holds with this normalization (and measurably not with ln f
    itself).
    """
    return 0.25 * grad_ln_f_norm_sq(fp)


def sectional_residual(fp: FramePoint, x: np.ndarray, y: np.ndarray,
                       kappa_base: float, step: float = 1e-3) -> float:
    """Defect of kappa_B / f = kappa_M + 3 |A_xy|^2 + |grad ln lambda|^2.

    `kappa_base` is the base sectional curvature of the projected plane;
    kappa_M comes from the metric-only curvature stencil, the remaining
    terms from closed frame algebra, so the residual genuinely ties the
    two routes together.  Zero within stencil tolerance for valid
    submersion metrics.
    """
    if fp.sampler is None:
        raise ChartError("sectional residual needs a sampler to stencil around")
    _require_horizontal(fp, x)
    _require_horizontal(fp, y)
    gram = inner(fp, x, x) * inner(fp, y, y) - inner(fp, x, y) ** 2
    if gram <= 1e-12:
        raise DegeneratePlane("plane spanning vectors are parallel")
    rlow = riemann_fd(fp.sampler.metric_fn(), fp.point, step)
    ambient = sectional_from_riemann(rlow, fp.g_real, x, y)
    w = a_tensor(fp, x, y)
    return (kappa_base / fp.blocks.f
            - ambient - 3.0 * inner(fp, w, w) - dilation_grad_norm_sq(fp))


def base_sectional_fd(fp: FramePoint, x: np.ndarray, y: np.ndarray,
                      step: float = 1e-3) -> float:
    """Base sectional curvature of the projected plane, by stencils on the
    base metric alone (the projection drops fiber coordinates)."""
    if fp.sampler is None:
        raise ChartError("base stencil needs a sampler")
    n = fp.n
    fiber_tail = fp.point[2 * n:]
    samp = fp.sampler

    def base_fn(pb: np.ndarray) -> np.ndarray:
        full = np.concatenate([pb, fiber_tail])
        from .chart_geometry import real_metric_from_hermitian
        return real_metric_from_hermitian(samp.evaluate(full).base.h)

    h_real = base_fn(fp.point[:2 * n])
    rlow_b = riemann_fd(base_fn, fp.point[:2 * n], step)
    return sectional_from_riemann(rlow_b, h_real, x[:2 * n], y[:2 * n])


def vertical_sectional(blocks: ChartMetricBlocks) -> float:
    """Intrinsic (= ambient, fibers being geodesic) fiber curvature."""
    g = blocks.g_fiber
    dd_ln_g = blocks.d2g / g - abs(blocks.dg_dxi) ** 2 / g ** 2
    return float(-dd_ln_g / g)


def hessian_ln_f_fd(fp: FramePoint, u: np.ndarray, w: np.ndarray,
                    step: float = 1e-3) -> float:
    """Covariant Hessian of ln f on (u, w) via metric-only stencils."""
    if fp.sampler is None:
        raise ChartError("hessian stencil needs a sampler")
    samp = fp.sampler

    def lnf(p: np.ndarray) -> float:
        return float(np.log(samp.evaluate(p).f))

    p = fp.point
    d = p.size
    hess = np.zeros((d, d))
    f0 = lnf(p)
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = step
        hess[a, a] = (lnf(p + ea) - 2.0 * f0 + lnf(p - ea)) / step ** 2
    for a in range(d):
        for b in range(a + 1, d):
            ea = np.zeros(d)
            eb = np.zeros(d)
            ea[a] = step
            eb[b] = step
            val = (lnf(p + ea + eb) - lnf(p + ea - eb)
                   - lnf(p - ea + eb) + lnf(p - ea - eb)) / (4.0 * step ** 2)
            hess[a, b] = val
            hess[b, a] = val
    from .chart_geometry import christoffel_fd
    gamma = christoffel_fd(samp.metric_fn(), p, step)
    grad1 = np.zeros(d)
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = step
        grad1[a] = (lnf(p + ea) - lnf(p - ea)) / (2.0 * step)
    cov = hess - np.einsum('cab,c->ab', gamma, grad1)
    return float(u @ cov @ w)


def mixed_sectional_closed(fp: FramePoint, u: np.ndarray, x: np.ndarray,
                           step: float = 1e-3) -> float:
    """<R(x, u) u, x> for unit vertical u, unit horizontal x.

    Closed form -1/2 (Hess ln f (u, u) + (d ln f (u))^2) + |A_x u|^2; the
    Hessian piece is stenciled, the rest is frame algebra.
    """
    v = grad_ln_f(fp)
    du = inner(fp, v, u)
    au = a_tensor_mixed(fp, x, u)
    hess = hessian_ln_f_fd(fp, u, u, step)
    return -0.5 * (hess + du * du) + inner(fp, au, au)


def mixed_sectional_fd(fp: FramePoint, u: np.ndarray, x: np.ndarray,
                       step: float = 1e-3,
                       rlow: np.ndarray | None = None) -> float:
    if rlow is None:
        if fp.sampler is None:
            raise ChartError("curvature stencil needs a sampler")
        rlow = riemann_fd(fp.sampler.metric_fn(), fp.point, step)
    return riem4(rlow, x, u, u, x)


def vertical_horizontal_curvature(fp: FramePoint,
                                  step: float = 1e-3) -> np.ndarray:
    """Closed-form R(v_i, x_j, v_i, x_j) over the adapted frames, (2, 2n).

    Each entry stays bounded while the fiber collapses, which is what
    makes the vertical sectional term dominate the curvature blowup.
    """
    out = np.zeros((2, 2 * fp.n))
    for i, u in enumerate(fp.vertical):
        for jdx, x in enumerate(fp.horizontal):
            out[i, jdx] = mixed_sectional_closed(fp, u, x, step)
    return out


def mixed_curvature_residuals(fp: FramePoint, step: float = 1e-3,
                              rlow: np.ndarray | None = None
                              ) -> tuple[float, float]:
    """Max |<R(h, h) h, v>| and |<R(v, v) v, h>| over the adapted frames.

    These are the curvature components a metric product cannot have; for
    the structured metrics here they vanish to stencil tolerance, and a
    generic perturbation of the metric makes them jump, so they act as a
    splitting detector.
    """
    if rlow is None:
        if fp.sampler is None:
            raise ChartError("curvature stencil needs a sampler")
        rlow = riemann_fd(fp.sampler.metric_fn(), fp.point, step)
    hhv = 0.0
    for x in fp.horizontal:
        for y in fp.horizontal:
            for z in fp.horizontal:
                for u in fp.vertical:
                    hhv = max(hhv, abs(riem4(rlow, x, y, z, u)))
    vvh = 0.0
    u0, u1 = fp.vertical
    for z in fp.vertical:
        for x in fp.horizontal:
            vvh = max(vvh, abs(riem4(rlow, u0, u1, z, x)))
    return hhv, vvh


# ---------------------------------------------------------------------------
# pointwise diagnostics bundle


@dataclass(frozen=True)
class CurvatureDiagnostics:
    a_norm_sq: float
    grad_ln_f_norm_sq: float
    vertical_sectional: float
    dominant_scalar: float
    horizontal_sectional: float
    rm_norm_estimate: float
    mixed_max: float | None = None


def curvature_diagnostics(fp: FramePoint,
                          mixed_max: float | None = None
                          ) -> CurvatureDiagnostics:
    """Closed-form diagnostics bundle at a frame point.

    The horizontal entry uses the one-plane reduction only available over
    a surface base.  `dominant_scalar` is twice the vertical sectional
    value, the leading term of the scalar curvature under collapse.  The
    norm estimate combines the two sectional contributions the way a
    metric product would; `mixed_max` can be filled from
    `vertical_horizontal_curvature` when a sampler is around.
    """
    blocks = fp.blocks
    if blocks.n != 1:
        raise ChartError("closed horizontal sectional needs a surface base")
    grad_sq = grad_ln_f_norm_sq(fp)
    a_sq = 2.0 * blocks.n * grad_sq
    k_v = vertical_sectional(blocks)
    kappa_h = blocks.base.scalar / blocks.f - grad_sq
    rm = float(np.sqrt(4.0 * k_v ** 2 + 4.0 * kappa_h ** 2))
    if mixed_max is None and fp.sampler is not None:
        mixed_max = float(np.max(np.abs(vertical_horizontal_curvature(fp))))
    return CurvatureDiagnostics(
        a_norm_sq=float(a_sq),
        grad_ln_f_norm_sq=float(grad_sq),
        vertical_sectional=k_v,
        dominant_scalar=2.0 * k_v,
        horizontal_sectional=float(kappa_h),
        rm_norm_estimate=rm,
        mixed_max=mixed_max,
    )


def scale_blocks(blocks: ChartMetricBlocks, factor: float) -> ChartMetricBlocks:
    """Blocks of factor * g.  Dilation and fiber data scale; the base
    metric, connection components and their derivatives do not."""
    if factor <= 0.0:
        raise ChartError("scale factor must be positive")
    return replace(
        blocks,
        f=blocks.f * factor,
        df_dxi=blocks.df_dxi * factor,
        d2f=blocks.d2f * factor,
        df_dz=None if blocks.df_dz is None else blocks.df_dz * factor,
        g_fiber=blocks.g_fiber * factor,
        dg_dxi=blocks.dg_dxi * factor,
        d2g=blocks.d2g * factor,
    )
