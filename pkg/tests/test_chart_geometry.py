import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_logistic, random_structured_blocks
from fiberflow import chart_geometry as cg


def twisted_sampler(lower=1.0, width=1.0, n=1, k=1):
    return cg.calabi_sampler(make_logistic(lower, width), n=n, k=k)


# ---------------------------------------------------------------------------
# assembly and inversion


def test_assemble_block_metric_hand_value():
    base = cg.flat_base(1)
    blocks = cg.ChartMetricBlocks(base=base, f=2.0, s=np.array([0.5 + 0j]),
                                  g_fiber=3.0)
    g = cg.assemble_block_metric(blocks)
    assert np.allclose(g, np.array([[2.75, 1.5], [1.5, 3.0]]), atol=1e-15)


def test_inverse_blocks_hand_value():
    base = cg.flat_base(1)
    blocks = cg.ChartMetricBlocks(base=base, f=2.0, s=np.array([0.5 + 0j]),
                                  g_fiber=3.0)
    inv = cg.invert_block_metric(blocks)
    assert inv.base[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert inv.mixed[0] == pytest.approx(-0.25, abs=1e-15)
    assert inv.fiber == pytest.approx(11.0 / 24.0, abs=1e-15)


@settings(deadline=None, max_examples=60)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([1, 2, 3]))
def test_inverse_identity_property(seed, n):
    rng = np.random.default_rng(seed)
    blocks = random_structured_blocks(rng, n)
    g = cg.assemble_block_metric(blocks)
    ginv = cg.invert_block_metric(blocks).assemble()
    resid = np.max(np.abs(g @ ginv - np.eye(n + 1)))
    assert resid <= 1e-12


@settings(deadline=None, max_examples=40)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([1, 2, 3]))
def test_inverse_fiber_entry_positive(seed, n):
    rng = np.random.default_rng(seed)
    blocks = random_structured_blocks(rng, n)
    inv = cg.invert_block_metric(blocks)
    assert inv.fiber > 0.0
    evals = np.linalg.eigvalsh(inv.base)
    assert np.min(evals) > 0.0


def test_assemble_rejects_nonpositive_dilation():
    base = cg.flat_base(1)
    blocks = cg.ChartMetricBlocks(base=base, f=-1.0, s=np.zeros(1, complex),
                                  g_fiber=1.0)
    with pytest.raises(cg.NonPositiveDefinite):
        cg.assemble_block_metric(blocks)
    with pytest.raises(cg.NonPositiveDefinite):
        cg.invert_block_metric(blocks)


def test_validate_rejects_bad_shapes_and_positivity():
    base = cg.flat_base(2)
    bad_shape = cg.ChartMetricBlocks(base=base, f=1.0,
                                     s=np.zeros(3, complex), g_fiber=1.0)
    with pytest.raises(cg.StructureViolation):
        bad_shape.validate()
    bad_fiber = cg.ChartMetricBlocks(base=base, f=1.0,
                                     s=np.zeros(2, complex), g_fiber=0.0)
    with pytest.raises(cg.NonPositiveDefinite):
        bad_fiber.validate()


# ---------------------------------------------------------------------------
# structure checks


def test_fiber_christoffel_hand_value():
    base = cg.flat_base(1)
    blocks = cg.ChartMetricBlocks(base=base, f=2.0, s=np.array([0.5 + 0j]),
                                  g_fiber=3.0,
                                  dsbar_dxi=np.array([0.4 + 0j]))
    gamma = cg.fiber_christoffel(blocks)
    assert gamma[0] == pytest.approx(0.6, abs=1e-15)
    assert cg.check_totally_geodesic(blocks) == pytest.approx(0.6, abs=1e-15)


def test_twisted_chart_is_totally_geodesic_and_compatible():
    samp = twisted_sampler()
    rng = np.random.default_rng(3)
    for p in samp.random_points(rng, 8):
        blocks = samp.evaluate(p)
        assert cg.check_totally_geodesic(blocks) <= 1e-13
        assert cg.check_kahler_compatibility(blocks) <= 1e-13
        assert blocks.horizontal_homothety_residual() <= 1e-13
        blocks.validate()


def test_kahler_compatibility_detects_tampering():
    samp = twisted_sampler()
    p = np.array([0.1, 0.05, 1.0, 0.1])
    blocks = samp.evaluate(p)
    from dataclasses import replace
    broken = replace(blocks, dsbar_dz=blocks.dsbar_dz * 1.01)
    assert cg.check_kahler_compatibility(broken) > 1e-4


def test_ricci_blocks_refuses_horizontal_gradient():
    samp = twisted_sampler()
    p = np.array([0.1, 0.05, 1.0, 0.1])
    blocks = samp.evaluate(p)
    from dataclasses import replace
    broken = replace(blocks, df_dz=blocks.df_dz_filled() + 0.05)
    with pytest.raises(cg.StructureViolation):
        cg.ricci_blocks(broken)


def test_base_einstein_residual_fs_vs_perturbed():
    z = np.array([0.2 + 0.1j])
    fs = cg.fubini_study_base(z)
    assert cg.check_base_einstein(fs) <= 1e-10
    pert = cg.perturbed_fs_base(z)
    assert cg.check_base_einstein(pert) >= 1e-3


# ---------------------------------------------------------------------------
# base metric closed forms


def test_fubini_study_point_values():
    bm = cg.fubini_study_base(np.zeros(2, dtype=complex))
    assert np.allclose(bm.h, np.eye(2), atol=1e-15)
    assert np.allclose(bm.ricci, 3.0 * np.eye(2), atol=1e-15)
    assert bm.scalar == pytest.approx(6.0)
    bm.validate()


def test_fubini_study_derivatives_match_fd():
    z0 = np.array([0.21 - 0.13j, -0.07 + 0.29j])
    bm = cg.fubini_study_base(z0)
    step = 1e-4

    def h_at(z):
        return cg.fubini_study_base(z).h

    def dbar(fn, z, l):
        el = np.zeros(2, complex)
        el[l] = 1.0
        dx = (fn(z + el * step) - fn(z - el * step)) / (2 * step)
        dy = (fn(z + 1j * el * step) - fn(z - 1j * el * step)) / (2 * step)
        return 0.5 * (dx + 1j * dy)

    def dhol(fn, z, k):
        ek = np.zeros(2, complex)
        ek[k] = 1.0
        dx = (fn(z + ek * step) - fn(z - ek * step)) / (2 * step)
        dy = (fn(z + 1j * ek * step) - fn(z - 1j * ek * step)) / (2 * step)
        return 0.5 * (dx - 1j * dy)

    for k in range(2):
        fd = dhol(h_at, z0, k)
        assert np.max(np.abs(fd - bm.dh[k])) <= 1e-6
    for k in range(2):
        for l in range(2):
            fd = dhol(lambda z, l=l: dbar(h_at, z, l), z0, k)
            assert np.max(np.abs(fd - bm.d2h[k, l])) <= 1e-6


# ---------------------------------------------------------------------------
# Ricci: structured formulas against the log-det oracle


def test_structured_ricci_matches_oracle_product():
    samp = cg.product_sampler(base_size=3.0, fiber_size=1.0)
    rng = np.random.default_rng(11)
    for p in samp.random_points(rng, 6):
        blocks = samp.evaluate(p)
        ric = cg.ricci_blocks(blocks).assemble()
        oracle = cg.fd_ricci_oracle(samp, p).assemble()
        scale = np.max(np.abs(ric))
        assert np.max(np.abs(ric - oracle)) <= 1e-4 * scale


def test_structured_ricci_matches_oracle_twisted():
    samp = twisted_sampler()
    rng = np.random.default_rng(12)
    for p in samp.random_points(rng, 6):
        blocks = samp.evaluate(p)
        ric = cg.ricci_blocks(blocks).assemble()
        oracle = cg.fd_ricci_oracle(samp, p).assemble()
        scale = np.max(np.abs(ric))
        assert np.max(np.abs(ric - oracle)) <= 1e-4 * scale


def test_product_ricci_closed_relations():
    # Ricci of a metric product: base block is the base Ricci regardless of
    # the dilation constant, fiber block is Einstein with factor 2/size.
    size = 0.7
    samp = cg.product_sampler(base_size=2.5, fiber_size=size)
    p = np.array([0.2, -0.1, 0.3, 0.25])
    blocks = samp.evaluate(p)
    ric = cg.ricci_blocks(blocks)
    assert np.allclose(ric.base, blocks.base.ricci, atol=1e-12)
    assert ric.fiber == pytest.approx((2.0 / size) * blocks.g_fiber, rel=1e-12)
    assert np.max(np.abs(ric.mixed)) <= 1e-15


def test_fd_oracle_second_order_convergence():
    samp = twisted_sampler()
    p = np.array([0.11, -0.07, 1.02, 0.13])
    ric = cg.ricci_blocks(samp.evaluate(p)).assemble()
    err = []
    for h in (4e-3, 2e-3):
        oracle = cg.fd_ricci_oracle(samp, p, step=h).assemble()
        err.append(np.max(np.abs(oracle - ric)))
    order = np.log2(err[0] / err[1])
    assert order >= 1.9


def test_mixed_to_fiber_ratio_is_connection():
    # R_mixed / R_fiber reproduces the connection components; fourth-order
    # extrapolation keeps the oracle noise under the tight bound.
    samp = twisted_sampler(lower=1.0, width=2.0)
    rng = np.random.default_rng(21)
    for p in samp.random_points(rng, 4):
        blocks = samp.evaluate(p)
        oracle = cg.fd_ricci_oracle(samp, p, richardson=True)
        ratio = oracle.mixed / oracle.fiber
        assert np.max(np.abs(ratio - blocks.s)) <= 1e-6


def test_scalar_curvature_fd_product():
    # additive in the factors: base part scalar/f plus fiber part 2/size
    f0, size = 2.0, 1.0
    samp = cg.product_sampler(base_size=f0, fiber_size=size)
    val = cg.scalar_curvature_fd(samp, np.array([0.1, 0.0, 0.2, -0.1]))
    assert val == pytest.approx(2.0 / f0 + 2.0 / size, rel=1e-4)


# ---------------------------------------------------------------------------
# real form and real-geometry oracles


def test_real_metric_compatible_with_complex_structure():
    samp = twisted_sampler()
    p = np.array([0.12, -0.04, 1.1, 0.2])
    g = cg.real_metric(samp.evaluate(p))
    j = cg.complex_structure(2)
    assert np.allclose(g, g.T, atol=1e-14)
    assert np.min(np.linalg.eigvalsh(g)) > 0.0
    assert np.allclose(j.T @ g @ j, g, atol=1e-13)
    omega = j.T @ g
    assert np.allclose(omega, -omega.T, atol=1e-13)


def test_real_partials_convention():
    # F = |z|^2 has d_z F = conj(z); real gradient is (2x, 2y)
    z = 0.3 - 0.4j
    grad = cg.real_partials(np.array([np.conj(z)]))
    assert grad[0] == pytest.approx(2 * z.real)
    assert grad[1] == pytest.approx(2 * z.imag)


@pytest.mark.parametrize("size", [1.0, 0.5])
def test_riemann_fd_round_sphere(size):
    def metric(p):
        w = 1.0 + p[0] ** 2 + p[1] ** 2
        return cg.real_metric_from_hermitian(
            np.array([[size / w ** 2]], dtype=complex))

    pt = np.array([0.23, -0.11])
    rlow = cg.riemann_fd(metric, pt, 1e-3)
    kappa = cg.sectional_from_riemann(rlow, metric(pt),
                                      np.array([1.0, 0.0]),
                                      np.array([0.0, 1.0]))
    assert kappa == pytest.approx(2.0 / size, rel=1e-3)


def test_riemann_fd_flat_chart():
    samp = cg.flat_sampler(1)
    rlow = cg.riemann_fd(samp.metric_fn(), np.array([0.1, 0.2, -0.1, 0.3]),
                         1e-3)
    assert np.max(np.abs(rlow)) <= 1e-8


def test_domain_edge_guard():
    samp = twisted_sampler()
    edge = samp.domain[:, 1].copy()
    with pytest.raises(cg.DomainEdge):
        cg.fd_ricci_oracle(samp, edge)


def test_random_points_stay_inside():
    samp = twisted_sampler()
    rng = np.random.default_rng(5)
    pts = samp.random_points(rng, 50)
    for p in pts:
        samp.check_point(p, margin=2.5 * samp.fd_step)
