import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoslab.kernels import (FREE, DensityField, convolve, coulomb_trunc_kernel, eval_kernel,
                              make_kernel, pair_sums, scaled, sine_kernel, wrap_displacement,
                              wrap_position, zero_kernel)


def uniform(g=64):
    return DensityField(np.ones(g), 1.0 / g)


def test_sine_at_origin_is_zero(sine):
    assert eval_kernel(sine, 0.0) == 0.0


def test_sine_quarter_period(sine):
    assert eval_kernel(sine, 0.25) == pytest.approx(1.0, abs=1e-15)


def test_every_kernel_vanishes_at_origin(any_kernel):
    assert eval_kernel(any_kernel, 0.0) == 0.0
    assert eval_kernel(any_kernel, 1.0) == 0.0  # wraps to the origin


def test_odd_and_bounded_on_dense_grid(any_kernel):
    x = np.linspace(-0.5, 0.5, 20001)
    k = eval_kernel(any_kernel, x)
    assert np.all(np.abs(k) <= any_kernel.sup_norm + 1e-12)
    assert any_kernel.is_odd
    np.testing.assert_allclose(eval_kernel(any_kernel, -x), -k, atol=1e-14)


def test_minimal_image():
    np.testing.assert_allclose(wrap_displacement([0.7, -0.7, 0.5, -0.5]), [-0.3, 0.3, -0.5, -0.5])
    assert np.all(wrap_position(np.array([-1e-18, 1.0, 2.3])) < 1.0)


def test_two_dimensional_sine_norm():
    k = sine_kernel(2.0, dim=2)
    assert k.sup_norm == pytest.approx(2.0 * np.sqrt(2.0))
    out = eval_kernel(k, np.array([[0.25, 0.25], [0.0, 0.0]]))
    np.testing.assert_allclose(out, [[2.0, 2.0], [0.0, 0.0]], atol=1e-15)


def test_coulomb_sup_norm_scales_with_dimension():
    assert coulomb_trunc_kernel(1.0, 1e-3, dim=1).sup_norm == 1.0
    assert coulomb_trunc_kernel(1.0, 1e-3, dim=2).sup_norm == pytest.approx(1e3)


def test_make_kernel_from_config():
    k = make_kernel({"kind": "coulomb_trunc", "kappa": 2.0, "delta": 1e-2})
    assert k.params == {"kappa": 2.0, "delta": 1e-2}
    with pytest.raises(ValueError):
        make_kernel({"kind": "coulomb"})
    with pytest.raises(ValueError):
        make_kernel({"kind": "sine"}, domain=FREE)


def test_scaled_kernel():
    k = scaled(sine_kernel(1.0), 0.5)
    assert k.sup_norm == 0.5
    assert eval_kernel(k, 0.25) == pytest.approx(0.5)


def test_odd_kernel_against_uniform_density_gives_zero_field(any_kernel):
    np.testing.assert_allclose(convolve(any_kernel, uniform()), 0.0, atol=1e-12)


def test_point_mass_density_reproduces_kernel(any_kernel):
    g = 128
    vals = np.zeros(g)
    vals[37] = g
    rho = DensityField(vals, 1.0 / g)
    expected = eval_kernel(any_kernel, rho.nodes - rho.nodes[37])
    np.testing.assert_allclose(convolve(any_kernel, rho), expected, atol=1e-14)


def test_field_bounded_by_sup_norm(any_kernel):
    rng = np.random.default_rng(1)
    vals = rng.random(100)
    rho = DensityField(vals / vals.mean(), 0.01)
    assert np.max(np.abs(convolve(any_kernel, rho))) <= any_kernel.sup_norm + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 2 ** 32 - 1))
def test_convolution_is_linear(a, seed):
    rng = np.random.default_rng(seed)
    g = 48
    r1, r2 = rng.random(g), rng.random(g)
    r1 /= r1.mean()
    r2 /= r2.mean()
    k = coulomb_trunc_kernel(1.0, 1e-3)
    mix = convolve(k, DensityField(a * r1 + (1 - a) * r2, 1.0 / g))
    sep = a * convolve(k, DensityField(r1, 1.0 / g)) + (1 - a) * convolve(k, DensityField(r2, 1.0 / g))
    np.testing.assert_allclose(mix, sep, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 63), st.integers(0, 2 ** 32 - 1))
def test_symmetric_density_has_no_field_at_its_centre(centre, seed):
    g = 64
    rng = np.random.default_rng(seed)
    half = rng.random(g // 2)
    # symmetric about node `centre`: rho[centre + j] == rho[centre - j]
    offsets = (np.arange(g) - centre) % g
    dist = np.minimum(offsets, g - offsets)
    vals = half[np.minimum(dist, g // 2 - 1)]
    rho = DensityField(vals / vals.mean(), 1.0 / g)
    for k in (sine_kernel(), coulomb_trunc_kernel(1.0, 1e-3)):
        assert abs(convolve(k, rho)[centre]) < 1e-10


def test_mass_and_topology_checks(sine):
    with pytest.raises(ValueError):
        convolve(sine, DensityField(np.ones(8) * 2.0, 1.0 / 8))
    with pytest.raises(ValueError):
        convolve(coulomb_trunc_kernel(domain=FREE), uniform())
    with pytest.raises(ValueError):
        DensityField(-np.ones(4), 0.25)


def test_fourier_split_matches_direct_pair_sum(sine):
    rng = np.random.default_rng(0)
    x = rng.random((3, 200, 1))
    np.testing.assert_allclose(pair_sums(sine, x), pair_sums(sine, x, method="direct"), atol=1e-12)


def test_pair_sum_of_zero_kernel():
    assert not pair_sums(zero_kernel(), np.random.default_rng(0).random((10, 1))).any()
