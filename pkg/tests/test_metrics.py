import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoslab.kernels import coulomb_trunc_kernel, rough_sign_kernel, sine_kernel, zero_kernel
from chaoslab.laws import MaxwellianLaw, m_p_quadrature
from chaoslab.metrics import (THRESHOLD, Binning, choose_nu, hn_gronwall_envelope,
                              marginal_and_distance, mc_exp_moment, mc_rn_moments, m_p, r_n,
                              r_n_batch, regime_parameter, sup_ratio, theorem_bound, trivial_bound)
from chaoslab.particles import ParticleEnsemble, sample_initial
from chaoslab.vlasov import PhaseDensity


def test_r_n_vanishes_without_interaction(law):
    assert r_n(sample_initial(law, 30, 0), law, zero_kernel()) == 0.0


def test_r_n_single_particle_keeps_only_the_mean_field_term():
    law = MaxwellianLaw(amplitude=0.4)
    k = sine_kernel(1.0)
    x, v = 0.1, 0.7
    expected = -law.score(x, v) * law.conv_field(k)(x)
    assert r_n(([x], [v]), law, k) == pytest.approx(float(expected), abs=1e-15)


def test_r_n_two_particle_hand_value(law, sine):
    assert r_n(([0.0, 0.25], [0.5, -1.0]), law, sine) == pytest.approx(0.75, abs=1e-14)


def test_trivial_bound_holds(any_kernel):
    law = MaxwellianLaw(amplitude=0.3)
    for seed in range(5):
        ens = sample_initial(law, 40, seed)
        assert abs(r_n(ens, law, any_kernel)) <= trivial_bound(ens, law, any_kernel) + 1e-12


def test_batch_agrees_with_double_sum():
    law = MaxwellianLaw(amplitude=0.3)
    rng = np.random.default_rng(0)
    x, v = rng.random((4, 25)), rng.standard_normal((4, 25))
    for k in (sine_kernel(0.7), coulomb_trunc_kernel(1.0)):
        direct = [r_n((x[s], v[s]), law, k) for s in range(4)]
        np.testing.assert_allclose(r_n_batch(x, v, law, k), direct, atol=1e-10)


def test_gaussian_score_moments(law):
    assert m_p(law, 2) == pytest.approx(1.0, abs=1e-14)
    assert m_p(law, 1) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-14)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_certified_supremum(sigma):
    law = MaxwellianLaw(sigma=sigma)
    assert sup_ratio(law, 64) <= law.sup_mp_over_p() + 1e-15
    assert sup_ratio(law, 64) == pytest.approx(math.sqrt(2 / math.pi) / sigma)


@pytest.mark.parametrize("p", range(1, 9))
def test_closed_form_moments_match_quadrature(p):
    law = MaxwellianLaw(sigma=1.3, amplitude=0.2)
    assert abs(m_p(law, p) - m_p_quadrature(law, p)) <= 1e-6


def test_choose_nu():
    assert choose_nu(1.0, 1.0) == pytest.approx(1 / (16 * math.e ** 2), rel=1e-15)
    assert choose_nu(1.0, 1.0) == pytest.approx(0.008460, abs=2e-6)
    assert choose_nu(2.0, 2.0) == pytest.approx(choose_nu(1.0, 1.0) / 4)
    assert choose_nu(3.0, 0.7) * 3.0 * 0.7 == pytest.approx(THRESHOLD, rel=1e-15)
    with pytest.raises(ValueError):
        choose_nu(0.0, 1.0)


def test_theorem_bound_values():
    assert theorem_bound(0.0) == 5.0
    a = regime_parameter(1.0, 0.01)
    assert a == pytest.approx(0.591124, abs=1e-6)
    assert theorem_bound(a) == pytest.approx(9.95357, abs=1e-5)
    assert theorem_bound(0.5) == pytest.approx(5 + 6 * (0.5 / 0.75) ** 2)
    assert math.isfinite(theorem_bound(0.999))
    with pytest.raises(ValueError, match="outside theorem regime"):
        theorem_bound(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.998), st.floats(1e-4, 1e-3))
def test_theorem_bound_increasing(a, da):
    assert theorem_bound(a + da) > theorem_bound(a)


def test_exp_moment_without_interaction_is_exactly_one(law):
    est = mc_exp_moment(law, zero_kernel(), 1.0, 16, 1000, 3)
    assert est.estimate == 1.0 and est.stderr == 0.0


def test_exp_moment_tends_to_one_for_small_nu(law, sine):
    est = mc_exp_moment(law, sine, 1e-9, 16, 2000, 3)
    assert est.estimate == pytest.approx(1.0, abs=1e-7)


def test_exp_moment_reproducible(law, sine):
    a = mc_exp_moment(law, sine, 0.5, 32, 5000, 11)
    b = mc_exp_moment(law, sine, 0.5, 32, 5000, 11)
    assert a == b


def test_exp_moment_flags_domination():
    law = MaxwellianLaw()
    est = mc_exp_moment(law, sine_kernel(1.0), 20.0, 8, 2000, 0)
    assert est.unreliable and math.isfinite(est.log_estimate)


CATALOG = [sine_kernel(1.0), coulomb_trunc_kernel(1.0), rough_sign_kernel(1.0)]


@pytest.mark.parametrize("kernel", CATALOG, ids=lambda k: k.kind)
@pytest.mark.parametrize("amplitude", [0.0, 0.4])
@pytest.mark.parametrize("n", [2, 8, 32])
def test_r_n_is_centred_and_square_bounded(kernel, amplitude, n):
    law = MaxwellianLaw(amplitude=amplitude)
    mom = mc_rn_moments(law, kernel, n, 20_000, 100 + n)
    assert abs(mom[1].mean) <= 3 * mom[1].stderr
    assert mom[2].mean <= 4 * kernel.sup_norm ** 2 * m_p(law, 2) ** 2 + 3 * mom[2].stderr


def iid_replicas(law, n, replicas, seed=0):
    return [sample_initial(law, n, seed * 1000 + r) for r in range(replicas)]


def test_sampling_baseline():
    law = MaxwellianLaw(amplitude=0.3)
    d = marginal_and_distance(iid_replicas(law, 1000, 100), law, k=1, bins=(8, 8))
    assert d.l1_distance <= 0.05 and d.kl_estimate <= 0.01
    assert d.histogram.probs.sum() == pytest.approx(1.0)
    assert d.min_expected_count >= 20


def test_shifted_reference_distance():
    law = MaxwellianLaw(amplitude=0.3)
    f = PhaseDensity.from_law(law, 128, 128)
    shifted = PhaseDensity(np.roll(f.values, 64, axis=0), f.v_max)
    exact = float(np.abs(f.values - shifted.values).sum() * f.cell_area)
    d = marginal_and_distance(iid_replicas(law, 1000, 100), shifted, k=1, bins=(16, 4))
    assert abs(d.l1_distance - exact) <= 0.05


def test_pinsker_consistency_of_statistics():
    law = MaxwellianLaw(amplitude=0.3)
    ref = MaxwellianLaw(amplitude=0.1)
    d = marginal_and_distance(iid_replicas(law, 1000, 50), ref, k=1, bins=(8, 8))
    noise = 3 * d.l1_stderr
    assert d.l1_distance <= math.sqrt(2 * max(d.kl_plugin, 0.0)) + noise


def test_second_order_marginal_baseline():
    law = MaxwellianLaw()
    d = marginal_and_distance(iid_replicas(law, 1000, 100), law, k=2, bins=(4, 4))
    assert d.histogram.probs.shape == (4, 4, 4, 4)
    assert d.l1_distance <= 0.1


def test_undersampled_bins_are_widened(law, caplog):
    with caplog.at_level(logging.WARNING):
        d = marginal_and_distance(iid_replicas(law, 50, 2), law, k=1, bins=(16, 16))
    assert "undersampled" in caplog.text
    assert d.min_expected_count >= 20
    assert d.histogram.binning.shape[0] * d.histogram.binning.shape[1] <= 5


def test_marginal_order_must_fit():
    ens = ParticleEnsemble([[0.1]], [[0.0]])
    with pytest.raises(ValueError):
        marginal_and_distance([ens], MaxwellianLaw(), k=2)


def test_binning_edges(law):
    b = Binning.equiprobable(law, 4, 4)
    assert b.describe() == "bx=4;bv=4"
    np.testing.assert_allclose(law.bin_probabilities(b.x_edges, b.v_edges), 1 / 16)


def test_envelope():
    assert hn_gronwall_envelope(0, 0, 0, 0.5, 3.0, 10) == 0.0
    assert hn_gronwall_envelope(0.1, 0.2, 1.0, 0.5, 0.0, 10, horizon=2.0) == pytest.approx(0.3 + 2.0 / 5)
    pre = lambda n: hn_gronwall_envelope(0, 0, 1.0, 0.5, 0.0, n, horizon=1.0)
    assert pre(20) == pytest.approx(pre(10) / 2)
    with pytest.raises(ValueError):
        hn_gronwall_envelope(0, 0, 0, 0.0, 1.0, 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 2), st.floats(0.1, 2), st.floats(0, 2),
       st.integers(1, 100), st.sampled_from(["h0", "alpha", "L", "t"]))
def test_envelope_monotone(h0, alpha, L, nu, t, n, which):
    args = dict(h0=h0, alpha_n=alpha, L=L, nu=nu, t=t, n=n)
    key = {"h0": "h0", "alpha": "alpha_n", "L": "L", "t": "t"}[which]
    bumped = dict(args, **{key: args[key] + 0.1})
    assert hn_gronwall_envelope(**bumped) >= hn_gronwall_envelope(**args)
