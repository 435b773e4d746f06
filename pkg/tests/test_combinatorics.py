import math
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoslab import combinatorics as cb


def test_multiplicity_examples():
    assert cb.multiplicity((1, 1, 2), 3) == (2, 1, 0)
    assert cb.multiplicity((2, 2, 2, 2), 2) == (0, 4)
    assert cb.multiplicity((3,) * 5, 4) == (0, 0, 5, 0)
    with pytest.raises(ValueError):
        cb.multiplicity((0, 1), 2)


def test_support_examples():
    assert cb.support((1, 1, 2)) == {1, 2}
    assert cb.support((4, 4, 4)) == {4}
    assert len(cb.support((1, 2, 3, 4))) == 4


@given(st.lists(st.integers(1, 6), max_size=10))
def test_signature_sums_to_length(I):
    sig = cb.multiplicity(I, 6)
    assert sum(sig) == len(I)
    assert sum(1 for a in sig if a) == len(cb.support(I))


def test_effective_counts():
    for q in range(1, 6):
        assert cb.count_E_bruteforce(q, 1) == cb.count_E_formula(q, 1) == 0
        assert cb.count_E_bruteforce(q, 0) == cb.count_E_formula(q, 0) == 1
    assert cb.count_E_bruteforce(3, 2) == cb.count_E_formula(3, 2) == 3
    assert cb.count_E_bruteforce(3, 4) == cb.count_E_formula(3, 4) == 21


def test_counts_are_exact_big_integers():
    big = cb.count_E_formula(60, 16)
    assert isinstance(big, int) and big > 2 ** 63


def test_enumeration_guard():
    with pytest.raises(cb.EnumerationTooLarge):
        cb.count_E_bruteforce(10, 9)


def test_effective_bound_examples():
    assert cb.bound_E(3, 4) == pytest.approx(2 * math.e ** 2 * 9 * 4)
    assert cb.bound_E(3, 4) >= 21
    # the closed form gives (p/2) e^{p/2} q^{p/2} (p/2)^{p/2} = 4e at q=4, p=2
    assert cb.bound_E(4, 2) == pytest.approx(4 * math.e)
    assert cb.count_E_bruteforce(4, 2) == 4
    for q in range(1, 9):
        assert cb.count_E_formula(q, q) <= cb.bound_E(q, q) < math.inf


def test_effective_bound_chain_is_ordered():
    for q in range(1, 8):
        for p in range(1, q + 1):
            middle, final = cb.bound_E_chain(q, p)
            assert cb.count_E_formula(q, p) <= middle <= final * (1 + 1e-12)


def test_admissible_J_examples():
    assert cb.enumerate_P_bruteforce((1, 1), 3) == cb.count_P_formula(1, 3, 1) == 3
    assert cb.enumerate_P_bruteforce((1, 1), 2) == cb.count_P_formula(1, 2, 1) == 2
    assert cb.bound_P(3, 1) == pytest.approx(24 * math.e)
    assert cb.bound_P(6, 2) == pytest.approx(9216 * math.e ** 2)


def test_admissible_J_rejects_non_effective_I():
    with pytest.raises(ValueError):
        cb.enumerate_P_bruteforce((1, 2), 3)
    with pytest.raises(ValueError):
        cb.enumerate_P_bruteforce((1, 1, 1), 3)


def test_admissible_J_count_depends_only_on_support_size():
    for n in range(1, 6):
        for k in (1, 2):
            by_l = defaultdict(set)
            for I in cb.tuples(n, 2 * k):
                if cb.is_effective(I):
                    by_l[len(cb.support(I))].add(cb.enumerate_P_bruteforce(I, n))
            for l, counts in by_l.items():
                assert counts == {cb.count_P_formula(l, n, k)}


def test_bound_P_increasing_in_N():
    for k in (1, 2, 3):
        vals = [cb.bound_P(n, k) for n in range(1, 20)]
        assert vals == sorted(vals) and len(set(vals)) == len(vals)


def test_compositions():
    assert cb.compositions_count(5, 3) == 6 == len(list(cb.compositions(5, 3)))
    assert cb.compositions_count(7, 7) == 1
    assert cb.compositions_count(7, 1) == 1


def test_u_values():
    assert cb.u_exact(1, 1) == 4
    assert cb.u_exact(2, 1) == 256
    for k in range(1, 7):
        for l in range(1, k + 1):
            assert cb.u_exact(k, l) <= cb.u_bound(k)


def test_v_values():
    assert cb.v_count(2, 1) == 3 == cb.v_enumerate(2, 1)
    assert all(cb.v_count(1, k) == 1 for k in range(6))
    assert cb.v_count(3, 2) == 15 == cb.v_enumerate(3, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 8))
def test_multinomial_theorem(l, p):
    assert cb.multinomial_sum(l, p) == l ** p


def test_term_bounds():
    zero = cb.prop_term_bounds(1, 10, 0.0)
    assert zero.small_term == 0.0 and zero.big_term == 0.0
    x = 0.5 / (8 * math.e ** 2)
    tb = cb.prop_term_bounds(1, 10, x)
    assert tb.small_term == pytest.approx(0.5)
    assert tb.small_series == pytest.approx(2 * 0.25 / 0.5625)
    assert tb.small_regime and not cb.prop_term_bounds(4, 10, x).small_regime
    assert math.isinf(cb.prop_term_bounds(1, 10, 1.0).small_series)


def test_series_matches_partial_sums():
    x = 0.3 / (8 * math.e ** 2)
    tb = cb.prop_term_bounds(1, 100, x)
    partial = sum(cb.prop_term_bounds(k, 100, x).small_term for k in range(1, 200))
    assert partial == pytest.approx(tb.small_series, rel=1e-12)


def test_verification_grid_passes():
    rows = cb.verification_rows()
    assert rows and all(r.passed for r in rows)
    lemmas = {r.lemma for r in rows}
    assert lemmas == {"count_E", "count_P", "compositions", "v_count", "multinomial", "u_bound"}


def test_wrong_formula_is_caught():
    rows = cb.verification_rows(p_max=3, q_max=3, n_max=2, k_max=1,
                                e_formula=lambda q, p: cb.count_E_formula(q, p) + 1)
    assert not all(r.passed for r in rows if r.lemma == "count_E")
