"""Exact counts of the multi-index sets behind the expansion of R_N^{2k}.

Index tuples are 1-based sequences over the alphabet ``{1, ..., q}``.  A tuple
is *effective* when no symbol occurs exactly once.  Every exact count is a
Python ``int`` so nothing overflows; real-valued bounds are floats.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Sequence

ENUMERATION_LIMIT = 10 ** 8


class EnumerationTooLarge(ValueError):
    pass


def _guard(size: int) -> None:
    if size > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{size} candidates exceed the enumeration limit {ENUMERATION_LIMIT}")


def _check_tuple(I: Sequence[int], q: int) -> tuple[int, ...]:
    I = tuple(int(i) for i in I)
    if any(i < 1 or i > q for i in I):
        raise ValueError(f"entries of {I} must lie in 1..{q}")
    return I


def multiplicity(I: Sequence[int], q: int) -> tuple[int, ...]:
    """Signature ``(a_1, ..., a_q)`` with ``a_l = #{nu : i_nu = l}``."""
    I = _check_tuple(I, q)
    c = Counter(I)
    return tuple(c.get(l, 0) for l in range(1, q + 1))


def support(I: Sequence[int]) -> frozenset[int]:
    return frozenset(I)


def is_effective(I: Sequence[int]) -> bool:
    """True when no symbol occurs exactly once."""
    return all(m != 1 for m in Counter(I).values())


def in_P(J: Sequence[int], I: Sequence[int]) -> bool:
    """Every component of J outside S(I) occurs at least twice in J."""
    s = support(I)
    c = Counter(J)
    return all(c[j] >= 2 for j in c if j not in s)


# --- effective sets --------------------------------------------------------


def tuples(q: int, p: int) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(1, q + 1), repeat=p)


def count_E_bruteforce(q: int, p: int) -> int:
    if q < 1 or p < 0:
        raise ValueError("need q >= 1 and p >= 0")
    _guard(q ** p)
    return sum(1 for I in tuples(q, p) if is_effective(I))


def compositions(total: int, parts: int, minimum: int = 1) -> Iterator[tuple[int, ...]]:
    """All ``(b_1, ..., b_parts)`` with ``b_i >= minimum`` summing to ``total``, lexicographic."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(minimum, total - minimum * (parts - 1) + 1):
        for rest in compositions(total - first, parts - 1, minimum):
            yield (first,) + rest


def multinomial(counts: Sequence[int]) -> int:
    out = math.factorial(sum(counts))
    for a in counts:
        out //= math.factorial(a)
    return out


@lru_cache(maxsize=None)
def w_count(l: int, p: int) -> int:
    """Arrangements of p slots over l labelled symbols each used at least twice."""
    return sum(multinomial(a) for a in compositions(p, l, 2))


def count_E_formula(q: int, p: int) -> int:
    """``sum_{l=1}^{p//2} C(q, l) W^l_{q,p}``; the empty tuple counts once for p = 0."""
    if q < 0 or p < 0:
        raise ValueError("need q >= 0 and p >= 0")
    if p == 0:
        return 1
    return sum(math.comb(q, l) * w_count(l, p) for l in range(1, p // 2 + 1))


def bound_E_chain(q: int, p: int) -> tuple[float, float]:
    """Intermediate and final upper bounds on ``|E_{q,p}|``.

    ``m C(q, m) m^p`` with ``m = p // 2``, then
    ``(p/2) e^{p/2} q^{p/2} (p/2)^{p/2}``.  Both are proven for ``p <= q``
    but evaluate for any ``p, q >= 1``.
    """
    if p < 1 or q < 1:
        raise ValueError("need p >= 1 and q >= 1")
    m = p // 2
    middle = float(m * math.comb(q, m) * m ** p)
    h = p / 2.0
    return middle, h * math.exp(h) * q ** h * h ** h


def bound_E(q: int, p: int) -> float:
    return bound_E_chain(q, p)[1]


# --- admissible J for a fixed effective I ------------------------------------


def _effective_I(I: Sequence[int], n: int) -> tuple[int, ...]:
    I = _check_tuple(I, n)
    if len(I) % 2:
        raise ValueError("I must have even length 2k")
    if not is_effective(I):
        raise ValueError(f"{I} is not effective: some index occurs exactly once")
    return I


def enumerate_P_bruteforce(I: Sequence[int], n: int) -> int:
    """``|P^I_{N,2k}|`` by testing every J in ``{1..N}^{2k}``."""
    I = _effective_I(I, n)
    _guard(n ** len(I))
    return sum(1 for J in tuples(n, len(I)) if in_P(J, I))


def count_P_formula(l: int, n: int, k: int) -> int:
    """``l^{2k} + sum_{h=2}^{2k} l^{2k-h} C(2k, h) |E_{N-l,h}|``."""
    if not (1 <= l <= n and k >= 1):
        raise ValueError("need 1 <= l <= N and k >= 1")
    p = 2 * k
    return l ** p + sum(l ** (p - h) * math.comb(p, h) * count_E_formula(n - l, h)
                        for h in range(2, p + 1))


def bound_P(n: int, k: int) -> float:
    """``2k e^k 4^k k^k N^k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 2 * k * math.e ** k * 4.0 ** k * float(k) ** k * float(n) ** k


# --- compositions, U and V ---------------------------------------------------


def compositions_count(q: int, p: int) -> int:
    if not q >= p >= 1:
        raise ValueError("need q >= p >= 1")
    return math.comb(q - 1, p - 1)


def signatures(l: int, p: int) -> Iterator[tuple[int, ...]]:
    """Nonnegative ``(a_1, ..., a_l)`` with sum p."""
    return compositions(p, l, 0)


def multinomial_sum(l: int, p: int) -> int:
    """Sum of ``p! / prod a_i!`` over all signatures; equals ``l^p``."""
    return sum(multinomial(a) for a in signatures(l, p))


def u_exact(k: int, l: int) -> int:
    """``sum_{a_i >= 2, sum = 2k} (2k)!/prod a_i! * prod a_i^{a_i}`` over l parts."""
    if not 1 <= l <= k:
        raise ValueError("need 1 <= l <= k")
    total = 0
    for a in compositions(2 * k, l, 2):
        term = multinomial(a)
        for ai in a:
            term *= ai ** ai
        total += term
    return total


def u_bound(k: int) -> float:
    """``(2e)^{2k} (2k)! / sqrt(k)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (2.0 * math.e) ** (2 * k) * math.factorial(2 * k) / math.sqrt(k)


def v_count(n: int, k: int) -> int:
    """Nonnegative solutions of ``a_1 + ... + a_N = 2k``."""
    if n < 1 or k < 0:
        raise ValueError("need N >= 1 and k >= 0")
    return math.comb(2 * k + n - 1, n - 1)


def v_enumerate(n: int, k: int) -> int:
    _guard(math.comb(2 * k + n - 1, n - 1))
    return sum(1 for _ in signatures(n, 2 * k))


# --- term bounds of the exponential series ------------------------------------


@dataclass(frozen=True)
class TermBounds:
    small_term: float
    big_term: float
    small_series: float
    big_series: float
    small_regime: bool

    @property
    def applicable_term(self) -> float:
        return self.small_term if self.small_regime else self.big_term


def prop_term_bounds(k: int, n: int, x: float) -> TermBounds:
    """Per-k bounds ``2k (8 e^2 x)^{2k}`` (3k <= N) and ``(5 e^2 x)^{2k}`` (3k > N).

    The series fields sum the bounds over k >= 1 in closed form,
    ``2 r/(1-r)^2`` with ``r = (8 e^2 x)^2`` and ``s/(1-s)`` with
    ``s = (5 e^2 x)^2``; they are ``inf`` outside the convergent regime.
    """
    if x < 0 or k < 1:
        raise ValueError("need x >= 0 and k >= 1")
    e2 = math.e ** 2
    small = 2 * k * (8 * e2 * x) ** (2 * k)
    big = (5 * e2 * x) ** (2 * k)
    r = (8 * e2 * x) ** 2
    s = (5 * e2 * x) ** 2
    small_series = 2 * r / (1 - r) ** 2 if r < 1 else math.inf
    big_series = s / (1 - s) if s < 1 else math.inf
    return TermBounds(small, big, small_series, big_series, 3 * k <= n)


# --- verification grid --------------------------------------------------------


@dataclass(frozen=True)
class CheckRow:
    lemma: str
    parameters: str
    exact: int
    formula: int
    bound: float | None
    passed: bool


def verification_rows(p_max: int = 6, q_max: int = 7, n_max: int = 6, k_max: int = 2,
                      comp_q_max: int = 12, comp_p_max: int = 6, u_k_max: int = 6,
                      multinomial_l_max: int = 5, multinomial_p_max: int = 8,
                      v_n_max: int = 4, v_k_max: int = 3,
                      e_formula: Callable[[int, int], int] = count_E_formula,
                      p_formula: Callable[[int, int, int], int] = count_P_formula) -> list[CheckRow]:
    """Brute force against formula (and bound) over the desk-scale grid.

    The formula callables are parameters so a deliberately wrong formula can
    be injected to check that failures surface.
    """
    rows: list[CheckRow] = []
    for p in range(1, p_max + 1):
        for q in range(p, q_max + 1):
            exact = count_E_bruteforce(q, p)
            formula = e_formula(q, p)
            bound = bound_E(q, p)
            rows.append(CheckRow("count_E", f"q={q};p={p}", exact, formula, bound,
                                 exact == formula and exact <= bound))
    for k in range(1, k_max + 1):
        for n in range(1, n_max + 1):
            for I in tuples(n, 2 * k):
                if not is_effective(I):
                    continue
                exact = enumerate_P_bruteforce(I, n)
                formula = p_formula(len(support(I)), n, k)
                bound = bound_P(n, k) if 3 * k <= n else None
                ok = exact == formula and (bound is None or exact <= bound)
                rows.append(CheckRow("count_P", f"I={'-'.join(map(str, I))};N={n};k={k}",
                                     exact, formula, bound, ok))
    for q in range(1, comp_q_max + 1):
        for p in range(1, min(q, comp_p_max) + 1):
            exact = sum(1 for _ in compositions(q, p))
            formula = compositions_count(q, p)
            rows.append(CheckRow("compositions", f"q={q};p={p}", exact, formula, None,
                                 exact == formula))
    for n in range(1, v_n_max + 1):
        for k in range(0, v_k_max + 1):
            exact = v_enumerate(n, k)
            formula = v_count(n, k)
            rows.append(CheckRow("v_count", f"N={n};k={k}", exact, formula, None, exact == formula))
    for l in range(1, multinomial_l_max + 1):
        for p in range(0, multinomial_p_max + 1):
            exact = multinomial_sum(l, p)
            rows.append(CheckRow("multinomial", f"l={l};p={p}", exact, l ** p, None, exact == l ** p))
    for k in range(1, u_k_max + 1):
        for l in range(1, k + 1):
            exact = u_exact(k, l)
            bound = u_bound(k)
            rows.append(CheckRow("u_bound", f"k={k};l={l}", exact, exact, bound, exact <= bound))
    return rows

