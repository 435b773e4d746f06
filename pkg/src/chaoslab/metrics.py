"""The entropy-dissipation functional R_N, moment diagnostics, exponential
moments of R_N, closed-form bounds and marginal distances."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import Kernel, eval_kernel, pair_sums
from .particles import ParticleEnsemble

log = logging.getLogger(__name__)

E2 = math.e ** 2
THRESHOLD = 1.0 / (16.0 * E2)


def _xv(ens_or_xv):
    if isinstance(ens_or_xv, ParticleEnsemble):
        return ens_or_xv.positions[:, 0], ens_or_xv.velocities[:, 0]
    x, v = ens_or_xv
    return np.asarray(x, dtype=float).reshape(-1), np.asarray(v, dtype=float).reshape(-1)


def r_n(ens, law, kernel: Kernel) -> float:
    """Exact double sum
    ``R_N = (1/N) sum_{i,j} grad_v log f(z_i) . {K(x_i - x_j) - (K*rho)(x_i)}``
    with ``K(0) = 0``.  ``ens`` is an ensemble or a pair ``(x, v)`` (d = 1).
    """
    x, v = _xv(ens)
    n = x.size
    score = law.score(x, v)
    kmat = eval_kernel(kernel, x[:, None] - x[None, :])
    conv = law.conv_field(kernel)(x)
    return float(np.sum(score[:, None] * (kmat - conv[:, None])) / n)


def r_n_batch(x: np.ndarray, v: np.ndarray, law, kernel: Kernel, method: str = "auto") -> np.ndarray:
    """``R_N`` for a batch of configurations, arrays of shape ``(S, N)``.

    Uses the O(N) Fourier split for the sine kernel unless ``method="direct"``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = x.shape[-1]
    sums = pair_sums(kernel, x[..., None], method=method)[..., 0]
    conv = law.conv_field(kernel)(x)
    return np.sum(law.score(x, v) * (sums - n * conv), axis=-1) / n


def trivial_bound(ens, law, kernel: Kernel) -> float:
    """``2 |K|_inf sum_i |grad_v log f(z_i)|``."""
    x, v = _xv(ens)
    return 2.0 * kernel.sup_norm * float(np.sum(np.abs(law.score(x, v))))


def m_p(law, p: float) -> float:
    """``M_p = (int |grad_v log f|^p f)^(1/p)``; closed form when the law has one."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if hasattr(law, "m_p"):
        return law.m_p(p)
    from .laws import m_p_quadrature
    return m_p_quadrature(law, p)


def sup_ratio(law, p_max: int = 64) -> float:
    """``max_{1 <= p <= p_max} M_p / p``."""
    return max(m_p(law, p) / p for p in range(1, p_max + 1))


def choose_nu(k_norm: float, sup_ratio_value: float) -> float:
    """``nu`` with ``nu * |K| * sup_p M_p/p = 1/(16 e^2)``."""
    if k_norm <= 0 or sup_ratio_value <= 0:
        raise ValueError("k_norm and sup_ratio must be positive")
    return THRESHOLD / (k_norm * sup_ratio_value)


def theorem_bound(a: float) -> float:
    """``5 + 6 (a / (1 - a^2))^2`` for ``a = 8 e^2 |K| sup_p M_p/p`` in [0, 1)."""
    if not 0.0 <= a < 1.0:
        raise ValueError(f"a = {a!r} is outside theorem regime [0, 1)")
    return 5.0 + 6.0 * (a / (1.0 - a * a)) ** 2


def regime_parameter(k_norm: float, sup_ratio_value: float, nu: float = 1.0) -> float:
    return 8.0 * E2 * nu * k_norm * sup_ratio_value


def hn_gronwall_envelope(h0: float, alpha_n: float, L: float, nu: float, t: float, n: int,
                         horizon: float | None = None) -> float:
    """``(H_N(0) + alpha_N + L T / (nu N)) exp(t / nu)`` with ``T = horizon`` (default ``t``)."""
    T = t if horizon is None else horizon
    if min(h0, alpha_n, L, t, T) < 0 or nu <= 0 or n < 1:
        raise ValueError("inputs must be nonnegative, nu > 0 and n >= 1")
    return (h0 + alpha_n + L * T / (nu * n)) * math.exp(t / nu)


def _sampler(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_product(law, n: int, samples: int, rng: np.random.Generator):
    """``samples`` i.i.d. configurations from the tensor product law, shape ``(samples, n)``."""
    x, v = law.sample(samples * n, rng)
    return x.reshape(samples, n), v.reshape(samples, n)


def _batch_sizes(samples: int, n: int, budget: int = 1 << 18):
    size = max(1, budget // max(n, 1))
    done = 0
    while done < samples:
        b = min(size, samples - done)
        yield b
        done += b


@dataclass(frozen=True)
class ExpMomentEstimate:
    estimate: float
    stderr: float
    log_estimate: float
    max_share: float
    samples: int

    @property
    def unreliable(self) -> bool:
        """One sample carrying over 5% of the total weight signals heavy-tail dominance."""
        return self.max_share > 0.05


def mc_exp_moment(law, kernel: Kernel, nu: float, n: int, samples: int, seed: int,
                  method: str = "auto") -> ExpMomentEstimate:
    """Monte-Carlo estimate of ``int fbar_N exp(nu |R_N|)`` with a running log-sum-exp."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    rng = _sampler(seed)
    top = -math.inf
    s1 = 0.0
    s2 = 0.0
    for b in _batch_sizes(samples, n):
        x, v = sample_product(law, n, b, rng)
        vals = nu * np.abs(r_n_batch(x, v, law, kernel, method))
        m = float(vals.max())
        if m > top:
            s1 *= math.exp(top - m) if top > -math.inf else 0.0
            s2 *= math.exp(2.0 * (top - m)) if top > -math.inf else 0.0
            top = m
        w = np.exp(vals - top)
        s1 += float(w.sum())
        s2 += float((w * w).sum())
    mean_w = s1 / samples
    var_w = max(s2 / samples - mean_w ** 2, 0.0) * samples / max(samples - 1, 1)
    log_est = top + math.log(mean_w)
    scale = math.exp(top) if top < 709 else math.inf
    return ExpMomentEstimate(math.exp(log_est) if log_est < 709 else math.inf,
                             scale * math.sqrt(var_w / samples), log_est, 1.0 / s1, samples)


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    stderr: float
    samples: int


def mc_rn_moments(law, kernel: Kernel, n: int, samples: int, seed: int, powers=(1, 2),
                  method: str = "auto") -> dict[int, MomentEstimate]:
    """Sample means and standard errors of ``R_N^p`` under the product law."""
    rng = _sampler(seed)
    chunks = []
    for b in _batch_sizes(samples, n):
        x, v = sample_product(law, n, b, rng)
        chunks.append(r_n_batch(x, v, law, kernel, method))
    r = np.concatenate(chunks)
    out = {}
    for p in powers:
        vals = r ** p
        out[p] = MomentEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)),
                                samples)
    return out


# --- marginals ------------------------------------------------------------


@dataclass(frozen=True)
class Binning:
    """Per-coordinate bin edges; the outermost v edges are infinite."""

    x_edges: np.ndarray
    v_edges: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.x_edges) - 1, len(self.v_edges) - 1

    def describe(self) -> str:
        return f"bx={self.shape[0]};bv={self.shape[1]}"

    @classmethod
    def equiprobable(cls, reference, bx: int, bv: int) -> "Binning":
        """Uniform x bins and v bins with equal mass under the reference v-marginal."""
        x_edges = np.linspace(0.0, 1.0, bx + 1)
        inner = reference.v_quantiles(np.arange(1, bv) / bv)
        v_edges = np.concatenate([[-np.inf], inner, [np.inf]])
        return cls(x_edges, v_edges)


@dataclass
class MarginalHistogram:
    """Normalised bin masses of the order-k marginal, shape ``(bx, bv) * k``."""

    probs: np.ndarray
    binning: Binning
    k: int
    samples: int
    replicas: int
    block_size: int

    def __post_init__(self):
        if np.any(self.probs < 0):
            raise ValueError("negative bin mass")


@dataclass(frozen=True)
class MarginalDistance:
    histogram: MarginalHistogram
    l1_distance: float
    kl_estimate: float
    kl_plugin: float
    l1_stderr: float
    min_expected_count: float


def tensor_probabilities(p1: np.ndarray, k: int) -> np.ndarray:
    out = p1
    for _ in range(k - 1):
        out = np.multiply.outer(out, p1)
    # axes: (x1, v1, x2, v2, ...)
    return out


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges[1:-1], values, side="right")
    return idx


def _pooled_blocks(replicas: Sequence[ParticleEnsemble], k: int):
    blocks = []
    for ens in replicas:
        nb = ens.n // k
        if nb == 0:
            raise ValueError("marginal order k exceeds the particle count")
        x = ens.positions[: nb * k, 0].reshape(nb, k)
        v = ens.velocities[: nb * k, 0].reshape(nb, k)
        blocks.append((x, v))
    return blocks


def _histogram(blocks, binning: Binning, k: int) -> tuple[np.ndarray, int]:
    bx, bv = binning.shape
    shape = (bx, bv) * k
    counts = np.zeros(int(np.prod(shape)))
    total = 0
    for x, v in blocks:
        coords = []
        for c in range(k):
            coords.append(_bin_index(x[:, c], binning.x_edges))
            coords.append(_bin_index(v[:, c], binning.v_edges))
        flat = np.ravel_multi_index(tuple(coords), shape)
        counts += np.bincount(flat, minlength=counts.size)
        total += x.shape[0]
    return counts.reshape(shape), total


def _distances(counts: np.ndarray, total: int, ref: np.ndarray):
    p = counts / total
    l1 = float(np.abs(p - ref).sum())
    occ = p > 0
    if np.any(ref[occ] <= 0):
        kl = math.inf
    else:
        kl = float(np.sum(p[occ] * np.log(p[occ] / ref[occ])))
    return p, l1, kl, int(occ.sum())


def marginal_and_distance(replicas: Sequence[ParticleEnsemble], reference, k: int = 1,
                          binning: Binning | None = None, bins: tuple[int, int] = (8, 8),
                          min_count: float = 20.0) -> MarginalDistance:
    """Histogram of the order-k marginal pooled over disjoint particle blocks.

    The reference supplies ``bin_probabilities(x_edges, v_edges)`` for its
    one-particle law; the order-k reference is its tensor power.  Returns the
    L1 distance, the Miller-Madow corrected plug-in KL divergence and a
    jackknife (leave-one-replica-out) standard error of the L1 distance.
    Undersampled binnings are coarsened with a warning.
    """
    if not replicas:
        raise ValueError("need at least one replica")
    n = replicas[0].n
    if any(r.n != n for r in replicas):
        raise ValueError("replicas must share the particle count")
    if k > n:
        raise ValueError("k must not exceed N")
    blocks = _pooled_blocks(replicas, k)
    total = sum(b[0].shape[0] for b in blocks)
    bx, bv = bins if binning is None else binning.shape
    while True:
        if binning is None:
            binning_try = Binning.equiprobable(reference, bx, bv)
        else:
            binning_try = binning
        p1 = reference.bin_probabilities(binning_try.x_edges, binning_try.v_edges)
        ref = tensor_probabilities(p1, k)
        min_expected = float(ref[ref > 0].min() * total)
        if min_expected >= min_count or (bx == 1 and bv == 1):
            break
        log.warning("undersampled bins (min expected count %.1f < %.0f) with bx=%d, bv=%d; widening",
                    min_expected, min_count, bx, bv)
        binning = None
        if bv >= bx and bv > 1:
            bv -= 1
        else:
            bx -= 1
    binning = binning_try
    counts, total = _histogram(blocks, binning, k)
    p, l1, kl, occupied = _distances(counts, total, ref)
    kl_mm = kl - (occupied - 1) / (2.0 * total)
    # jackknife over replicas
    r = len(blocks)
    if r > 1:
        loo = []
        for i in range(r):
            ci, ti = _histogram(blocks[i:i + 1], binning, k)
            loo.append(_distances(counts - ci, total - ti, ref)[1])
        loo = np.array(loo)
        l1_se = float(math.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2)))
    else:
        l1_se = math.nan
    hist = MarginalHistogram(p, binning, k, total, r, k)
    return MarginalDistance(hist, l1, kl_mm, kl, l1_se, min_expected)


def finest_binning(reference, samples: int, k: int = 1, min_count: float = 20.0,
                   max_bins: int = 64) -> Binning:
    """Largest square binning ``b x b`` whose order-k expected counts all reach ``min_count``."""
    for b in range(max_bins, 0, -1):
        binning = Binning.equiprobable(reference, b, b)
        p1 = reference.bin_probabilities(binning.x_edges, binning.v_edges)
        if tensor_probabilities(p1, k).min() * samples >= min_count:
            return binning
    return Binning.equiprobable(reference, 1, 1)
