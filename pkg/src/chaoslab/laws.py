"""Analytic one-particle laws on T^1 x R with closed-form score and moments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .kernels import Kernel, eval_kernel


def gaussian_abs_moment(p: float) -> float:
    """``E|Z|^p`` for a standard normal ``Z``."""
    return 2.0 ** (p / 2.0) * special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


@dataclass(frozen=True)
class MaxwellianLaw:
    """``f(x, v) = rho(x) * N(0, sigma^2)(v)`` with ``rho = 1 + a cos(2 pi x)``.

    ``amplitude = 0`` is the spatially uniform Maxwellian, a stationary state
    of the Vlasov equation for every odd kernel.
    """

    sigma: float = 1.0
    amplitude: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= abs(self.amplitude) < 1.0:
            raise ValueError("perturbation amplitude must lie in (-1, 1)")
        if self.dim != 1:
            raise ValueError("reference laws are implemented on T^1 x R")

    has_sampler = True
    separable = True

    def spec(self) -> dict:
        return {"kind": "maxwellian", "sigma": self.sigma, "amplitude": self.amplitude}

    @property
    def v_extent(self) -> float:
        """Velocity cut-off beyond which the Gaussian tail is below 1e-14."""
        return 8.0 * self.sigma

    def rho(self, x):
        return 1.0 + self.amplitude * np.cos(2.0 * np.pi * np.asarray(x, dtype=float))

    def velocity_density(self, v):
        v = np.asarray(v, dtype=float)
        return np.exp(-0.5 * (v / self.sigma) ** 2) / (self.sigma * math.sqrt(2.0 * math.pi))

    def density(self, x, v):
        return self.rho(x) * self.velocity_density(v)

    def score(self, x, v):
        """``grad_v log f``; independent of ``x`` for this family."""
        v = np.asarray(v, dtype=float)
        return -v / self.sigma ** 2 + 0.0 * np.asarray(x, dtype=float)

    def log_grad_bound(self):
        """Constants ``(C, k)`` with ``|grad_(x,v) log f| <= C (1 + |x|^k + |v|^k)`` on the cell."""
        a = abs(self.amplitude)
        cx = 2.0 * math.pi * a / (1.0 - a)
        return max(cx, 1.0 / self.sigma ** 2), 1

    def conv_field(self, kernel: Kernel):
        """Return a callable ``x -> (K * rho)(x)``."""
        a = self.amplitude
        if kernel.kind == "zero":
            return lambda x: np.zeros_like(np.asarray(x, dtype=float))
        if kernel.kind == "sine":
            kappa = kernel.params["kappa"]
            return lambda x: 0.5 * kappa * a * np.sin(2.0 * np.pi * np.asarray(x, dtype=float))
        if a == 0.0 and kernel.is_odd:
            return lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return _tabulated_conv(kernel, self)

    def m_p(self, p: float) -> float:
        if p < 1:
            raise ValueError("p must be >= 1")
        return gaussian_abs_moment(p) ** (1.0 / p) / self.sigma

    def sup_mp_over_p(self) -> float:
        """Certified ``sup_p M_p / p``.

        ``||Z||_p <= sqrt(p)`` for a standard normal, so ``M_p/p <= 1/(sigma sqrt(p))``
        which is below ``M_1 = sqrt(2/pi)/sigma`` for every ``p >= 2``; the
        supremum is attained at ``p = 1``.
        """
        return math.sqrt(2.0 / math.pi) / self.sigma

    def sample(self, n: int, rng: np.random.Generator):
        """Exact i.i.d. draws; returns ``(positions, velocities)`` of shape ``(n, 1)``."""
        x = self.sample_positions(n, rng)
        v = self.sigma * rng.standard_normal(n)
        return x[:, None], v[:, None]

    def sample_positions(self, n: int, rng: np.random.Generator) -> np.ndarray:
        a = abs(self.amplitude)
        if a == 0.0:
            return rng.random(n)
        out = np.empty(n)
        filled = 0
        while filled < n:
            need = n - filled
            cand = rng.random(2 * need + 16)
            accept = rng.random(cand.size) * (1.0 + a) < self.rho(cand)
            got = cand[accept][:need]
            out[filled:filled + got.size] = got
            filled += got.size
        return out

    def x_mass(self, lo, hi):
        """``int_lo^hi rho(x) dx``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        a = self.amplitude
        return (hi - lo) + a / (2.0 * np.pi) * (np.sin(2.0 * np.pi * hi) - np.sin(2.0 * np.pi * lo))

    def v_mass(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return special.ndtr(hi / self.sigma) - special.ndtr(lo / self.sigma)

    def bin_probabilities(self, x_edges: np.ndarray, v_edges: np.ndarray) -> np.ndarray:
        """Probability of every ``(x, v)`` bin; edges may include ``+-inf`` in v."""
        px = self.x_mass(x_edges[:-1], x_edges[1:])
        pv = self.v_mass(v_edges[:-1], v_edges[1:])
        return np.outer(px, pv)

    def v_quantiles(self, probs) -> np.ndarray:
        return self.sigma * special.ndtri(np.asarray(probs, dtype=float))


@lru_cache(maxsize=32)
def _conv_table(kernel: Kernel, law: MaxwellianLaw, n: int = 4096):
    nodes = (np.arange(n) + 0.5) / n
    kvals = eval_kernel(kernel, nodes[:, None] - nodes[None, :])
    return nodes, (kvals * law.rho(nodes)[None, :]).mean(axis=1)


def _tabulated_conv(kernel: Kernel, law: MaxwellianLaw):
    nodes, table = _conv_table(kernel, law)

    def field(x):
        x = np.asarray(x, dtype=float)
        xp = np.concatenate([[nodes[-1] - 1.0], nodes, [nodes[0] + 1.0]])
        fp = np.concatenate([[table[-1]], table, [table[0]]])
        return np.interp(x - np.floor(x), xp, fp)

    return field


def make_law(spec: dict) -> MaxwellianLaw:
    spec = dict(spec)
    kind = spec.pop("kind", "maxwellian")
    if kind != "maxwellian":
        raise ValueError(f"unknown law kind {kind!r}")
    return MaxwellianLaw(sigma=float(spec.pop("sigma", 1.0)),
                         amplitude=float(spec.pop("amplitude", 0.0)))


def m_p_quadrature(law: MaxwellianLaw, p: float) -> float:
    """``(int |grad_v log f|^p f)^(1/p)`` by adaptive quadrature (law-agnostic)."""
    def inner(x):
        val, _ = integrate.quad(lambda v: abs(float(law.score(x, v))) ** p * float(law.density(x, v)),
                                -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
        return val

    if law.amplitude == 0.0:
        total = inner(0.5)
    else:
        total, _ = integrate.quad(inner, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12)
    return total ** (1.0 / p)
