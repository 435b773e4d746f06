"""Bounded interaction kernels and the mean-field convolution ``K * rho``.

Kernels act on displacements in the unit torus T^d (default) or in R^d.
On the torus every displacement is first reduced to the minimal image in
``[-1/2, 1/2)^d``.  ``K(0) = 0`` is enforced here, for every kernel, so that
the self-interaction term of any pair sum vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

TORUS = "torus"
FREE = "free"

KERNEL_KINDS = ("sine", "coulomb_trunc", "rough_sign", "zero")


def wrap_displacement(x: np.ndarray) -> np.ndarray:
    """Minimal-image reduction of a displacement to ``[-1/2, 1/2)``."""
    x = np.asarray(x, dtype=float)
    return x - np.floor(x + 0.5)


def wrap_position(x: np.ndarray) -> np.ndarray:
    """Reduce positions to the fundamental cell ``[0, 1)``."""
    x = np.asarray(x, dtype=float)
    w = x - np.floor(x)
    # x slightly below an integer can round up to exactly 1.0
    return np.where(w >= 1.0, 0.0, w)


@dataclass(frozen=True, eq=False)
class Kernel:
    """A bounded force ``x -> K(x)`` from R^d displacements to R^d.

    ``evaluator`` receives already-wrapped displacements with shape
    ``(..., dim)`` and returns forces of the same shape.  ``sup_norm`` is a
    certified bound on ``|K|`` (Euclidean norm).
    """

    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    is_odd: bool
    smoothness_tag: str = "smooth"
    domain: str = TORUS
    dim: int = 1
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.sup_norm < 0:
            raise ValueError("sup_norm must be nonnegative")
        if self.domain not in (TORUS, FREE):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.smoothness_tag not in ("smooth", "rough"):
            raise ValueError(f"unknown smoothness tag {self.smoothness_tag!r}")

    @property
    def separable(self) -> bool:
        """True when pair sums can be evaluated in O(N) through a Fourier split."""
        return self.kind in ("sine", "zero") and self.domain == TORUS

    def spec(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}

    def __call__(self, x) -> np.ndarray:
        return eval_kernel(self, x)


def _as_vectors(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    scalar_like = arr.ndim == 0 or (dim == 1 and arr.shape[-1:] != (1,))
    if scalar_like:
        arr = arr[..., None]
    if arr.shape[-1] != dim:
        raise ValueError(f"expected displacements with last axis {dim}, got {arr.shape}")
    return arr, scalar_like


def eval_kernel(kernel: Kernel, x) -> np.ndarray:
    """Evaluate ``K(x)``, returning the zero vector at ``x = 0``.

    For ``dim == 1`` a plain scalar or an array without a trailing length-1
    axis is accepted and the result has the same shape as the input.
    """
    arr, squeeze = _as_vectors(x, kernel.dim)
    if kernel.domain == TORUS:
        arr = wrap_displacement(arr)
    out = np.array(kernel.evaluator(arr), dtype=float)
    at_origin = np.all(arr == 0.0, axis=-1)
    out[at_origin] = 0.0
    if kernel.domain == TORUS and kernel.kind != "sine":
        # the half-period point is its own mirror image; zero keeps oddness
        out[np.any(arr == -0.5, axis=-1)] = 0.0
    return out[..., 0] if squeeze else out


def sine_kernel(kappa: float = 1.0, dim: int = 1) -> Kernel:
    """``K(x) = kappa * sin(2 pi x)`` componentwise."""

    def f(x):
        return kappa * np.sin(2.0 * np.pi * x)

    return Kernel("sine", f, abs(kappa) * np.sqrt(dim), True, "smooth", TORUS, dim,
                  {"kappa": kappa})


def coulomb_trunc_kernel(kappa: float = 1.0, delta: float = 1e-3, dim: int = 1,
                         domain: str = TORUS) -> Kernel:
    """Truncated Coulomb-like force ``kappa * x / max(|x|, delta)^d``."""
    if delta <= 0:
        raise ValueError("delta must be positive")

    def f(x):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return kappa * x / np.maximum(r, delta) ** dim

    return Kernel("coulomb_trunc", f, abs(kappa) / delta ** (dim - 1), True, "rough", domain,
                  dim, {"kappa": kappa, "delta": delta})


def rough_sign_kernel(kappa: float = 1.0, dim: int = 1, domain: str = TORUS) -> Kernel:
    """``kappa * sign(sin(1/|x|)) * x/|x|``: bounded, infinitely oscillating at 0."""

    def f(x):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, kappa * np.sign(np.sin(1.0 / safe)) * x / safe, 0.0)

    return Kernel("rough_sign", f, abs(kappa), True, "rough", domain, dim, {"kappa": kappa})


def zero_kernel(dim: int = 1, domain: str = TORUS) -> Kernel:
    return Kernel("zero", lambda x: np.zeros_like(x), 0.0, True, "smooth", domain, dim, {})


def scaled(kernel: Kernel, factor: float) -> Kernel:
    """Return ``factor * K`` with the sup norm rescaled accordingly."""
    params = dict(kernel.params)
    if "kappa" in params:
        params["kappa"] = params["kappa"] * factor
        return make_kernel({"kind": kernel.kind, **params}, dim=kernel.dim,
                           domain=kernel.domain)
    ev = kernel.evaluator
    return Kernel(kernel.kind, lambda x: factor * ev(x), abs(factor) * kernel.sup_norm,
                  kernel.is_odd, kernel.smoothness_tag, kernel.domain, kernel.dim, params)


def make_kernel(spec: Mapping, dim: int = 1, domain: str = TORUS) -> Kernel:
    """Build a kernel from a config mapping such as ``{"kind": "sine", "kappa": 1.0}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "sine":
        if domain != TORUS:
            raise ValueError("the sine kernel is only defined on the torus")
        return sine_kernel(float(spec.pop("kappa", 1.0)), dim=dim)
    if kind == "coulomb_trunc":
        return coulomb_trunc_kernel(float(spec.pop("kappa", 1.0)), float(spec.pop("delta", 1e-3)),
                                    dim=dim, domain=domain)
    if kind == "rough_sign":
        return rough_sign_kernel(float(spec.pop("kappa", 1.0)), dim=dim, domain=domain)
    if kind == "zero":
        return zero_kernel(dim=dim, domain=domain)
    raise ValueError(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")


def pair_sums(kernel: Kernel, positions: np.ndarray, method: str = "auto",
              chunk: int = 256) -> np.ndarray:
    """``S_i = sum_j K(x_i - x_j)`` for positions of shape ``(..., N, dim)``.

    ``method="direct"`` is the O(N^2) double loop, accumulated row by row in
    a fixed order.  ``"auto"`` switches to the exact Fourier split for the
    sine kernel, ``sin(a - b) = sin a cos b - cos a sin b``, which is O(N).
    """
    x = np.asarray(positions, dtype=float)
    if x.shape[-1] != kernel.dim:
        raise ValueError("positions must have a trailing axis of length kernel.dim")
    if kernel.kind == "zero":
        return np.zeros_like(x)
    if method == "auto" and kernel.separable:
        kappa = kernel.params["kappa"]
        s = np.sin(2.0 * np.pi * x)
        c = np.cos(2.0 * np.pi * x)
        S = s.sum(axis=-2, keepdims=True)
        C = c.sum(axis=-2, keepdims=True)
        return kappa * (s * C - c * S)
    if method not in ("auto", "direct"):
        raise ValueError(f"unknown method {method!r}")
    n = x.shape[-2]
    out = np.empty_like(x)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        disp = x[..., start:stop, None, :] - x[..., None, :, :]
        out[..., start:stop, :] = eval_kernel(kernel, disp).sum(axis=-2)
    return out


@dataclass
class DensityField:
    """A spatial density on a uniform periodic grid with cell-centred nodes."""

    values: np.ndarray
    cell_volume: float
    domain: str = TORUS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        if self.cell_volume <= 0:
            raise ValueError("cell_volume must be positive")

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.cell_volume

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def check_mass(self, tol: float = 1e-10) -> None:
        if abs(self.mass - 1.0) > tol:
            raise ValueError(f"density mass {self.mass!r} differs from 1 by more than {tol}")


def convolve(kernel: Kernel, rho: DensityField, check_mass: bool = True) -> np.ndarray:
    """``(K * rho)(x_g) = sum_c K(x_g - x_c) rho(x_c) dx`` at every grid node (d = 1)."""
    if kernel.domain != rho.domain:
        raise ValueError(f"kernel lives on {kernel.domain!r} but density on {rho.domain!r}")
    if kernel.dim != 1:
        raise ValueError("grid convolution is implemented for d = 1")
    if check_mass:
        rho.check_mass()
    g = rho.n_cells
    offsets = np.arange(g)
    # circulant structure: K(x_g - x_c) depends on (g - c) mod G only
    kvals = eval_kernel(kernel, offsets * rho.cell_volume)
    idx = (offsets[:, None] - offsets[None, :]) % g
    return (kvals[idx] * rho.values[None, :]).sum(axis=1) * rho.cell_volume
