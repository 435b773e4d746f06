"""N-particle second-order system with optional velocity noise.

    dX_i = V_i dt
    dV_i = (1/N) sum_{j != i} K(X_i - X_j) dt + sqrt(2 eps_N) dW_i

integrated with Euler-Maruyama.  Every particle owns its own noise stream,
derived from ``(seed, stream_key)``, so permuting particles together with
their stream keys permutes the trajectory and results do not depend on how
replicas are scheduled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .kernels import TORUS, Kernel, pair_sums, wrap_position

log = logging.getLogger(__name__)

_INIT_STREAM = 0
_NOISE_STREAM = 1


class StepSizeError(FloatingPointError):
    """The state became non-finite; the time step is too large."""


@dataclass(frozen=True)
class NoiseSchedule:
    """``eps_N`` as a function of N: zero, fixed, or ``epsilon0 * N**-gamma``."""

    kind: str = "zero"
    epsilon0: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "fixed", "vanishing"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.epsilon0 < 0 or self.gamma < 0:
            raise ValueError("epsilon0 and gamma must be nonnegative")

    def epsilon_for(self, n: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "fixed":
            return self.epsilon0
        return self.epsilon0 * float(n) ** (-self.gamma)

    @classmethod
    def from_spec(cls, spec: Mapping | None) -> "NoiseSchedule":
        if not spec:
            return cls()
        return cls(spec.get("kind", "zero"), float(spec.get("epsilon0", 0.0)),
                   float(spec.get("gamma", 0.0)))


class _NoiseStreams:
    """Per-particle Philox generators with a block buffer of draws.

    Drawing a block of ``block`` steps at once returns the same numbers as
    drawing one step at a time, so buffering does not change trajectories.
    """

    def __init__(self, seed: int, keys: np.ndarray, dim: int, block: int = 64):
        self.seed = seed
        self.dim = dim
        self.block = block
        self.gens = [np.random.Generator(np.random.Philox(
            np.random.SeedSequence(seed, spawn_key=(_NOISE_STREAM, int(k))))) for k in keys]
        self.buffer = np.empty((len(keys), 0, dim))
        self.cursor = 0

    def permuted(self, perm: np.ndarray) -> "_NoiseStreams":
        new = object.__new__(_NoiseStreams)
        new.seed, new.dim, new.block = self.seed, self.dim, self.block
        new.gens = [self.gens[i] for i in perm]
        new.buffer = self.buffer[perm]
        new.cursor = self.cursor
        return new

    def draw(self) -> np.ndarray:
        if self.cursor >= self.buffer.shape[1]:
            self.buffer = np.stack([g.standard_normal((self.block, self.dim)) for g in self.gens])
            self.cursor = 0
        out = self.buffer[:, self.cursor, :]
        self.cursor += 1
        return out


@dataclass
class ParticleEnsemble:
    """Positions and velocities of N particles, shape ``(N, dim)``.

    The ensemble is mutable: :func:`step` advances it in place.
    """

    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0
    seed: int = 0
    stream_keys: np.ndarray | None = None
    domain: str = TORUS
    steps_taken: int = 0
    _noise: _NoiseStreams | None = field(default=None, repr=False)

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float, ndmin=2)
        self.velocities = np.array(self.velocities, dtype=float, ndmin=2)
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have the same shape")
        if self.positions.shape[0] < 1:
            raise ValueError("an ensemble needs at least one particle")
        if self.stream_keys is None:
            self.stream_keys = np.arange(self.n)
        self.stream_keys = np.asarray(self.stream_keys, dtype=np.int64)
        if self.domain == TORUS:
            self.positions = wrap_position(self.positions)
        self.check_finite()

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise StepSizeError(f"non-finite particle state at t={self.time}")

    def noise(self) -> _NoiseStreams:
        if self._noise is None:
            self._noise = _NoiseStreams(self.seed, self.stream_keys, self.dim)
        return self._noise

    def copy(self) -> "ParticleEnsemble":
        """Independent copy that will draw the same noise as the original.

        Only valid before any noisy step has been taken.
        """
        if self._noise is not None:
            raise RuntimeError("cannot copy an ensemble whose noise streams are in use")
        return ParticleEnsemble(self.positions.copy(), self.velocities.copy(), self.time,
                                self.seed, self.stream_keys.copy(), self.domain, self.steps_taken)

    def permuted(self, perm: Sequence[int]) -> "ParticleEnsemble":
        """Relabel particles; noise streams travel with their particles."""
        perm = np.asarray(perm)
        out = ParticleEnsemble(self.positions[perm], self.velocities[perm], self.time, self.seed,
                               self.stream_keys[perm], self.domain, self.steps_taken)
        if self._noise is not None:
            out._noise = self._noise.permuted(perm)
        return out

    def momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.velocities ** 2))


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Atoms ``(x_i, v_i)`` each carrying weight ``1/N``."""

    positions: np.ndarray
    velocities: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        n = self.positions.shape[0]
        return np.full(n, 1.0 / n)

    def histogram(self, x_edges, v_edges) -> np.ndarray:
        """Mass of each ``(x, v)`` bin (d = 1)."""
        h, _, _ = np.histogram2d(self.positions[:, 0], self.velocities[:, 0],
                                 bins=[x_edges, v_edges], weights=self.weights)
        return h


def sample_initial(law, n: int, seed: int) -> ParticleEnsemble:
    """N i.i.d. draws from ``law``; bit-reproducible for a fixed seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not getattr(law, "has_sampler", False):
        raise ValueError(f"law {law!r} has no exact sampler")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(_INIT_STREAM,))))
    x, v = law.sample(n, rng)
    return ParticleEnsemble(x, v, 0.0, seed)


def interaction_drift(ens: ParticleEnsemble, kernel: Kernel, method: str = "auto") -> np.ndarray:
    """``(1/N) sum_{j != i} K(X_i - X_j)`` for every particle."""
    if kernel.dim != ens.dim:
        raise ValueError("kernel and ensemble dimensions differ")
    return pair_sums(kernel, ens.positions, method=method) / ens.n


def step(ens: ParticleEnsemble, kernel: Kernel, noise: NoiseSchedule, dt: float,
         method: str = "auto", scheme: str = "euler") -> ParticleEnsemble:
    """Advance ``ens`` by one step of size ``dt`` (in place) and return it.

    ``scheme="euler"`` is Euler-Maruyama with the drift evaluated at the old
    positions.  ``scheme="verlet"`` is velocity Verlet and is only allowed
    without noise.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    eps = noise.epsilon_for(ens.n)
    if scheme == "euler":
        drift = interaction_drift(ens, kernel, method)
        ens.positions = ens.positions + ens.velocities * dt
        ens.velocities = ens.velocities + drift * dt
    elif scheme == "verlet":
        if eps > 0:
            raise ValueError("the Verlet scheme is deterministic; use euler with noise")
        half = ens.velocities + 0.5 * dt * interaction_drift(ens, kernel, method)
        ens.positions = ens.positions + half * dt
        if ens.domain == TORUS:
            ens.positions = wrap_position(ens.positions)
        ens.velocities = half + 0.5 * dt * interaction_drift(ens, kernel, method)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if eps > 0:
        ens.velocities = ens.velocities + np.sqrt(2.0 * eps * dt) * ens.noise().draw()
    if ens.domain == TORUS:
        ens.positions = wrap_position(ens.positions)
    ens.time += dt
    ens.steps_taken += 1
    ens.check_finite()
    return ens


Observer = Callable[[ParticleEnsemble], "float | Mapping[str, float]"]

BUILTIN_OBSERVERS: dict[str, Observer] = {
    "momentum": lambda e: float(e.momentum().sum()),
    "kinetic_energy": lambda e: e.kinetic_energy(),
    "velocity_variance": lambda e: float(np.var(e.velocities, axis=0).sum()),
    "mean_velocity_sq": lambda e: float(np.mean(np.sum(e.velocities ** 2, axis=1))),
}


@dataclass(frozen=True)
class ObserverRecord:
    t: float
    name: str
    value: float
    replica_id: int
    seed: int


def simulate(ens: ParticleEnsemble, kernel: Kernel, noise: NoiseSchedule, dt: float,
             t_end: float, observers: Mapping[str, Observer] | Sequence[str] = (),
             observe_every: int = 1, replica_id: int = 0, method: str = "auto",
             scheme: str = "euler") -> list[ObserverRecord]:
    """Step ``ens`` until ``t_end``; observers run at t=0 and every ``observe_every`` steps.

    The final step is shortened so the run ends exactly at ``t_end``.
    Records are ordered by time, then by observer name.
    """
    if t_end < ens.time:
        raise ValueError("t_end precedes the ensemble time")
    if not isinstance(observers, Mapping):
        observers = {name: BUILTIN_OBSERVERS[name] for name in observers}
    names = sorted(observers)
    records: list[ObserverRecord] = []

    def observe():
        for name in names:
            value = observers[name](ens)
            if isinstance(value, Mapping):
                for sub in sorted(value):
                    records.append(ObserverRecord(ens.time, f"{name}[{sub}]", float(value[sub]),
                                                  replica_id, ens.seed))
            else:
                records.append(ObserverRecord(ens.time, name, float(value), replica_id, ens.seed))

    observe()
    n_steps = int(np.ceil((t_end - ens.time) / dt - 1e-9))
    t0 = ens.time
    for k in range(1, n_steps + 1):
        h = min(dt, t_end - ens.time) if k == n_steps else dt
        step(ens, kernel, noise, h, method=method, scheme=scheme)
        if k == n_steps:
            ens.time = t_end
        else:
            ens.time = t0 + k * dt
        if k % observe_every == 0 or k == n_steps:
            observe()
    return records


def empirical_measure(ens: ParticleEnsemble) -> EmpiricalMeasure:
    return EmpiricalMeasure(ens.positions.copy(), ens.velocities.copy())
