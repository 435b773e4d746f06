"""Strang-split semi-Lagrangian solver for the 1x-1v Vlasov / McKean-Vlasov equation

    f_t + v f_x + (K * rho) f_v - eps f_vv = 0

on T^1 x [-v_max, v_max], plus entropy and exponential-moment diagnostics.

Grids are cell centred: ``x_i = (i + 1/2) dx`` and
``v_j = -v_max + (j + 1/2) dv``; integrals use the midpoint rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, special
from scipy.special import logsumexp

from .kernels import TORUS, DensityField, Kernel, convolve

log = logging.getLogger(__name__)

FLOOR = 1e-300
LOG_FLOOR = -690.0


class SolverGuardError(RuntimeError):
    """A solver guard tripped: CFL, clamped mass or velocity-tail mass."""


class AbsoluteContinuityError(ValueError):
    """``f_tilde`` carries mass where the reference density vanishes."""


@dataclass
class PhaseDensity:
    values: np.ndarray
    v_max: float
    time: float = 0.0
    audit: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a (G_x, G_v) array")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")

    @property
    def gx(self) -> int:
        return self.values.shape[0]

    @property
    def gv(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return 1.0 / self.gx

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.gv

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.gx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return -self.v_max + (np.arange(self.gv) + 0.5) * self.dv

    @property
    def cell_area(self) -> float:
        return self.dx * self.dv

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def tail_mass(self, rows: int = 2) -> float:
        return float((self.values[:, :rows].sum() + self.values[:, -rows:].sum()) * self.cell_area)

    def check(self, mass_tol: float = 1e-10, tail_tol: float = 1e-6) -> None:
        if np.any(self.values < 0):
            raise ValueError("phase density has negative values")
        if abs(self.mass - 1.0) > mass_tol:
            raise ValueError(f"phase density mass {self.mass!r} is not 1")
        if self.tail_mass() >= tail_tol:
            raise SolverGuardError(f"velocity tail mass {self.tail_mass():.3e} >= {tail_tol}: "
                                   "v_max too small")

    def copy(self) -> "PhaseDensity":
        return PhaseDensity(self.values.copy(), self.v_max, self.time, list(self.audit))

    def v_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.dx

    def v_quantiles(self, probs) -> np.ndarray:
        """Quantiles of the v-marginal with a piecewise-linear cumulative mass."""
        vb = -self.v_max + np.arange(self.gv + 1) * self.dv
        cdf = np.concatenate([[0.0], np.cumsum(self.v_marginal() * self.dv)])
        return np.interp(np.asarray(probs, dtype=float), cdf / cdf[-1], vb)

    @classmethod
    def from_function(cls, fn, gx: int, gv: int, v_max: float, normalize: bool = True):
        """Sample ``fn(x, v)`` at the cell centres and normalise the grid mass to 1."""
        tmp = cls(np.zeros((gx, gv)), v_max)
        vals = np.asarray(fn(tmp.x[:, None], tmp.v[None, :]), dtype=float)
        vals = np.broadcast_to(vals, (gx, gv)).copy()
        if normalize:
            vals /= vals.sum() * tmp.cell_area
        return cls(vals, v_max)

    @classmethod
    def from_law(cls, law, gx: int, gv: int, v_max: float | None = None):
        if v_max is None:
            v_max = 6.0 * law.sigma
        return cls.from_function(law.density, gx, gv, v_max)

    def bin_probabilities(self, x_edges: np.ndarray, v_edges: np.ndarray) -> np.ndarray:
        """Mass in each ``(x, v)`` bin, assuming f is constant on every cell.

        x edges must lie in [0, 1]; v edges may be infinite.
        """
        xb = np.arange(self.gx + 1) * self.dx
        vb = -self.v_max + np.arange(self.gv + 1) * self.dv
        cdf = np.zeros((self.gx + 1, self.gv + 1))
        cdf[1:, 1:] = np.cumsum(np.cumsum(self.values * self.cell_area, axis=0), axis=1)
        xe = np.clip(np.asarray(x_edges, dtype=float), 0.0, 1.0)
        ve = np.clip(np.asarray(v_edges, dtype=float), -self.v_max, self.v_max)
        # piecewise-linear interpolation of the cumulative mass in each direction
        cx = np.stack([np.interp(xe, xb, cdf[:, j]) for j in range(self.gv + 1)], axis=1)
        c = np.stack([np.interp(ve, vb, cx[i]) for i in range(len(xe))], axis=0)
        return c[1:, 1:] - c[:-1, 1:] - c[1:, :-1] + c[:-1, :-1]


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    epsilon: float = 0.0
    order: int = 3
    check_cfl: bool = True
    clamp_tol: float = 1e-8
    tail_tol: float = 1e-6

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.order not in (1, 3):
            raise ValueError("interpolation order must be 1 or 3")

    def guard(self, f: PhaseDensity, kernel: Kernel) -> None:
        if not self.check_cfl:
            return
        if self.dt * f.v_max > f.dx * (1 + 1e-12):
            raise SolverGuardError(f"CFL guard: dt*v_max = {self.dt * f.v_max:.4g} > dx = {f.dx:.4g}")
        if self.dt * kernel.sup_norm > f.dv * (1 + 1e-12):
            raise SolverGuardError(f"CFL guard: dt*|K| = {self.dt * kernel.sup_norm:.4g} > dv = {f.dv:.4g}")


def max_stable_dt(gx: int, gv: int, v_max: float, k_sup: float) -> float:
    dx = 1.0 / gx
    dv = 2.0 * v_max / gv
    return min(dx / v_max, dv / k_sup if k_sup > 0 else math.inf)


def _weights(theta: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange weights for stencil offsets relative to ``floor`` of the foot point."""
    if order == 1:
        return np.array([0, 1]), np.stack([1.0 - theta, theta])
    t = theta
    w = np.stack([
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ])
    return np.array([-1, 0, 1, 2]), w


def _shift_weights(s: np.ndarray, order: int) -> tuple[range, np.ndarray]:
    """Interpolation weights grouped by integer shift.

    Returns ``shifts`` and ``W`` with ``W[m, c]`` the weight of the sample
    ``shifts[m]`` cells away for line ``c`` whose foot point is ``-s[c]`` cells off.
    """
    base = np.floor(-s).astype(np.int64)
    offsets, w = _weights(-s - base, order)
    lo = int(base.min() + offsets[0])
    hi = int(base.max() + offsets[-1])
    W = np.zeros((hi - lo + 1, s.size))
    cols = np.arange(s.size)
    for k, off in enumerate(offsets):
        np.add.at(W, (base + off - lo, cols), w[k])
    return range(lo, hi + 1), W


def advect_x(values: np.ndarray, v: np.ndarray, tau: float, dx: float, order: int = 3) -> np.ndarray:
    """Periodic shift of every velocity row: ``f(x, v) <- f(x - v tau, v)``."""
    shifts, W = _shift_weights(v * tau / dx, order)
    out = np.zeros_like(values)
    for m, sh in enumerate(shifts):
        if np.any(W[m]):
            out += W[m][None, :] * np.roll(values, -sh, axis=0)
    return out


def advect_v(values: np.ndarray, accel: np.ndarray, tau: float, dv: float, order: int = 3) -> np.ndarray:
    """Shift along v at every x: ``f(x, v) <- f(x, v - a(x) tau)``; zero inflow."""
    gv = values.shape[1]
    shifts, W = _shift_weights(accel * tau / dv, order)
    pad = max(abs(shifts[0]), abs(shifts[-1]))
    padded = np.pad(values, ((0, 0), (pad, pad)))
    out = np.zeros_like(values)
    for m, sh in enumerate(shifts):
        if np.any(W[m]):
            out += W[m][:, None] * padded[:, pad + sh:pad + sh + gv]
    return out


def heat_kernel(variance_cells: float, tol: float = 1e-16) -> np.ndarray:
    """Discrete heat kernel ``e^{-t} I_n(t)`` on the integer lattice, variance ``t``.

    This is the exact solution operator of the semi-discrete heat equation, so
    its variance equals ``t`` exactly and it sums to one.
    """
    t = variance_cells
    half = int(math.ceil(8.0 * math.sqrt(t) + 10))
    n = np.arange(-half, half + 1)
    w = special.ive(np.abs(n), t)
    w[w < tol] = 0.0
    return w / w.sum()


def diffuse_v(values: np.ndarray, epsilon: float, tau: float, dv: float) -> np.ndarray:
    if epsilon <= 0:
        return values
    w = heat_kernel(2.0 * epsilon * tau / dv ** 2)
    return ndimage.convolve1d(values, w, axis=1, mode="constant", cval=0.0)


def density(f: PhaseDensity) -> DensityField:
    """``rho(x) = int f dv`` by the midpoint rule in v."""
    return DensityField(f.values.sum(axis=1) * f.dv, f.dx, TORUS)


def _clamp(values: np.ndarray, area: float, tol: float, where: str) -> tuple[np.ndarray, float]:
    neg = values < 0
    if not neg.any():
        return values, 0.0
    clamped = float(-values[neg].sum() * area)
    if clamped >= tol:
        raise SolverGuardError(f"clamped mass {clamped:.3e} during {where} exceeds {tol}")
    return np.where(neg, 0.0, values), clamped


def step_vlasov(f: PhaseDensity, kernel: Kernel, cfg: SolverConfig) -> PhaseDensity:
    """One Strang step: x/2, field, v, x/2, then exact v-diffusion; returns a new density."""
    cfg.guard(f, kernel)
    dt = cfg.dt
    vals = advect_x(f.values, f.v, 0.5 * dt, f.dx, cfg.order)
    rho = DensityField(np.maximum(vals.sum(axis=1) * f.dv, 0.0), f.dx, TORUS)
    field_ = convolve(kernel, rho, check_mass=False)
    vals = advect_v(vals, field_, dt, f.dv, cfg.order)
    vals = advect_x(vals, f.v, 0.5 * dt, f.dx, cfg.order)
    vals = diffuse_v(vals, cfg.epsilon, dt, f.dv)
    vals, clamped = _clamp(vals, f.cell_area, cfg.clamp_tol, "advection")
    mass = float(vals.sum() * f.cell_area)
    out = PhaseDensity(vals / mass, f.v_max, f.time + dt, list(f.audit))
    out.audit.append({"t": out.time, "mass_before": mass, "mass_drift": mass - 1.0,
                      "clamped": clamped})
    tail = out.tail_mass()
    if tail >= cfg.tail_tol:
        raise SolverGuardError(f"velocity tail mass {tail:.3e} >= {cfg.tail_tol} at t={out.time:.4g}")
    return out


def evolve(f: PhaseDensity, kernel: Kernel, cfg: SolverConfig, t_end: float,
           callback=None) -> PhaseDensity:
    """Repeated :func:`step_vlasov` until ``t_end`` (last step shortened)."""
    n_steps = int(math.ceil((t_end - f.time) / cfg.dt - 1e-9))
    t0 = f.time
    for k in range(1, n_steps + 1):
        dt = cfg.dt if k < n_steps else (t_end - t0) - (n_steps - 1) * cfg.dt
        step_cfg = cfg if dt == cfg.dt else SolverConfig(dt, cfg.epsilon, cfg.order, cfg.check_cfl,
                                                         cfg.clamp_tol, cfg.tail_tol)
        f = step_vlasov(f, kernel, step_cfg)
        f.time = t0 + k * cfg.dt if k < n_steps else t_end
        if callback is not None:
            callback(f)
    return f


def relative_entropy_grid(f_tilde: PhaseDensity, f: PhaseDensity, tol: float = 1e-12) -> float:
    """``H(f_tilde | f) = int f_tilde log(f_tilde / f)`` by the midpoint rule.

    ``f`` is floored at 1e-300 (log at -690) wherever ``f_tilde`` is positive;
    the number of floored cells is logged.
    """
    ft = f_tilde.values
    fr = f.values
    if ft.shape != fr.shape:
        raise ValueError("densities live on different grids")
    zero_ref = fr <= 0
    if np.any(ft[zero_ref] > tol):
        raise AbsoluteContinuityError("f_tilde has mass where f vanishes")
    pos = ft > 0
    floored = int(np.count_nonzero(pos & (fr < FLOOR)))
    if floored:
        log.debug("relative entropy: %d floored cells", floored)
    log_ratio = np.log(ft[pos]) - np.maximum(np.log(np.maximum(fr[pos], FLOOR)), LOG_FLOOR)
    return float(np.sum(ft[pos] * log_ratio) * f.cell_area)


def l1_distance(f_tilde: PhaseDensity, f: PhaseDensity) -> float:
    return float(np.abs(f_tilde.values - f.values).sum() * f.cell_area)


def log_density_gradient(f: PhaseDensity, full: bool = False) -> np.ndarray:
    """``|grad_v log f|`` (or ``|grad_(x,v) log f|`` when ``full``) by central differences."""
    logf = np.maximum(np.log(np.maximum(f.values, FLOOR)), LOG_FLOOR)
    gv = np.gradient(logf, f.dv, axis=1)
    if not full:
        return np.abs(gv)
    gx = (np.roll(logf, -1, axis=0) - np.roll(logf, 1, axis=0)) / (2.0 * f.dx)
    return np.hypot(gx, gv)


def theta_exp_moment(f: PhaseDensity, lam: float, full_gradient: bool = False) -> float:
    """``int f exp(lam |grad_v log f|)``; ``inf`` when the value overflows.

    With ``full_gradient`` the weight uses ``|grad_(x,v) log f|``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    g = log_density_gradient(f, full_gradient)
    pos = f.values > 0
    terms = np.log(f.values[pos]) + lam * g[pos]
    log_theta = float(logsumexp(terms)) + math.log(f.cell_area)
    if log_theta > 709.0:
        return math.inf
    return math.exp(log_theta)


def weighted_l1(f_tilde: PhaseDensity, f: PhaseDensity) -> float:
    """Grid value of ``int |grad_v log f| |f_tilde - f|``."""
    return float(np.sum(log_density_gradient(f) * np.abs(f_tilde.values - f.values)) * f.cell_area)


def weighted_ckp_bound(f_tilde: PhaseDensity, f: PhaseDensity, lam: float) -> float:
    """``(2/lam) (3/2 + log theta) (sqrt(H) + H/2)`` with weight ``|grad_v log f|``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    theta = theta_exp_moment(f, lam)
    if math.isinf(theta):
        return math.inf
    h = max(relative_entropy_grid(f_tilde, f), 0.0)
    return (2.0 / lam) * (1.5 + math.log(theta)) * (math.sqrt(h) + 0.5 * h)


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    H: float
    theta: float
    C_hat: float


@dataclass
class MonitorResult:
    records: list
    exit_time: float | None = None

    @property
    def sup_h(self) -> float:
        return max(r.H for r in self.records)


def weak_strong_monitor(f_tilde0: PhaseDensity, f0: PhaseDensity, kernel: Kernel,
                        cfg: SolverConfig, t_end: float, lam: float = 0.5,
                        record_every: int = 1) -> MonitorResult:
    """Evolve both densities and track ``H(t)``, ``theta_f(t)`` and the running rate.

    ``C_hat(t) = max_{0 < s <= t} log(H(s)/H(0)) / s`` is the smallest rate with
    ``H(s) <= H(0) exp(C_hat s)`` so far.  The run stops at the first time
    ``H > 1`` and reports it as ``exit_time``.
    """
    h0 = relative_entropy_grid(f_tilde0, f0)
    if h0 > 1.0:
        raise ValueError(f"H(0) = {h0:.4g} > 1 is outside the monitored regime")
    records = [MonitorRecord(f0.time, h0, theta_exp_moment(f0, lam), math.nan)]
    ft, f = f_tilde0, f0
    c_hat = -math.inf
    n_steps = int(math.ceil((t_end - f0.time) / cfg.dt - 1e-9))
    for k in range(1, n_steps + 1):
        dt = cfg.dt if k < n_steps else (t_end - f0.time) - (n_steps - 1) * cfg.dt
        step_cfg = cfg if dt == cfg.dt else SolverConfig(dt, cfg.epsilon, cfg.order, cfg.check_cfl,
                                                         cfg.clamp_tol, cfg.tail_tol)
        ft = step_vlasov(ft, kernel, step_cfg)
        f = step_vlasov(f, kernel, step_cfg)
        if k % record_every and k != n_steps:
            continue
        h = relative_entropy_grid(ft, f)
        s = f.time - f0.time
        if h0 > 0 and h > 0:
            c_hat = max(c_hat, math.log(h / h0) / s)
        elif h0 == 0 and h > 0:
            c_hat = math.inf
        records.append(MonitorRecord(f.time, h, theta_exp_moment(f, lam),
                                     c_hat if c_hat > -math.inf else 0.0))
        if h > 1.0:
            return MonitorResult(records, exit_time=f.time)
    return MonitorResult(records)


def save_density(f: PhaseDensity, path) -> Path:
    """Write a snapshot; ``.npz`` is binary, anything else is CSV with a header line."""
    path = Path(path)
    if path.suffix == ".npz":
        np.savez(path, values=f.values, v_max=f.v_max, time=f.time)
        return path
    header = f"G_x={f.gx},G_v={f.gv},v_max={f.v_max!r},time={f.time!r}"
    np.savetxt(path, f.values, delimiter=",", header=header, fmt="%.17g")
    return path


def load_density(path) -> PhaseDensity:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            return PhaseDensity(data["values"], float(data["v_max"]), float(data["time"]))
    with open(path) as fh:
        header = fh.readline().lstrip("#").strip()
    meta = dict(item.split("=") for item in header.split(","))
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    if values.shape != (int(meta["G_x"]), int(meta["G_v"])):
        raise ValueError("snapshot header does not match the stored grid")
    return PhaseDensity(values, float(meta["v_max"]), float(meta["time"]))
