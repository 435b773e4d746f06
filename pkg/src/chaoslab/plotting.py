"""PNG figures rendered next to the CSV output of each experiment."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import RunRecord  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.fontsize": 8,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _num(values):
    return np.array([np.nan if v is None else float(v) for v in values])


def plot_chaos_study(rec: RunRecord, out: Path) -> list[Path]:
    t = rec.tables["chaos_study"]
    n = _num(t.column("N"))
    fig, ax = plt.subplots()
    ax.errorbar(n, _num(t.column("l1_k1")), yerr=_num(t.column("l1_k1_stderr")), marker="o",
                capsize=3, label="order-1 marginal")
    l2 = _num(t.column("l1_k2"))
    if np.isfinite(l2).any():
        ax.errorbar(n, l2, yerr=_num(t.column("l1_k2_stderr")), marker="s", capsize=3,
                    label="order-2 marginal")
    ref = _num(t.column("l1_k1"))[0] * np.sqrt(n[0] / n)
    ax.plot(n, ref, "k--", lw=1, label=r"$\propto N^{-1/2}$")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("histogram L1 distance")
    ax.legend()
    return [_save(fig, out / "chaos_study.png")]


def plot_expmoment(rec: RunRecord, out: Path) -> list[Path]:
    t = rec.tables["expmoment"]
    n = _num(t.column("N"))
    fig, ax = plt.subplots()
    ax.errorbar(n, _num(t.column("estimate")), yerr=3 * _num(t.column("stderr")), marker="o",
                capsize=3, label="estimate $\\pm$ 3 stderr")
    bound = _num(t.column("theorem_bound"))
    if np.isfinite(bound).any():
        ax.axhline(np.nanmax(bound), color="C3", ls="--", label="closed-form bound")
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel(r"$\int \bar f_N \exp(\nu |R_N|)$")
    ax.legend()
    return [_save(fig, out / "expmoment.png")]


def plot_weakstrong(rec: RunRecord, out: Path) -> list[Path]:
    t = rec.tables["weakstrong_monitor"]
    h0t = np.array(t.column("h0_target"), dtype=float)
    tt, H = _num(t.column("t")), _num(t.column("H"))
    fig, ax = plt.subplots()
    for h in sorted(set(h0t) - {0.0}, reverse=True):
        sel = h0t == h
        ax.plot(tt[sel], H[sel] / H[sel][0], label=f"H(0) = {h:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("H(t) / H(0)")
    ax.legend()
    return [_save(fig, out / "weakstrong.png")]


def plot_vlasov(rec: RunRecord, out: Path) -> list[Path]:
    paths = []
    f = rec.artifacts.get("density")
    if f is not None:
        fig, ax = plt.subplots()
        im = ax.imshow(f.values.T, origin="lower", aspect="auto", cmap="viridis",
                       extent=(0.0, 1.0, -f.v_max, f.v_max))
        fig.colorbar(im, ax=ax, label="f")
        ax.set_xlabel("x")
        ax.set_ylabel("v")
        ax.set_title(f"t = {f.time:.3g}")
        ax.grid(False)
        paths.append(_save(fig, out / "vlasov_density.png"))
    t = rec.tables["vlasov_diagnostics"]
    fig, ax = plt.subplots()
    drift = np.abs(_num(t.column("mass_drift")))
    ax.semilogy(_num(t.column("t")), np.maximum(drift, 1e-18), marker=".")
    ax.set_xlabel("t")
    ax.set_ylabel("|mass drift| before renormalisation")
    paths.append(_save(fig, out / "vlasov_mass.png"))
    return paths


def plot_simulate(rec: RunRecord, out: Path) -> list[Path]:
    paths = []
    for name, t in rec.tables.items():
        names = t.column("observable_name")
        fig, axes = plt.subplots(len(set(names)), 1, sharex=True, squeeze=False,
                                 figsize=(6.0, 2.0 * len(set(names)) + 1))
        for ax, obs in zip(axes[:, 0], sorted(set(names))):
            rows = [r for r in t.rows if r[1] == obs]
            for rid in sorted({r[3] for r in rows}):
                sel = [r for r in rows if r[3] == rid]
                ax.plot([r[0] for r in sel], [r[2] for r in sel], lw=0.8)
            ax.set_ylabel(obs)
        axes[-1, 0].set_xlabel("t")
        paths.append(_save(fig, out / f"{name}.png"))
    return paths


def plot_combinatorics(rec: RunRecord, out: Path) -> list[Path]:
    t = rec.tables["combinatorics_verify"]
    rows = [r for r in t.rows if r[0] == "count_E" and r[2] > 0]
    if not rows:
        return []
    fig, ax = plt.subplots()
    exact = np.array([r[2] for r in rows], dtype=float)
    bound = np.array([r[4] for r in rows], dtype=float)
    ax.loglog(exact, bound, "o", ms=4)
    lim = [exact.min(), bound.max()]
    ax.plot(lim, lim, "k--", lw=1, label="bound = count")
    ax.set_xlabel("exact count of effective tuples")
    ax.set_ylabel("closed-form upper bound")
    ax.legend()
    return [_save(fig, out / "combinatorics.png")]


def plot_cancellation(rec: RunRecord, out: Path) -> list[Path]:
    t = rec.tables["cancellation_verify"]
    rows = [r for r in t.rows if r[0] in ("case1", "case2")]
    if not rows:
        return []
    fig, ax = plt.subplots()
    for kind, marker in (("case1", "o"), ("case2", "s")):
        vals = np.array([abs(r[5]) for r in rows if r[0] == kind])
        if vals.size:
            ax.semilogy(np.arange(vals.size), np.maximum(vals, 1e-40), marker, ms=3, label=kind)
    tol = rows[0][7]
    ax.axhline(tol, color="C3", ls="--", label=f"tolerance {tol:g}")
    ax.set_xlabel("index pair")
    ax.set_ylabel("|integral|")
    ax.legend()
    return [_save(fig, out / "cancellation.png")]


PLOTTERS = {
    "chaos_study": plot_chaos_study,
    "expmoment": plot_expmoment,
    "weakstrong": plot_weakstrong,
    "vlasov_run": plot_vlasov,
    "simulate": plot_simulate,
    "combinatorics_verify": plot_combinatorics,
    "cancellation_verify": plot_cancellation,
}


def render(rec: RunRecord, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        return PLOTTERS[rec.config.kind](rec, out)
