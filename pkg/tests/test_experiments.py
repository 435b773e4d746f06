import json
import math

import pytest

from chaoslab import experiments as ex
from chaoslab.cli import main
from chaoslab.metrics import (Binning, marginal_and_distance, regime_parameter, sup_ratio,
                              theorem_bound)
from chaoslab.particles import sample_initial

EMPTY_COMBINATORICS = {k: 0 for k in ("p_max", "q_max", "n_max", "k_max", "comp_q_max", "comp_p_max",
                                      "u_k_max", "multinomial_l_max", "v_n_max")}
EMPTY_COMBINATORICS.update(multinomial_p_max=-1, v_k_max=-1)
EMPTY_CANCELLATION = {k: [] for k in ("general_n", "vanish1_quadrature_n", "vanish1_mc_n",
                                      "vanish2_quadrature_n", "vanish2_mc_n", "expansion_n")}
SMALL_CANCELLATION = dict(EMPTY_CANCELLATION, general_n=[2], vanish1_quadrature_n=[2], p_max=2)


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def cli(tmp_path, command, data, *extra, out="out"):
    return main([command, "--config", write_config(tmp_path, data), "--out", str(tmp_path / out),
                 "--no-figures", *extra])


def csv_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


def test_seed_is_mandatory():
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_dict({"kind": "expmoment"})


@pytest.mark.parametrize("bad", [{"N": [32, 8]}, {"N": [0]}, {"replicas": 0}, {"dt": 0},
                                 {"kind": "nope"}, {"bogus": 1},
                                 {"kernel": {"kind": "coulomb_trunc", "delta": -1}}])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 1, **bad})


def test_hash_ignores_field_order_and_output_options():
    a = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 1, "N": [8], "samples": 10})
    b = ex.ExperimentConfig.from_dict({"samples": 10, "N": [8], "seed": 1, "kind": "expmoment",
                                       "out": "elsewhere", "threads": 4})
    assert a.content_hash() == b.content_hash()
    c = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 1, "N": [8], "samples": 11})
    d = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 1, "N": [8], "samples": 10,
                                       "kernel": {"kappa": 1.0, "kind": "sine"}})
    assert c.content_hash() != a.content_hash()
    assert d.content_hash() == a.content_hash()


def test_derived_seeds_are_distinct_and_stable():
    seeds = {ex.derive_seed(5, n, r) for n in (8, 32) for r in range(10)}
    assert len(seeds) == 20
    assert ex.derive_seed(5, 8, 0) == ex.derive_seed(5, 8, 0)


def test_thread_resolution(monkeypatch):
    monkeypatch.delenv("CHAOSLAB_THREADS", raising=False)
    assert ex.resolve_threads() == 1
    monkeypatch.setenv("CHAOSLAB_THREADS", "3")
    assert ex.resolve_threads() == 3
    cfg = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 0, "threads": 2})
    assert ex.resolve_threads(None, cfg) == 2
    assert ex.resolve_threads(5, cfg) == 5
    monkeypatch.setenv("CHAOSLAB_THREADS", "many")
    with pytest.raises(ex.ConfigError):
        ex.resolve_threads()


def test_value_formatting():
    assert ex.format_value(0.1) == "0.10000000000000001"
    assert ex.format_value(True) == "true"
    assert ex.format_value(None) == ""
    assert ex.format_value((1, 2)) == "1-2"
    assert ex.format_value(math.inf) == "inf"


def test_expmoment_without_interaction():
    cfg = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 0, "N": [4, 16],
                                         "samples": 500, "kernel": {"kind": "zero"}})
    rec = ex.run(cfg)
    t = rec.tables["expmoment"]
    assert rec.passed
    assert t.column("estimate") == [1.0, 1.0] and t.column("theorem_bound") == [5.0, 5.0]


def test_expmoment_bound_column_is_exact():
    cfg = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 0, "N": [8], "samples": 2000,
                                         "params": {"a_target": 0.3}})
    t = ex.run(cfg).tables["expmoment"]
    a = t.column("a")[0]
    assert a == pytest.approx(0.3, rel=1e-12)
    assert t.column("theorem_bound")[0] == theorem_bound(a)


def test_expmoment_outside_regime_fails_with_note():
    cfg = ex.ExperimentConfig.from_dict({"kind": "expmoment", "seed": 0, "N": [8], "samples": 100,
                                         "params": {"nu": 1.0}})
    rec = ex.run(cfg)
    assert not rec.passed and rec.notes and "outside" in rec.notes[0]


def test_chaos_study_without_dynamics_matches_sampling_baseline():
    data = {"kind": "chaos_study", "seed": 4, "N": [200], "replicas": 5, "samples": 0, "t_end": 0.0,
            "law": {"kind": "maxwellian", "amplitude": 0.3}, "grid": {"gx": 64, "gv": 64}}
    cfg = ex.ExperimentConfig.from_dict(data)
    rec = ex.run(cfg)
    t = rec.tables["chaos_study"]
    ref = rec.artifacts["reference"]
    reps = [sample_initial(cfg.make_law(), 200, ex.derive_seed(4, 200, r)) for r in range(5)]
    bx, bv = (int(s.split("=")[1]) for s in t.column("bins_k1")[0].split(";"))
    base = marginal_and_distance(reps, ref, 1, binning=Binning.equiprobable(ref, bx, bv))
    assert t.column("l1_k1")[0] == base.l1_distance


def test_chaos_study_free_transport_sits_at_noise_floor():
    data = {"kind": "chaos_study", "seed": 2, "N": [500], "replicas": 20, "samples": 0, "t_end": 0.5,
            "kernel": {"kind": "zero"}, "law": {"kind": "maxwellian", "amplitude": 0.3},
            "grid": {"gx": 128, "gv": 128, "v_max": 6.0}}
    rec = ex.run(ex.ExperimentConfig.from_dict(data))
    t = rec.tables["chaos_study"]
    ref = rec.artifacts["reference"]
    bx, bv = (int(s.split("=")[1]) for s in t.column("bins_k1")[0].split(";"))
    b = Binning.equiprobable(ref, bx, bv)
    p = ref.bin_probabilities(b.x_edges, b.v_edges).ravel()
    m = 500 * 20
    floor = float(sum(math.sqrt(2 * q * (1 - q) / (math.pi * m)) for q in p))
    assert 0.5 * floor <= t.column("l1_k1")[0] <= 1.5 * floor


def test_chaos_study_requires_particle_counts():
    with pytest.raises(ex.ConfigError):
        ex.run(ex.ExperimentConfig.from_dict({"kind": "chaos_study", "seed": 0}))


def test_simulate_rows_and_thread_independence(tmp_path):
    data = {"kind": "simulate", "seed": 9, "N": [20, 40], "replicas": 3, "dt": 0.01, "t_end": 0.1,
            "noise": {"kind": "fixed", "epsilon0": 0.1}, "params": {"observe_every": 5}}
    assert cli(tmp_path, "simulate", data, "--threads", "1", out="a") == 0
    assert cli(tmp_path, "simulate", data, "--threads", "3", out="b") == 0
    a, b = csv_bytes(tmp_path / "a"), csv_bytes(tmp_path / "b")
    assert a == b and set(a) == {"simulate_N20.csv", "simulate_N40.csv"}
    lines = a["simulate_N20.csv"].decode().splitlines()
    assert lines[0] == "t,observable_name,value,replica_id,seed"
    assert len(lines) == 1 + 3 * 3 * 3


def test_rerun_is_byte_identical(tmp_path):
    data = {"kind": "cancellation_verify", "seed": 5, "samples": 2000,
            "params": dict(SMALL_CANCELLATION, vanish1_mc_n=[10])}
    assert cli(tmp_path, "cancellation-verify", data, out="a") == 0
    assert cli(tmp_path, "cancellation-verify", data, out="b") == 0
    assert csv_bytes(tmp_path / "a") == csv_bytes(tmp_path / "b")
    assert json.loads((tmp_path / "a" / "run.json").read_text())["passed"] is True


def test_seed_override_changes_monte_carlo_rows(tmp_path):
    data = {"kind": "expmoment", "seed": 5, "N": [8], "samples": 1000, "params": {"a_target": 0.5}}
    assert cli(tmp_path, "expmoment", data, out="a") == 0
    assert cli(tmp_path, "expmoment", data, "--seed", "6", out="b") == 0
    assert csv_bytes(tmp_path / "a") != csv_bytes(tmp_path / "b")


def test_injected_formula_fault_fails(tmp_path):
    data = {"kind": "combinatorics_verify", "seed": 0, "inject_fault": "count_E_formula",
            "params": dict(EMPTY_COMBINATORICS, p_max=2, q_max=2)}
    assert cli(tmp_path, "combinatorics-verify", data) == 1
    text = (tmp_path / "out" / "combinatorics_verify.csv").read_text()
    assert ",false" in text


def test_injected_convolution_fault_fails(tmp_path):
    data = {"kind": "cancellation_verify", "seed": 0, "inject_fault": "conv_field",
            "params": SMALL_CANCELLATION}
    assert cli(tmp_path, "cancellation-verify", data) == 1


@pytest.mark.parametrize("command,kind,params", [
    ("combinatorics-verify", "combinatorics_verify", EMPTY_COMBINATORICS),
    ("cancellation-verify", "cancellation_verify", EMPTY_CANCELLATION),
])
def test_empty_grid_gives_empty_passing_record(tmp_path, command, kind, params):
    assert cli(tmp_path, command, {"kind": kind, "seed": 0, "params": params}) == 0
    lines = (tmp_path / "out" / f"{kind}.csv").read_text().splitlines()
    assert len(lines) == 1


def test_empty_weakstrong_grid(tmp_path):
    data = {"kind": "weakstrong", "seed": 0, "t_end": 0.05, "grid": {"gx": 16, "gv": 48},
            "params": {"h0": []}}
    assert cli(tmp_path, "weakstrong", data) == 0


def test_configuration_errors_exit_2(tmp_path, capsys):
    assert cli(tmp_path, "expmoment", {"kind": "expmoment"}) == 2
    assert cli(tmp_path, "expmoment", {"kind": "expmoment", "seed": 1, "N": [9, 3]}) == 2
    assert cli(tmp_path, "expmoment", {"kind": "weakstrong", "seed": 1}) == 2
    assert main(["expmoment", "--config", str(tmp_path / "missing.json")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unreachable_entropy_is_a_configuration_error(tmp_path):
    data = {"kind": "weakstrong", "seed": 0, "t_end": 0.05, "grid": {"gx": 16, "gv": 16},
            "params": {"h0": [50.0]}}
    assert cli(tmp_path, "weakstrong", data) == 2


def test_solver_guard_fails_vlasov_run(tmp_path):
    data = {"kind": "vlasov_run", "seed": 0, "t_end": 0.1,
            "grid": {"gx": 16, "gv": 16, "v_max": 2.0}}
    assert cli(tmp_path, "vlasov-run", data) == 1


def test_vlasov_run_writes_snapshot_and_figures(tmp_path):
    data = {"kind": "vlasov_run", "seed": 0, "t_end": 0.1, "law": {"kind": "maxwellian", "amplitude": 0.2},
            "grid": {"gx": 32, "gv": 32}}
    out = tmp_path / "v"
    assert main(["vlasov-run", "--config", write_config(tmp_path, data), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"vlasov_diagnostics.csv", "density_final.csv", "run.json", "vlasov_density.png",
            "vlasov_mass.png"} <= names


def test_weakstrong_small_grid(tmp_path):
    data = {"kind": "weakstrong", "seed": 0, "t_end": 0.2, "grid": {"gx": 32, "gv": 32},
            "law": {"kind": "maxwellian", "amplitude": 0.3}, "params": {"h0": [1e-2, 1e-3]}}
    rec = ex.run(ex.ExperimentConfig.from_dict(data))
    s = rec.tables["weakstrong_summary"]
    assert rec.passed
    assert s.column("h0_target") == [0.0, 1e-2, 1e-3, "linearity"]
    assert s.column("h0")[1] == pytest.approx(1e-2, rel=1e-9)


def test_sup_ratio_certified_matches_scan(law):
    assert ex.sup_ratio_certified(law) == pytest.approx(sup_ratio(law))
    assert regime_parameter(1.0, ex.sup_ratio_certified(law)) > 0


def test_weakstrong_guard_is_a_failed_run(tmp_path):
    data = {"kind": "weakstrong", "seed": 0, "t_end": 0.05, "grid": {"gx": 16, "gv": 16},
            "params": {"h0": [1e-3]}}
    assert cli(tmp_path, "weakstrong", data) == 1
