import csv
import math

import numpy as np
import pytest

from cmdplab.errors import CmdpInputError
from cmdplab.harness import (
    CSV_COLUMNS, ExperimentConfig, binding_seeds, build_model, emit_plot, fit_loglog_slope,
    random_cmdp, read_csv, run_sweep, summarize, write_csv,
)
from cmdplab.lp_oracle import slater_constant


def test_random_cmdp_has_requested_slater_constant():
    for seed in range(5):
        assert slater_constant(random_cmdp(5, 3, 0.9, seed, 0.3)) == pytest.approx(0.3, abs=1e-9)


def test_random_cmdp_is_deterministic():
    a, b = random_cmdp(4, 2, 0.5, 7, 0.2), random_cmdp(4, 2, 0.5, 7, 0.2)
    assert np.array_equal(a.transitions, b.transitions) and a.b == b.b


def test_single_state_random_cmdp():
    m = random_cmdp(1, 2, 0.5, 0, 0.0)
    assert m.num_states == 1


def test_random_cmdp_rejects_unreachable_slater():
    with pytest.raises(CmdpInputError):
        random_cmdp(3, 2, 0.5, 0, 5.0)


def test_binding_seeds_have_positive_multiplier():
    from cmdplab.lp_oracle import solve_cmdp_exact
    for seed in binding_seeds(3, 4, 2, 0.5, 0.3):
        assert solve_cmdp_exact(random_cmdp(4, 2, 0.5, seed, 0.3)).lambda_star >= 0.5


def test_config_validation():
    with pytest.raises(CmdpInputError):
        ExperimentConfig(mode="relaxed", model={"kind": "t1"}, n_schedule=[10, 10], seeds=[0])
    with pytest.raises(CmdpInputError):
        ExperimentConfig(mode="relaxed", model={"kind": "t1"}, n_schedule=[10], seeds=[])
    with pytest.raises(CmdpInputError):
        ExperimentConfig.from_dict({"mode": "relaxed", "model": {}, "n_schedule": [1], "seeds": [0], "x": 1})
    cfg = ExperimentConfig.from_dict({"mode": "strict", "model": {"kind": "t1"}, "seeds": [0],
                                      "n_geometric": {"start": 100, "ratio": 4, "count": 3}})
    assert cfg.n_schedule == [100, 400, 1600]


def test_model_sources(tmp_path):
    from cmdplab.model_io import save_cmdp
    assert build_model({"kind": "t1", "b": 0.7}).b == 0.7
    hard = build_model({"kind": "hard", "m": 1, "num_actions": 2, "gamma": 0.9, "b": 0.5, "zeta": 0.2})
    assert hard.num_states == 11
    save_cmdp(tmp_path / "m.json", hard)
    assert build_model({"kind": "file", "path": str(tmp_path / "m.json")}).num_states == 11
    with pytest.raises(CmdpInputError):
        build_model({"kind": "nope"})


def test_empty_schedule_writes_header_only(tmp_path):
    write_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"


def small_sweep(tmp_path, name="s.csv", threads=1, **kw):
    base = dict(mode="relaxed", model={"kind": "t1"}, n_schedule=[100, 400], seeds=[0, 1, 2],
                epsilon=1.0, t_cap=20_000, threads=threads, out_csv=str(tmp_path / name))
    base.update(kw)
    return run_sweep(ExperimentConfig(**base))


def test_deterministic_model_sweep(tmp_path):
    recs = small_sweep(tmp_path)
    assert len(recs) == 6
    for r in recs:
        assert r.status == "ok"
        assert r.queries_used == r.N * 2 * 2
        assert r.relaxed_ok
        assert r.reward_gap == pytest.approx(r.v_reward_opt - r.v_reward_true, abs=1e-12)
        assert r.constraint_violation == max(0.0, 0.9 - r.v_constraint_true)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 7
    assert (tmp_path / "s.summary.csv").exists() and (tmp_path / "s.timings.csv").exists()


def test_sweep_is_byte_identical_across_runs_and_workers(tmp_path):
    small_sweep(tmp_path, "a.csv", model={"kind": "random", "S": 3, "A": 2, "gamma": 0.5, "seed": 2})
    small_sweep(tmp_path, "b.csv", model={"kind": "random", "S": 3, "A": 2, "gamma": 0.5, "seed": 2},
                threads=2)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_strict_sweep_with_estimated_zeta(tmp_path):
    recs = small_sweep(tmp_path, mode="strict", model={"kind": "t1", "b": 0.7}, estimate_zeta=True,
                       n_schedule=[100], seeds=[0])
    r = recs[0]
    assert r.status == "ok"
    assert r.queries_used > r.N * 4
    assert r.strict_ok


def test_failures_are_recorded(tmp_path):
    # strict mode on a model with zero Slater constant cannot build a preset
    recs = small_sweep(tmp_path, mode="strict", model={"kind": "t1", "b": 1.0}, n_schedule=[50], seeds=[0])
    assert recs[0].status.startswith("error") and not recs[0].strict_ok


def test_summary_frequencies(tmp_path):
    recs = small_sweep(tmp_path)
    rows = summarize(recs, 0.1)
    assert [r["N"] for r in rows] == [100, 400]
    assert all(r["relaxed_freq"] == 1.0 and r["target"] == pytest.approx(0.6) for r in rows)


def test_fit_exact_power_law():
    ns = np.array([100, 400, 1600, 6400])
    assert fit_loglog_slope(ns, ns**-0.5) == pytest.approx(-0.5, abs=0.01)
    assert math.isnan(fit_loglog_slope([1], [1]))


def test_plot_synthetic_and_empty(tmp_path):
    path = tmp_path / "syn.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for n in (100, 400, 1600, 6400):
            w.writerow([0, n, 0.1, n, 0, 0, 0, n**-0.5, n**-0.5 / 2, True, True, False, "ok"])
    slope = emit_plot(path, tmp_path / "syn.svg")
    assert slope == pytest.approx(-0.5, abs=0.01)
    svg = (tmp_path / "syn.svg").read_bytes()
    emit_plot(path, tmp_path / "syn2.svg")
    assert svg == (tmp_path / "syn2.svg").read_bytes()
    write_csv([], tmp_path / "empty.csv")
    assert math.isnan(emit_plot(tmp_path / "empty.csv", tmp_path / "empty.svg"))
    assert (tmp_path / "empty.svg").read_text().startswith("<?xml")


def test_plot_rejects_malformed_csv(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(CmdpInputError):
        read_csv(tmp_path / "bad.csv")


def test_opposed_cmdp_mirrors_rewards():
    from cmdplab.harness import unconstrained_violation
    m = random_cmdp(4, 2, 0.5, 3, 0.3, opposed=True)
    assert np.allclose(m.constraints, 1 - m.rewards)
    # same transitions as the independent draw with the same seed
    assert np.array_equal(m.transitions, random_cmdp(4, 2, 0.5, 3, 0.3).transitions)
    for seed in binding_seeds(2, 4, 2, 0.5, 0.3, opposed=True, min_tension=0.5):
        assert unconstrained_violation(random_cmdp(4, 2, 0.5, seed, 0.3, opposed=True)) >= 0.5
