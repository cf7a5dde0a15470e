import json

import numpy as np
import pytest

from netssea import harness
from netssea.engine import Population
from netssea.harness import ConfigError, ExperimentConfig, TopologySpec
from netssea.problems import ProblemSpec

SMALL = """
[experiment]
name = small
runs = 4
master_seed = 3

[problem]
kind = nmax
b = 4
L = 3

[topology]
model = sw
n = 60
k = 2
r = 0.05

[engine]
max_generations = 400
"""


def small_cfg(tmp_path=None, **kw):
    cfg = ExperimentConfig(ProblemSpec.nmax(4, 3), TopologySpec(model="sw", n=60, r=0.05),
                           runs=4, master_seed=3, max_generations=400)
    if tmp_path is not None:
        cfg.output_dir = str(tmp_path)
    return harness.with_overrides(cfg, **kw)


def test_parse_config_strict():
    values, grid = harness.parse_config(SMALL)
    assert values["topology.model"] == "sw" and values["problem.L"] == 3
    assert grid == {}
    with pytest.raises(ConfigError, match="already exists"):
        harness.parse_config(SMALL + "\n[engine]\nalpha = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        harness.parse_config("[bogus]\nx = 1\n")
    with pytest.raises(ConfigError):
        harness.parse_config("[experiment]\nruns = many\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        harness.parse_config("[engine]\nalpah = 1\n")


def test_build_config_defaults_mirror_reference_setup():
    cfg = harness.build_config({})
    assert cfg.topology.n == 10_000 and cfg.runs == 100
    assert cfg.max_generations == 5000 and cfg.problem == ProblemSpec.onemax(640)
    assert cfg.engine_config(harness.topo.gen_complete(10), 1).mutation_rate == 1 / 640


def test_desk_preset():
    cfg = harness.build_config({"experiment.preset": "desk", "problem.kind": "nmax"})
    assert cfg.topology.n == 1000 and cfg.problem == ProblemSpec.nmax(32, 10)
    with pytest.raises(ConfigError):
        harness.build_config({"experiment.preset": "huge"})


def test_bad_values_rejected():
    for values in ({"problem.kind": "threemax"}, {"topology.model": "lattice"},
                   {"experiment.runs": 0}, {"problem.kind": "nmax", "problem.b": 5},
                   {"problem.L": 3}):
        with pytest.raises(ConfigError):
            harness.build_config(values)


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError, match="nope.ini"):
        harness.load_config(tmp_path / "nope.ini")


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUTPUT_DIR_ENV, str(tmp_path))
    assert harness.build_config({}).output_dir == str(tmp_path)


def test_derive_seed_independent_of_other_runs():
    a = [harness.derive_seed(5, i, 1) for i in range(4)]
    assert len(set(a)) == 4
    assert harness.derive_seed(5, 2, 1) == a[2]
    assert harness.derive_seed(5, 2, 0) != a[2]
    assert harness.derive_seed(6, 2, 1) != a[2]


def test_execute_run_replays_alone():
    cfg = small_cfg()
    camp = harness.run_campaign(cfg)
    alone = harness.execute_run(cfg, 2)
    assert alone.metrics.series == camp.outcomes[2].metrics.series


def test_campaign_files_byte_identical(tmp_path):
    outs = []
    for sub in ("a", "b"):
        cfg = small_cfg(tmp_path / sub, write_series=True)
        harness.run_campaign(cfg)
        files = sorted(p.relative_to(tmp_path / sub) for p in (tmp_path / sub).rglob("*") if p.is_file())
        # the config echo names the output directory, which differs on purpose
        texts = [(f, (tmp_path / sub / f).read_text().replace(str(tmp_path / sub), "OUT")) for f in files]
        outs.append(texts)
    assert outs[0] == outs[1]
    names = [str(f) for f, _ in outs[0]]
    assert "summary.json" in names and "runs.jsonl" in names and "series/run_0000.csv" in names


def test_summary_matches_run_records(tmp_path):
    cfg = small_cfg(tmp_path, runs=6)
    harness.run_campaign(cfg)
    doc = json.loads((tmp_path / "summary.json").read_text())
    recs = [json.loads(l) for l in (tmp_path / "runs.jsonl").read_text().splitlines()]
    assert len(recs) == 6
    assert doc["config"]["master_seed"] == 3 and doc["rng"]["bit_generator"] == "PCG64"
    for key in harness.SUMMARY_METRICS:
        vals = [r[key] for r in recs if r[key] is not None]
        st = doc["summary"]["stats"][key]
        assert st["count"] == len(vals)
        assert st["undefined"] == 6 - len(vals)
        if vals:
            assert st["mean"] == pytest.approx(np.mean(vals))
            assert st["std"] == pytest.approx(np.std(vals, ddof=1) if len(vals) > 1 else 0.0)
            assert st["median"] == pytest.approx(np.median(vals))
    assert doc["summary"]["failures"] == sum(r["fct"] is None for r in recs)
    assert all(r["config"] == doc["config"] for r in recs)


def test_series_files_carry_provenance(tmp_path):
    cfg = small_cfg(tmp_path, runs=1, write_series=True)
    harness.run_campaign(cfg)
    head = (tmp_path / "series" / "run_0000.csv").read_text().splitlines()[:5]
    assert head[0].startswith("# config: ")
    assert any(h.startswith("# engine_seed: ") for h in head)


def test_all_optimal_hook_gives_zero_times():
    cfg = small_cfg(runs=1)

    def hook(ecfg, rng):
        g = np.zeros((ecfg.graph.n, ecfg.problem.length), np.uint8)
        return Population.from_genomes(g, ecfg.problem)

    camp = harness.run_campaign(cfg, population_hook=hook)
    m = camp.metrics[0]
    assert m.fht == 0 and m.fct == 0


def test_failures_counted_when_budget_too_small():
    camp = harness.run_campaign(small_cfg(max_generations=2, runs=3))
    assert camp.summary.failures == 3
    assert camp.summary["fct"].mean is None and camp.summary["fct"].undefined == 3


def test_unbuildable_topology_aborts():
    cfg = ExperimentConfig(ProblemSpec.onemax(4), TopologySpec(model="er", n=50, p=0.001, max_attempts=3),
                           runs=1)
    with pytest.raises(harness.CampaignError, match="connected"):
        harness.run_campaign(cfg)


def test_shared_topology_flag():
    cfg = small_cfg(topology_shared=True, topology_r=0.3, runs=2)
    g0, _ = cfg.topology.build(harness.derive_seed(3, 0, 0))
    seen = []
    for i in range(2):
        harness.execute_run(cfg, i, on_generation=lambda e, p, w: None)
        seen.append(harness.execute_run(cfg, i).graph_seed)
    assert seen[0] == seen[1] == harness.derive_seed(3, 0, 0)
    assert g0.n == 60


def test_workers_match_serial():
    a = harness.run_campaign(small_cfg(runs=3))
    b = harness.run_campaign(small_cfg(runs=3, workers=2))
    assert [m.series for m in a.metrics] == [m.series for m in b.metrics]


# -- sweeps -------------------------------------------------------------------

def test_empty_grid_rejected():
    values, _ = harness.parse_config(SMALL)
    with pytest.raises(ConfigError):
        harness.expand_grid(values, {})
    with pytest.raises(ConfigError):
        harness.sweep([])
    with pytest.raises(ConfigError):
        harness.parse_config(SMALL + "\n[sweep]\nengine.alpha = ,\n")


def test_sweep_table_and_relative_fht(tmp_path):
    text = SMALL + "\n[sweep]\ntopology.r = 0, 0.1\nengine.alpha = 0, 0.5\n"
    values, grid = harness.parse_config(text)
    cells = harness.expand_grid(values, grid)
    assert len(cells) == 4
    res = harness.sweep(cells, output_dir=tmp_path)
    rows = res.table()
    assert [(r["topology.r"], r["engine.alpha"]) for r in rows] == [(0.0, 0.0), (0.0, 0.5), (0.1, 0.0), (0.1, 0.5)]
    assert all(r["error"] == "" for r in rows)
    rel = [r["relative_fht"] for r in res.relative_fht_rows() if r["relative_fht"] is not None]
    assert min(rel) == 1.0
    text = (tmp_path / "sweep.csv").read_text()
    assert "topology.r,engine.alpha,runs" in text
    assert (tmp_path / "relative_fht.csv").exists()


def test_sweep_records_failed_cell():
    good = small_cfg(runs=1)
    bad = harness.with_overrides(good, topology_model="er", topology_p=0.0, topology_max_attempts=2)
    res = harness.sweep([({"cell": 1}, good), ({"cell": 2}, bad)])
    assert res.cells[0][2] is None
    assert "CampaignError" in res.cells[1][2]


def test_alpha_zero_cell_equals_unweighted_campaign():
    base = small_cfg(runs=3)
    text = SMALL + "\n[sweep]\nengine.alpha = -0.5, 0, 0.5\n"
    values, grid = harness.parse_config(text)
    res = harness.sweep(harness.expand_grid(values, grid))
    zero = res.cells[1][1]
    plain = harness.run_campaign(harness.with_overrides(base, runs=4))
    assert [m.series for m in zero.metrics] == [m.series for m in plain.metrics]


def test_readme_config_example_parses():
    from pathlib import Path
    readme = (Path(__file__).parents[1] / "README.md").read_text()
    block = readme.split("```ini\n", 1)[1].split("```", 1)[0]
    values, grid = harness.parse_config(block)
    cfg = harness.build_config(values)
    assert cfg.topology.n == 1000 and cfg.problem == ProblemSpec.nmax(32, 10)
    assert cfg.topology.model == "sw" and cfg.output_dir == "out/sw-nmax"
    assert grid == {"topology.r": [0.0, 0.001, 0.01], "engine.alpha": [-2.0, 0.0, 2.0]}
    assert len(harness.expand_grid(values, grid)) == 9
