"""Batch experiments: configuration files, seeded campaigns, sweeps, output files.

Seeding: run ``i`` of a campaign with master seed ``s`` draws its graph from
``SeedSequence(s, spawn_key=(i, 0))`` and its engine stream from
``SeedSequence(s, spawn_key=(i, 1))`` (first 64-bit word of each). Any run can
be replayed alone, and sweep cells sharing a master seed see the same
per-run streams.
"""
from __future__ import annotations

import configparser
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import topology as topo
from .engine import EngineConfig, iter_run
from .metrics import RunMetrics, relative_fht
from .problems import Kind, ProblemSpec

OUTPUT_DIR_ENV = "NETSSEA_OUTPUT_DIR"

# with k_min=2 and a sqrt(n) degree cutoff this gives mean degree ~4.1 and APL ~5.2 at n=10^4
SF_GAMMA = 2.5
# ER mean degree of the reference random graph: 50128 links on 10^4 nodes
ER_MEAN_DEGREE = 2 * 50128 / 10_000

PRESETS = {
    "full": {"topology.n": 10_000, "experiment.runs": 100},
    "desk": {"topology.n": 1_000, "experiment.runs": 100},
}

MODELS = ("complete", "er", "sf", "sw", "file")


class ConfigError(ValueError):
    pass


class CampaignError(RuntimeError):
    pass


def rng_info() -> dict:
    return {"bit_generator": "PCG64", "numpy": np.__version__}


def derive_seed(master_seed: int, run_index: int, stream: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_index, stream))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class TopologySpec:
    model: str = "complete"
    n: int = 10_000
    p: float | None = None
    links: float | None = None
    gamma: float = SF_GAMMA
    k_min: int = 2
    k_max: int | None = None
    k: int = 2
    r: float = 0.0
    path: str | None = None
    shared: bool = False
    max_attempts: int = 100

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown topology model {self.model!r}; choose from {MODELS}")
        if self.model == "file" and not self.path:
            raise ConfigError("model 'file' needs a path")

    def generate(self, rng: np.random.Generator) -> topo.Graph:
        m = self.model
        if m == "complete":
            return topo.gen_complete(self.n)
        if m == "er":
            if self.p is not None:
                return topo.gen_er(self.n, self.p, rng)
            links = self.links if self.links is not None else ER_MEAN_DEGREE * self.n / 2
            return topo.gen_er(self.n, seed=rng, links=links)
        if m == "sf":
            k_max = self.k_max if self.k_max is not None else math.isqrt(self.n)
            return topo.gen_scale_free(self.n, self.gamma, self.k_min, rng, k_max=k_max)
        if m == "sw":
            return topo.gen_small_world(self.n, self.k, self.r, rng)
        return topo.load_edge_list(self.path)

    def build(self, seed: int) -> tuple[topo.Graph, int]:
        """Generate until connected. Returns the graph and the attempt count."""
        rng = np.random.default_rng(seed)
        for attempt in range(1, self.max_attempts + 1):
            g = self.generate(rng)
            if g.is_connected():
                return g, attempt
            if self.model in ("complete", "file"):
                break
        raise CampaignError(f"could not build a connected {self.model} graph "
                            f"(n={self.n}) in {self.max_attempts} attempts")


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    topology: TopologySpec
    name: str = "experiment"
    mutation_rate: float | None = None
    alpha: float = 0.0
    max_generations: int = 5000
    freeze_mutation_after_fht: bool = False
    early_stop_on_fct: bool = True
    runs: int = 100
    master_seed: int = 0
    output_dir: str | None = None
    write_series: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["problem"] = self.problem.as_dict()
        d["topology"] = asdict(self.topology)
        return d

    def engine_config(self, graph: topo.Graph, seed: int) -> EngineConfig:
        return EngineConfig(
            problem=self.problem,
            graph=graph,
            mutation_rate=self.mutation_rate,
            alpha=self.alpha,
            max_generations=self.max_generations,
            freeze_mutation_after_fht=self.freeze_mutation_after_fht,
            early_stop_on_fct=self.early_stop_on_fct,
            seed=seed,
        )


# -- config files ----------------------------------------------------------------

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _opt(cast):
    def conv(text):
        return None if text.lower() in ("", "none") else cast(text)
    return conv


def _bool(text):
    try:
        return _BOOL[text.lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}") from None


_KEYS: dict[str, dict[str, Callable]] = {
    "experiment": {"name": str, "preset": str, "runs": int, "master_seed": int,
                   "output_dir": _opt(str), "write_series": _bool, "workers": int},
    "problem": {"kind": str, "b": int, "L": int},
    "topology": {"model": str, "n": int, "p": _opt(float), "links": _opt(float),
                 "gamma": float, "k_min": int, "k_max": _opt(int), "k": int, "r": float, "path": _opt(str),
                 "shared": _bool, "max_attempts": int},
    "engine": {"mutation_rate": _opt(float), "alpha": float, "max_generations": int,
               "freeze_mutation_after_fht": _bool, "early_stop_on_fct": _bool},
}


def _convert(section: str, key: str, text: str):
    try:
        cast = _KEYS[section][key]
    except KeyError:
        raise ConfigError(f"unknown key [{section}] {key}") from None
    try:
        return cast(text.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Parse INI text into ``(values, grid)``; both keyed ``"section.key"``.

    Unknown sections or keys are errors. ``[sweep]`` entries hold
    comma-separated values for any other ``section.key``. ``;`` starts a
    comment, also after a value.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values: dict[str, Any] = {}
    grid: dict[str, list] = {}
    for section in cp.sections():
        if section == "sweep":
            for dotted, raw in cp.items(section):
                sec, _, key = dotted.partition(".")
                if sec not in _KEYS or not key:
                    raise ConfigError(f"sweep key must be 'section.key', got {dotted!r}")
                items = [x for x in raw.split(",") if x.strip()]
                if not items:
                    raise ConfigError(f"sweep over {dotted!r} has no values")
                grid[dotted] = [_convert(sec, key, x) for x in items]
            continue
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            values[f"{section}.{key}"] = _convert(section, key, raw)
    return values, grid


def build_config(values: dict) -> ExperimentConfig:
    values = dict(values)
    preset = values.pop("experiment.preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values = {**PRESETS[preset], **values}
    sect: dict[str, dict] = {s: {} for s in _KEYS}
    for dotted, v in values.items():
        s, _, k = dotted.partition(".")
        sect[s][k] = v
    prob = sect["problem"]
    kind = prob.get("kind", "onemax")
    try:
        kind = Kind(kind)
    except ValueError:
        raise ConfigError(f"unknown problem kind {kind!r}") from None
    try:
        if kind is Kind.ONEMAX:
            if prob.get("L", 1) != 1:
                raise ConfigError("ONEMAX takes no L")
            problem = ProblemSpec.onemax(prob.get("b", 640))
        else:
            problem = ProblemSpec.nmax(prob.get("b", 32), prob.get("L", 10))
        cfg = ExperimentConfig(problem=problem, topology=TopologySpec(**sect["topology"]),
                               **sect["engine"], **sect["experiment"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        cfg.output_dir = env
    return cfg


def load_config(path) -> tuple[ExperimentConfig, dict]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    values, grid = parse_config(p.read_text(encoding="utf-8"), str(p))
    return build_config(values), {"values": values, "grid": grid}


def expand_grid(values: dict, grid: dict) -> list[tuple[dict, ExperimentConfig]]:
    """One ``(swept parameters, config)`` per point of the Cartesian grid."""
    if not grid:
        raise ConfigError("empty sweep grid")
    keys = list(grid)
    cells = []
    base = build_config(values)
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        cfg = build_config({**values, **params})
        tag = "_".join(f"{k.split('.')[1]}={v}" for k, v in params.items())
        cfg.name = f"{base.name}[{tag}]"
        if base.output_dir:
            cfg.output_dir = str(Path(base.output_dir) / tag)
        cells.append((params, cfg))
    return cells


# -- campaigns -----------------------------------------------------------------

@dataclass
class RunOutcome:
    run_index: int
    graph_seed: int
    engine_seed: int
    graph_attempts: int
    metrics: RunMetrics

    def record(self, cfg: ExperimentConfig) -> dict:
        return {
            "run": self.run_index,
            "name": cfg.name,
            "master_seed": cfg.master_seed,
            "graph_seed": self.graph_seed,
            "engine_seed": self.engine_seed,
            "graph_attempts": self.graph_attempts,
            **self.metrics.summary(),
        }


@dataclass
class Stat:
    mean: float | None
    std: float | None
    median: float | None
    q1: float | None
    q3: float | None
    count: int
    undefined: int

    @property
    def sem(self) -> float | None:
        if self.count == 0:
            return None
        return self.std / np.sqrt(self.count)


def describe(values: Sequence[float | None]) -> Stat:
    """Mean, sample std, median and quartiles over the defined values."""
    x = np.array([v for v in values if v is not None], dtype=float)
    undefined = len(values) - x.size
    if x.size == 0:
        return Stat(None, None, None, None, None, 0, undefined)
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return Stat(float(x.mean()), std, float(med), float(q1), float(q3), int(x.size), undefined)


SUMMARY_METRICS = ("fht", "fct", "max_distinct_optima", "cum_distinct_optima")


@dataclass
class CampaignSummary:
    name: str
    runs: int
    failures: int
    stats: dict[str, Stat]

    @classmethod
    def from_records(cls, name: str, records: Sequence[dict]) -> "CampaignSummary":
        stats = {k: describe([r[k] for r in records]) for k in SUMMARY_METRICS}
        failures = sum(r["fct"] is None for r in records)
        return cls(name, len(records), failures, stats)

    def __getitem__(self, key) -> Stat:
        return self.stats[key]

    def as_dict(self) -> dict:
        return {"name": self.name, "runs": self.runs, "failures": self.failures,
                "stats": {k: asdict(v) for k, v in self.stats.items()}}


@dataclass
class Campaign:
    config: ExperimentConfig
    summary: CampaignSummary
    outcomes: list[RunOutcome] = field(repr=False)

    @property
    def metrics(self) -> list[RunMetrics]:
        return [o.metrics for o in self.outcomes]

    def values(self, key: str) -> list:
        return [getattr(o.metrics, key) for o in self.outcomes]


def execute_run(cfg: ExperimentConfig, run_index: int, population_hook=None,
                graph: topo.Graph | None = None, on_generation=None) -> RunOutcome:
    """One seeded run. ``population_hook(engine_config, rng)`` may supply the
    initial population; ``on_generation(event, pop, weights)`` sees every step."""
    graph_seed = derive_seed(cfg.master_seed, 0 if cfg.topology.shared else run_index, 0)
    engine_seed = derive_seed(cfg.master_seed, run_index, 1)
    attempts = 0
    if graph is None:
        graph, attempts = cfg.topology.build(graph_seed)
    ecfg = cfg.engine_config(graph, engine_seed)
    rng = np.random.default_rng(engine_seed)
    pop0 = population_hook(ecfg, rng) if population_hook is not None else None
    metrics = RunMetrics(cfg.problem, graph.n)
    for pop, event, wts in iter_run(ecfg, pop0, rng):
        metrics.observe(event, pop)
        if on_generation is not None:
            on_generation(event, pop, wts)
    return RunOutcome(run_index, graph_seed, engine_seed, attempts, metrics)


def _run_job(args):
    cfg, i, hook, graph = args
    return execute_run(cfg, i, hook, graph)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_campaign(cfg: ExperimentConfig, population_hook=None, write: bool | None = None) -> Campaign:
    """Execute ``cfg.runs`` independent runs and summarise them.

    Writes ``summary.json``, ``runs.jsonl`` and optionally ``series/`` under
    ``cfg.output_dir`` (skipped when it is unset or ``write`` is False).
    """
    graph = None
    if cfg.topology.shared:
        graph, _ = cfg.topology.build(derive_seed(cfg.master_seed, 0, 0))
    jobs = [(cfg, i, population_hook, graph) for i in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            outcomes = list(ex.map(_run_job, jobs))
    else:
        outcomes = [_run_job(j) for j in jobs]
    records = [o.record(cfg) for o in outcomes]
    summary = CampaignSummary.from_records(cfg.name, records)
    campaign = Campaign(cfg, summary, outcomes)
    if write is None:
        write = cfg.output_dir is not None
    if write:
        write_campaign(campaign)
    return campaign


def provenance(cfg: ExperimentConfig, **extra) -> dict:
    return {"config": _dump(cfg.to_dict()), "rng": _dump(rng_info()), **extra}


def write_campaign(campaign: Campaign) -> Path:
    cfg = campaign.config
    if not cfg.output_dir:
        raise CampaignError("no output directory configured")
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        echo = cfg.to_dict()
        with open(out / "runs.jsonl", "w", encoding="utf-8") as fh:
            for o in campaign.outcomes:
                fh.write(_dump({**o.record(cfg), "config": echo, "rng": rng_info()}) + "\n")
        doc = {"config": echo, "rng": rng_info(), "summary": campaign.summary.as_dict()}
        (out / "summary.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                                          encoding="utf-8")
        if cfg.write_series:
            (out / "series").mkdir(exist_ok=True)
            for o in campaign.outcomes:
                prov = provenance(cfg, run=o.run_index, engine_seed=o.engine_seed,
                                  graph_seed=o.graph_seed)
                o.metrics.write_series_csv(out / "series" / f"run_{o.run_index:04d}.csv", prov)
    except OSError as exc:
        raise CampaignError(f"cannot write campaign output to {out}: {exc}") from exc
    return out


# -- sweeps --------------------------------------------------------------------

@dataclass
class SweepResult:
    cells: list[tuple[dict, Campaign | None, str | None]]
    keys: list[str]

    def table(self) -> list[dict]:
        rows = []
        for params, camp, err in self.cells:
            row = dict(params)
            if camp is None:
                row["error"] = err
            else:
                row["runs"] = camp.summary.runs
                row["failures"] = camp.summary.failures
                for k, st in camp.summary.stats.items():
                    row[f"{k}_mean"] = st.mean
                    row[f"{k}_std"] = st.std
                    row[f"{k}_median"] = st.median
                    row[f"{k}_q1"] = st.q1
                    row[f"{k}_q3"] = st.q3
                    row[f"{k}_undefined"] = st.undefined
                row["error"] = ""
            rows.append(row)
        return rows

    def relative_fht_rows(self) -> list[dict]:
        """Every run of every cell with its FHT relative to the best run at the
        same problem size across the sweep."""
        flat = []
        for params, camp, _ in self.cells:
            if camp is None:
                continue
            for o in camp.outcomes:
                flat.append((params, o))
        rel = relative_fht([o.metrics for _, o in flat])
        rows = []
        for (params, o), r in zip(flat, rel):
            rows.append({**params, "run": o.run_index, "b": o.metrics.problem.b,
                         "fht": o.metrics.fht, "relative_fht": r,
                         "max_distinct_optima": o.metrics.max_distinct_optima})
        return rows


def sweep(cells: Sequence[tuple[dict, ExperimentConfig]], output_dir=None) -> SweepResult:
    """Run each cell's campaign; failures are recorded and the sweep goes on."""
    if not cells:
        raise ConfigError("empty sweep grid")
    keys = list(cells[0][0])
    done = []
    for params, cfg in cells:
        try:
            done.append((params, run_campaign(cfg), None))
        except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
            done.append((params, None, f"{type(exc).__name__}: {exc}"))
    result = SweepResult(done, keys)
    if output_dir is not None:
        write_sweep(result, output_dir, cells[0][1])
    return result


def _write_rows(path: Path, rows: list[dict], comments: dict) -> None:
    import csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in comments.items():
            fh.write(f"# {k}: {v}\n")
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})


def write_sweep(result: SweepResult, output_dir, base: ExperimentConfig) -> Path:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance(base, swept=_dump(result.keys))
    _write_rows(out / "sweep.csv", result.table(), prov)
    _write_rows(out / "relative_fht.csv", result.relative_fht_rows(), prov)
    return out


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` with top-level or ``topology_<field>`` changes."""
    topo_changes = {k[len("topology_"):]: v for k, v in changes.items() if k.startswith("topology_")}
    rest = {k: v for k, v in changes.items() if not k.startswith("topology_")}
    new = replace(cfg, **rest)
    if topo_changes:
        new.topology = replace(cfg.topology, **topo_changes)
    return new
