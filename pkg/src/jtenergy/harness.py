"""Scenario configuration, seeded experiment runs, aggregation and result files."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import __version__, kernels
from .coupling import SolverError, SolverOptions, energy, fixed_point_load, is_feasible
from .model import (RNG_ALGORITHM, InvalidInstanceError, PathLossModel, PhysicalConstants,
                    TopologySpec, generate_instance, initial_association)
from .optimizer import (AoloOptions, InfeasibleDemandError, PoloOptions, RoundCapExceeded,
                        SolveStats, aolo, nonjt_fullload_power, palo, polo)

log = logging.getLogger(__name__)

ALGORITHMS = ("nonjt", "aolo", "palo", "polo_fixed")
#: Extra reference row emitted alongside ``polo_fixed``: the fixed-power energy before POLO.
FIXED = "fixed"
NO_CASE = "-"

OK = "ok"
INFEASIBLE = "infeasible"
DIVERGED = "diverged"
ERROR = "error"

CSV_COLUMNS = ("seed", "demand_bps", "algo", "case", "energy", "max_load", "jt_links",
               "fp_solves", "wall_ms", "status")


class ConfigError(ValueError):
    """Invalid scenario configuration.  ``field`` is the dotted config path at fault."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologySpec = field(default_factory=TopologySpec)
    physical: PhysicalConstants = field(default_factory=PhysicalConstants)
    demands_bps: Tuple[float, ...] = (60e3, 120e3, 180e3, 240e3, 300e3, 360e3)
    seeds: Tuple[int, ...] = tuple(range(1, 16))
    algorithms: Tuple[str, ...] = ("nonjt", "aolo", "palo", "polo_fixed")
    fixed_power_cases_mw: Tuple[Tuple[float, float], ...] = ((160.0, 40.0), (120.0, 30.0))
    solver: SolverOptions = field(default_factory=SolverOptions)
    polo: PoloOptions = field(default_factory=PoloOptions)
    aolo: AoloOptions = field(default_factory=AoloOptions)
    threads: int = 1
    record_timing: bool = False

    def __post_init__(self):
        if not self.demands_bps:
            raise ConfigError("experiment.demands_bps", "must be a non-empty list")
        for d in self.demands_bps:
            if not (isinstance(d, (int, float)) and math.isfinite(d) and d > 0):
                raise ConfigError("experiment.demands_bps", f"demand {d!r} must be > 0")
        if not self.seeds:
            raise ConfigError("experiment.seeds", "must be a non-empty list")
        for s in self.seeds:
            if not isinstance(s, int) or s < 0 or s >= 2 ** 64:
                raise ConfigError("experiment.seeds", f"seed {s!r} must be a 64-bit unsigned integer")
        if not self.algorithms:
            raise ConfigError("experiment.algorithms", "must name at least one algorithm")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError("experiment.algorithms", f"unknown algorithm {a!r}")
        for case in self.fixed_power_cases_mw:
            if len(case) != 2 or not all(v > 0 for v in case):
                raise ConfigError("experiment.fixed_power_cases_mw",
                                  f"case {case!r} must be a positive (macro, small) pair")
        if self.threads < 1:
            raise ConfigError("experiment.threads", "must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    demand_bps: float
    algo: str
    case: str = NO_CASE
    energy: Optional[float] = None
    max_load: Optional[float] = None
    jt_links: Optional[int] = None
    fp_solves: Optional[int] = None
    wall_ms: Optional[float] = None
    status: str = OK

    def sort_key(self):
        return (self.seed, self.demand_bps, self.algo, self.case)


# -- configuration files ----------------------------------------------------

_SECTIONS = {
    "topology": TopologySpec,
    "physical": PhysicalConstants,
    "pathloss": PathLossModel,
    "solver": SolverOptions,
}


def _build(cls, section: str, data, skip=()):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(section, "must be a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names or key in skip:
            raise ConfigError(f"{section}.{key}", "unknown field")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        # map constructor messages "section.field must ..." back to the field
        msg = str(exc)
        fld = msg.split(" ", 1)[0] if "." in msg.split(" ", 1)[0] else section
        raise ConfigError(fld, msg) from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from the nested mapping of a config file.

    Sections: ``topology``, ``physical``, ``pathloss``, ``experiment``,
    ``solver``, ``polo``, ``aolo``.  Every field is optional.
    """
    data = dict(data or {})
    known = {"topology", "physical", "pathloss", "experiment", "solver", "polo", "aolo"}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown section")
    topology = _build(TopologySpec, "topology", data.get("topology"), skip=("rng_seed",))
    pathloss = _build(PathLossModel, "pathloss", data.get("pathloss"))
    phys_data = dict(data.get("physical") or {})
    if "pathloss" in phys_data:
        raise ConfigError("physical.pathloss", "use the top-level pathloss section")
    physical = _build(PhysicalConstants, "physical", phys_data)
    physical = replace(physical, pathloss=pathloss)
    solver = _build(SolverOptions, "solver", data.get("solver"))

    polo_data = dict(data.get("polo") or {})
    for key in polo_data:
        if key != "epsilon":
            raise ConfigError(f"polo.{key}", "unknown field")
    aolo_data = dict(data.get("aolo") or {})
    for key in aolo_data:
        if key not in ("tau", "candidate_order"):
            raise ConfigError(f"aolo.{key}", "unknown field")
    try:
        polo_opts = PoloOptions(solver=solver, **polo_data)
    except ValueError as exc:
        raise ConfigError("polo.epsilon", str(exc)) from exc
    try:
        aolo_opts = AoloOptions(solver=solver, **aolo_data)
    except ValueError as exc:
        fld = "aolo.tau" if "tau" in str(exc) else "aolo.candidate_order"
        raise ConfigError(fld, str(exc)) from exc

    exp = dict(data.get("experiment") or {})
    exp_fields = {"demands_bps", "seeds", "algorithms", "fixed_power_cases_mw", "threads",
                  "record_timing"}
    for key in exp:
        if key not in exp_fields:
            raise ConfigError(f"experiment.{key}", "unknown field")
    kwargs = {}
    if "demands_bps" in exp:
        kwargs["demands_bps"] = tuple(float(d) if isinstance(d, (int, float)) else d
                                      for d in exp["demands_bps"] or ())
    if "seeds" in exp:
        kwargs["seeds"] = tuple(exp["seeds"] or ())
    if "algorithms" in exp:
        kwargs["algorithms"] = tuple(exp["algorithms"] or ())
    if "fixed_power_cases_mw" in exp:
        kwargs["fixed_power_cases_mw"] = tuple(tuple(float(v) for v in c)
                                               for c in exp["fixed_power_cases_mw"] or ())
    for key in ("threads", "record_timing"):
        if key in exp:
            kwargs[key] = exp[key]
    return ScenarioConfig(topology=topology, physical=physical, solver=solver,
                          polo=polo_opts, aolo=aolo_opts, **kwargs)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`config_from_dict`: the fully resolved nested mapping."""
    topo = dataclasses.asdict(cfg.topology)
    topo.pop("rng_seed")
    phys = dataclasses.asdict(cfg.physical)
    phys.pop("pathloss")
    return {
        "topology": topo,
        "physical": phys,
        "pathloss": dataclasses.asdict(cfg.physical.pathloss),
        "experiment": {
            "demands_bps": list(cfg.demands_bps),
            "seeds": list(cfg.seeds),
            "algorithms": list(cfg.algorithms),
            "fixed_power_cases_mw": [list(c) for c in cfg.fixed_power_cases_mw],
            "threads": cfg.threads,
            "record_timing": cfg.record_timing,
        },
        "solver": dataclasses.asdict(cfg.solver),
        "polo": {"epsilon": cfg.polo.epsilon},
        "aolo": {"tau": cfg.aolo.tau, "candidate_order": cfg.aolo.candidate_order},
    }


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return config_from_dict(data or {})


# -- experiment execution ---------------------------------------------------

def _case_name(case) -> str:
    return f"{case[0]:g}/{case[1]:g}"


def _status_of(exc: Exception) -> str:
    if isinstance(exc, InfeasibleDemandError):
        return INFEASIBLE
    if isinstance(exc, SolverError) and exc.report.status == "diverged":
        return DIVERGED
    return ERROR


def run_cell(cfg: ScenarioConfig, seed: int, demand: float) -> List[RunRecord]:
    """All requested algorithms for one (seed, demand) pair."""
    spec = replace(cfg.topology, rng_seed=seed)
    inst = generate_instance(spec, cfg.physical, demand)
    a0 = initial_association(inst)
    algos = set(cfg.algorithms)
    records: List[RunRecord] = []
    timing = cfg.record_timing

    def rec(algo, case=NO_CASE, t0=None, **kw):
        wall = (time.perf_counter() - t0) * 1e3 if (timing and t0 is not None) else None
        records.append(RunRecord(seed=seed, demand_bps=demand, algo=algo, case=case,
                                 wall_ms=wall, **kw))

    t0 = time.perf_counter()
    base_status = OK
    try:
        p0, x0 = nonjt_fullload_power(inst, a0, cfg.solver)
    except (InfeasibleDemandError, SolverError) as exc:
        log.info("seed %d demand %g: non-JT baseline %s", seed, demand, exc)
        base_status, p0, x0 = _status_of(exc), None, None
    if "nonjt" in algos:
        if base_status == OK:
            rec("nonjt", t0=t0, energy=energy(p0, x0), max_load=float(x0.max()),
                jt_links=a0.jt_links, fp_solves=1)
        else:
            rec("nonjt", t0=t0, status=base_status)

    if "aolo" in algos:
        t0 = time.perf_counter()
        if base_status != OK:
            rec("aolo", t0=t0, status=base_status)
        else:
            stats = SolveStats()
            try:
                a1, x1 = aolo(inst, a0, p0, x0, cfg.aolo, stats)
                rec("aolo", t0=t0, energy=energy(p0, x1), max_load=float(x1.max()),
                    jt_links=a1.jt_links, fp_solves=stats.fixed_point_solves)
            except (SolverError, ValueError) as exc:
                log.warning("seed %d demand %g: AOLO failed: %s", seed, demand, exc)
                rec("aolo", t0=t0, status=_status_of(exc))

    palo_assoc, palo_status = None, base_status
    if "palo" in algos or "polo_fixed" in algos:
        t0 = time.perf_counter()
        if base_status == OK:
            try:
                p2, palo_assoc, x2, trace = palo(inst, a0, p0, x0, cfg.polo, cfg.aolo)
                if "palo" in algos:
                    rec("palo", t0=t0, energy=energy(p2, x2), max_load=float(x2.max()),
                        jt_links=palo_assoc.jt_links, fp_solves=trace.fixed_point_solves)
            except (SolverError, RoundCapExceeded, ValueError) as exc:
                log.warning("seed %d demand %g: PALO failed: %s", seed, demand, exc)
                palo_status = _status_of(exc)
        if palo_assoc is None and "palo" in algos:
            rec("palo", t0=t0, status=palo_status)

    if "polo_fixed" in algos:
        for case in cfg.fixed_power_cases_mw:
            name = _case_name(case)
            t0 = time.perf_counter()
            if palo_assoc is None:
                rec(FIXED, name, t0=t0, status=palo_status)
                rec("polo_fixed", name, t0=t0, status=palo_status)
                continue
            p = inst.power_by_kind(case[0] * 1e-3, case[1] * 1e-3)
            rep = fixed_point_load(inst, palo_assoc, p, None, cfg.solver)
            if not rep.converged or not is_feasible(rep.load):
                # unbounded loads at this power mean the demand cannot be carried
                status = ERROR if rep.status == "iteration-cap" else INFEASIBLE
                rec(FIXED, name, t0=t0, status=status)
                rec("polo_fixed", name, t0=t0, status=status)
                continue
            rec(FIXED, name, t0=t0, energy=energy(p, rep.load), max_load=float(rep.load.max()),
                jt_links=palo_assoc.jt_links, fp_solves=1)
            t0 = time.perf_counter()
            stats = SolveStats()
            try:
                p3, x3 = polo(inst, palo_assoc, p, rep.load, cfg.polo, stats)
                rec("polo_fixed", name, t0=t0, energy=energy(p3, x3), max_load=float(x3.max()),
                    jt_links=palo_assoc.jt_links, fp_solves=1 + stats.fixed_point_solves)
            except (SolverError, ValueError) as exc:
                log.warning("seed %d demand %g: POLO (%s) failed: %s", seed, demand, name, exc)
                rec("polo_fixed", name, t0=t0, status=_status_of(exc))
    return records


def _run_cell_safe(args):
    cfg, seed, demand = args
    try:
        return run_cell(cfg, seed, demand)
    except Exception as exc:  # one failing cell must not abort the sweep
        log.error("seed %d demand %g: %s", seed, demand, exc)
        return [RunRecord(seed=seed, demand_bps=demand, algo=a, status=ERROR)
                for a in cfg.algorithms]


def run_scenario(cfg: ScenarioConfig) -> List[RunRecord]:
    """Run every (seed, demand) cell and return records sorted by (seed, demand, algo, case)."""
    cells = [(cfg, s, float(d)) for s in cfg.seeds for d in cfg.demands_bps]
    records: List[RunRecord] = []
    if cfg.threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for recs in pool.map(_run_cell_safe, cells):
                records.extend(recs)
    else:
        for c in cells:
            records.extend(_run_cell_safe(c))
    records.sort(key=RunRecord.sort_key)
    return records


# -- aggregation and persistence --------------------------------------------

def _mean(values):
    return float(np.mean(values)) if values else None


def aggregate(records: Sequence[RunRecord]) -> List[dict]:
    """Seed-averaged summary rows per (demand, algorithm, case).

    Percent reductions are computed per seed against the same seed's
    ``nonjt`` energy (and, for ``polo_fixed``, the same case's ``fixed``
    energy) and then averaged over the seeds where both runs are ok.
    """
    groups: Dict[tuple, List[RunRecord]] = {}
    index = {}
    for r in records:
        groups.setdefault((r.demand_bps, r.algo, r.case), []).append(r)
        index[(r.seed, r.demand_bps, r.algo, r.case)] = r
    rows = []
    for (demand, algo, case), recs in sorted(groups.items()):
        ok = [r for r in recs if r.status == OK]
        red_nonjt, red_fixed = [], []
        for r in ok:
            base = index.get((r.seed, demand, "nonjt", NO_CASE))
            if base is not None and base.status == OK and base.energy > 0:
                red_nonjt.append(100.0 * (base.energy - r.energy) / base.energy)
            if algo == "polo_fixed":
                ref = index.get((r.seed, demand, FIXED, case))
                if ref is not None and ref.status == OK and ref.energy > 0:
                    red_fixed.append(100.0 * (ref.energy - r.energy) / ref.energy)
        rows.append({
            "demand_bps": demand,
            "algo": algo,
            "case": case,
            "runs": len(recs),
            "ok": len(ok),
            "infeasible": sum(r.status == INFEASIBLE for r in recs),
            "failed": sum(r.status in (ERROR, DIVERGED) for r in recs),
            "mean_energy": _mean([r.energy for r in ok]),
            "mean_reduction_vs_nonjt_pct": _mean(red_nonjt),
            "mean_reduction_vs_fixed_pct": _mean(red_fixed) if algo == "polo_fixed" else None,
            "mean_jt_links": _mean([r.jt_links for r in ok]),
        })
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_records_csv(path) -> List[RunRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            def num(key, conv=float):
                return conv(row[key]) if row[key] != "" else None
            out.append(RunRecord(seed=int(row["seed"]), demand_bps=float(row["demand_bps"]),
                                 algo=row["algo"], case=row["case"], energy=num("energy"),
                                 max_load=num("max_load"), jt_links=num("jt_links", int),
                                 fp_solves=num("fp_solves", int), wall_ms=num("wall_ms"),
                                 status=row["status"]))
    return out


def write_results(records: Sequence[RunRecord], summary: Sequence[dict], outdir,
                  cfg: Optional[ScenarioConfig] = None) -> Dict[str, str]:
    """Write ``records.csv``, ``summary.json``, ``summary.csv`` and ``metadata.json``.

    Returns the mapping of file role to written path.
    """
    paths = {
        "records": os.path.join(outdir, "records.csv"),
        "summary": os.path.join(outdir, "summary.json"),
        "summary_table": os.path.join(outdir, "summary.csv"),
        "metadata": os.path.join(outdir, "metadata.json"),
    }
    meta = {
        "package": "jtenergy",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "rng": RNG_ALGORITHM,
        "csv_columns": list(CSV_COLUMNS),
        "config": config_to_dict(cfg) if cfg is not None else None,
    }
    summary_cols = ["demand_bps", "algo", "case", "runs", "ok", "infeasible", "failed",
                    "mean_energy", "mean_reduction_vs_nonjt_pct",
                    "mean_reduction_vs_fixed_pct", "mean_jt_links"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(summary_cols)
    for row in summary:
        w.writerow([_fmt(row[c]) for c in summary_cols])
    contents = {
        "records": records_to_csv(records),
        "summary": json.dumps({"rows": list(summary)}, indent=2, sort_keys=True) + "\n",
        "summary_table": buf.getvalue(),
        "metadata": json.dumps(meta, indent=2, sort_keys=True) + "\n",
    }
    try:
        os.makedirs(outdir, exist_ok=True)
        for role, path in paths.items():
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(contents[role])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results: {exc.strerror}",
                      exc.filename or outdir) from exc
    return paths
