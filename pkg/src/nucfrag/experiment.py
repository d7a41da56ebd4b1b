"""Replication sweeps: configuration, parallel execution and serialization.

A sweep runs ``replications`` trajectories for every ``N`` in ``N_list``.
Replication ``r`` at the ``i``-th system size is seeded with
``replication_seed(master_seed, i, r)``, so the output depends only on the
configuration and never on how work is spread over processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import analysis
from .errors import ConfigurationError, InsufficientData
from .fragmentation import FragmentationSpec
from .model import ModelParams, ScalingFunction, psi, rho_bar
from .seeding import replication_seed
from .simulator import (
    DEFAULT_EVENT_BUDGET,
    InitialCondition,
    ObserverSet,
    SimulationMode,
    StopRule,
    delta_k,
    run,
)

SUMMARY_FIELDS = analysis.ReplicationSummary.FIELDS
VALIDATION_TESTS = ("ks_exponential", "mean_T", "cv_T", "poisson_stream", "lag_scaling", "balance_decay")


# ---------------------------------------------------------------- config


def _take(d: Mapping, key: str, path: str, default=Ellipsis):
    if key in d:
        return d[key]
    if default is Ellipsis:
        raise ConfigurationError("missing required field", f"{path}.{key}" if path else key)
    return default


def _check_keys(d: Mapping, allowed, path: str):
    if not isinstance(d, Mapping):
        raise ConfigurationError("expected an object", path)
    for k in d:
        # keys starting with "_" are free-form annotations
        if not k.startswith("_") and k not in allowed:
            raise ConfigurationError("unknown field", f"{path}.{k}" if path else k)


def _wrap(path: str, fn, *args):
    """Call ``fn`` and prefix any configuration error with ``path``."""
    try:
        return fn(*args)
    except ConfigurationError as e:
        inner = e.field
        raise ConfigurationError(str(e).split(": ", 1)[-1], f"{path}.{inner}" if inner else path) from None
    except (TypeError, ValueError) as e:
        raise ConfigurationError(str(e), path) from None


def model_from_dict(d: Mapping) -> ModelParams:
    _check_keys(d, {"n_c", "lambda", "mu", "phi", "fragmentation", "k_max_tracked"}, "model")
    phi_d = _take(d, "phi", "model", {"kind": "power", "gamma": 1.0})
    _check_keys(phi_d, {"kind", "gamma", "table", "k_c"}, "model.phi")
    if phi_d.get("kind", "power") == "power":
        phi = _wrap("model.phi", ScalingFunction.power, phi_d.get("gamma", 1.0))
    else:
        table = {int(k): float(v) for k, v in (phi_d.get("table") or {}).items()}
        phi = _wrap("model.phi", ScalingFunction.from_table, table, phi_d.get("k_c"))
    frag = d.get("fragmentation", "UF")
    if isinstance(frag, str):
        frag = _wrap("model", FragmentationSpec.parse, frag)
    else:
        frag = _wrap("model", FragmentationSpec.from_dict, frag)
    return _wrap(
        "model", ModelParams,
        _take(d, "n_c", "model"), tuple(_take(d, "lambda", "model")), tuple(_take(d, "mu", "model")),
        phi, frag, d.get("k_max_tracked"),
    )


@dataclass
class ExperimentConfig:
    model: ModelParams
    N_list: list[int]
    replications: int = 1
    mode: SimulationMode = SimulationMode.FULL
    stop: StopRule = field(default_factory=StopRule.first_nucleation)
    delta: float = 0.1
    init: InitialCondition = field(default_factory=InitialCondition.pure_monomers)
    observers: ObserverSet = field(default_factory=ObserverSet)
    master_seed: int = 0
    worker_count: int = 1
    output: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)

    TOP_KEYS = {
        "model", "N_list", "replications", "mode", "stop", "delta", "init",
        "observers", "master_seed", "worker_count", "output", "validate",
    }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        _check_keys(d, cls.TOP_KEYS, "")
        model = model_from_dict(_take(d, "model", ""))
        N_list = _take(d, "N_list", "")
        if not isinstance(N_list, list) or not N_list:
            raise ConfigurationError("must be a non-empty list of integers", "N_list")
        if any(not isinstance(n, int) or isinstance(n, bool) for n in N_list):
            raise ConfigurationError("entries must be integers", "N_list")
        if any(b <= a for a, b in zip(N_list, N_list[1:])):
            raise ConfigurationError("must be strictly increasing", "N_list")
        if N_list[0] < model.n_c:
            raise ConfigurationError(f"entries must be >= n_c = {model.n_c}", "N_list")
        reps = d.get("replications", 1)
        if not isinstance(reps, int) or reps < 1:
            raise ConfigurationError("must be an integer >= 1", "replications")
        delta = d.get("delta", 0.1)
        if not isinstance(delta, (int, float)) or not (0.0 < delta < 1.0):
            raise ConfigurationError(f"must lie in (0, 1), got {delta}", "delta")
        try:
            mode = SimulationMode(d.get("mode", "full"))
        except ValueError:
            raise ConfigurationError(f"must be 'full' or 'truncated', got {d.get('mode')!r}", "mode") from None
        stop_d = d.get("stop", {"kind": "first_nucleation"})
        _check_keys(stop_d, {"kind", "value", "max_rescaled_time"}, "stop")
        stop = _wrap("stop", StopRule, stop_d.get("kind"), stop_d.get("value"), stop_d.get("max_rescaled_time"))
        init_d = d.get("init", {"kind": "pure_monomers"})
        _check_keys(init_d, {"kind", "counts"}, "init")
        if init_d.get("kind", "pure_monomers") == "pure_monomers":
            init = InitialCondition.pure_monomers()
        elif init_d.get("kind") == "seeded":
            init = _wrap("init", InitialCondition.seeded_counts, init_d.get("counts") or {})
        else:
            raise ConfigurationError(f"unknown initial condition {init_d.get('kind')!r}", "init.kind")
        obs_d = d.get("observers", {})
        _check_keys(obs_d, {"curve_points", "curve_horizon", "levels", "balance", "check_mass", "event_budget"}, "observers")
        observers = _wrap(
            "observers", ObserverSet,
            float(delta),
            int(obs_d.get("curve_points", 0)),
            float(obs_d.get("curve_horizon", 1.0)),
            bool(obs_d.get("levels", False)),
            bool(obs_d.get("balance", False)),
            int(obs_d.get("check_mass", 1)),
            0,
            int(obs_d.get("event_budget", DEFAULT_EVENT_BUDGET)),
        )
        seed = d.get("master_seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigurationError("must be a non-negative integer", "master_seed")
        workers = d.get("worker_count", 1)
        if not isinstance(workers, int) or workers < 1:
            raise ConfigurationError("must be an integer >= 1", "worker_count")
        out = d.get("output", {})
        _check_keys(out, {"dir", "summary", "curves", "report"}, "output")
        val = d.get("validate", {})
        _check_keys(val, {"tests", "alpha", "poisson", "balance", "bonferroni"}, "validate")
        for t in val.get("tests", []):
            if t not in VALIDATION_TESTS:
                raise ConfigurationError(f"unknown test {t!r}", "validate.tests")
        for N in N_list:
            _wrap("init", init.validate, model, N)
        return cls(model, list(N_list), reps, mode, stop, float(delta), init, observers, seed, workers, dict(out), dict(val))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", "config") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "N_list": self.N_list,
            "replications": self.replications,
            "mode": self.mode.value,
            "stop": {"kind": self.stop.kind, "value": self.stop.value, "max_rescaled_time": self.stop.max_rescaled_time},
            "delta": self.delta,
            "master_seed": self.master_seed,
            "worker_count": self.worker_count,
        }

    def output_dir(self, override=None) -> Path:
        return Path(override or self.output.get("dir", "."))


# ---------------------------------------------------------------- sweep


@dataclass
class ReplicationResult:
    summary: analysis.ReplicationSummary
    curve: np.ndarray | None = None
    nucleation_times: np.ndarray | None = None
    delta_1: float | None = None
    mass_violations: int = 0


def _run_one(task) -> ReplicationResult:
    cfg, n_idx, rep = task
    N = cfg.N_list[n_idx]
    seed = replication_seed(cfg.master_seed, n_idx, rep)
    rec = run(cfg.model, N, cfg.mode, cfg.init, cfg.stop, cfg.observers, seed)
    res = ReplicationResult(analysis.summarize(rec, cfg.model, rep), mass_violations=rec.mass_violations)
    if cfg.observers.curve_points > 0 or cfg.observers.levels:
        res.curve = rec.mass_curve
    if cfg.mode is SimulationMode.TRUNCATED:
        res.nucleation_times = rec.nucleation_event_times
    if cfg.observers.balance and cfg.model.n_c >= 3:
        res.delta_1 = delta_k(rec, cfg.model, N, 1)
    return res


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[ReplicationResult]:
    """Run every (N, replication) task; results sorted by (N, replication_id)."""
    tasks = [(cfg, i, r) for i in range(len(cfg.N_list)) for r in range(cfg.replications)]
    workers = workers or cfg.worker_count
    if workers <= 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    results.sort(key=lambda r: (r.summary.N, r.summary.replication_id))
    return results


# ---------------------------------------------------------------- CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def summaries_csv(summaries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for s in summaries:
        w.writerow([_fmt(getattr(s, f)) for f in SUMMARY_FIELDS])
    return buf.getvalue()


def write_summaries(path, summaries) -> None:
    Path(path).write_text(summaries_csv(summaries))


def _parse_value(field_name: str, text: str):
    if text == "":
        return None
    if field_name in ("replication_id", "seed", "N", "event_count"):
        return int(text)
    if field_name == "truncated":
        return text == "true"
    return float(text)


def read_summaries(path) -> list[analysis.ReplicationSummary]:
    """Inverse of ``write_summaries``. Raises ``FileNotFoundError`` or ``InsufficientData``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InsufficientData(f"{path} holds no summary rows")
    missing = set(SUMMARY_FIELDS) - set(rows[0])
    if missing:
        raise InsufficientData(f"{path} lacks columns {sorted(missing)}")
    return [analysis.ReplicationSummary(**{f: _parse_value(f, r[f]) for f in SUMMARY_FIELDS}) for r in rows]


def write_curve(path, curve: np.ndarray) -> None:
    lines = ["t,stable_mass,polymerized_mass"]
    lines += [",".join(format(float(x), ".17g") for x in row) for row in curve]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- validation


@dataclass
class TestRecord:
    name: str
    statistic: float | None
    threshold: Any
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "statistic": self.statistic, "threshold": self.threshold, "pass": self.passed, "detail": self.detail},
            sort_keys=True,
            default=float,
        )


def _subconfig(cfg: ExperimentConfig, section: Mapping, mode, stop, balance=False) -> ExperimentConfig:
    N_list = list(section.get("N_list", cfg.N_list))
    obs = ObserverSet(delta=cfg.delta, balance=balance, check_mass=cfg.observers.check_mass, event_budget=cfg.observers.event_budget)
    return ExperimentConfig(
        cfg.model, N_list, int(section.get("replications", cfg.replications)), mode, stop, cfg.delta, cfg.init,
        obs, cfg.master_seed + int(section.get("seed_offset", 1)), cfg.worker_count,
    )


def validate(cfg: ExperimentConfig, summaries: list[analysis.ReplicationSummary]) -> list[TestRecord]:
    """Run the enabled limit-law tests; one record per test.

    The hypothesis tests (KS and Poisson stream) share the significance
    level ``alpha`` with a Bonferroni split unless ``bonferroni`` is false.
    """
    v = cfg.validate
    tests = list(v.get("tests", VALIDATION_TESTS))
    alpha = float(v.get("alpha", 0.05))
    n_hyp = sum(t in ("ks_exponential", "poisson_stream") for t in tests)
    a_eff = alpha / n_hyp if (v.get("bonferroni", True) and n_hyp > 1) else alpha
    rate = rho_bar(cfg.model)
    by_N: dict[int, list] = {}
    for s in summaries:
        by_N.setdefault(s.N, []).append(s)
    Nmax = max(by_N)
    T = analysis._finite(s.T_scaled for s in by_N[Nmax])
    out = []
    for name in tests:
        try:
            out.append(_one_test(name, cfg, by_N, Nmax, T, rate, a_eff))
        except InsufficientData as e:
            out.append(TestRecord(name, None, None, False, {"error": str(e)}))
    return out


def _one_test(name, cfg, by_N, Nmax, T, rate, a_eff) -> TestRecord:
    v = cfg.validate
    if name == "ks_exponential":
        r = analysis.ks_exponential(T, rate, a_eff)
        per_N = {}
        for N, ss in sorted(by_N.items()):
            x = analysis._finite(s.T_scaled for s in ss)
            if x.size >= analysis.MIN_KS_SAMPLES:
                per_N[str(N)] = analysis.ks_exponential(x, rate, a_eff).statistic
        return TestRecord(name, r.statistic, r.critical, r.passed, {"N": Nmax, "n": r.n, "pvalue": r.pvalue, "per_N": per_N})
    if name == "mean_T":
        if T.size < 2:
            raise InsufficientData("mean_T needs at least 2 nucleation times")
        m = float(T.mean() * rate)
        return TestRecord(name, m, [0.85, 1.15], 0.85 <= m <= 1.15, {"N": Nmax, "n": int(T.size)})
    if name == "cv_T":
        c = analysis.cv(T)
        return TestRecord(name, c, [0.85, 1.15], 0.85 <= c <= 1.15, {"N": Nmax, "n": int(T.size)})
    if name == "lag_scaling":
        rep = analysis.lag_scaling_report(by_N)
        Ns = sorted(by_N)
        worst = min(rep.retained.values())
        s0, s1 = rep.median_explosion_span[Ns[0]], rep.median_explosion_span[Ns[-1]]
        span_ok = s0 is not None and s1 is not None and s1 <= 1.5 * s0
        detail = {k: {str(n): x for n, x in d.items()} if isinstance(d, dict) else d for k, d in rep.to_dict().items()}
        return TestRecord(name, worst, 0.9, bool(worst >= 0.9 and span_ok), detail)
    if name == "poisson_stream":
        p = v.get("poisson", {})
        horizon = float(p.get("horizon", 3.0))
        sub = _subconfig(cfg, p, SimulationMode.TRUNCATED, StopRule.rescaled_horizon(horizon))
        sub.N_list = [int(p.get("N", sub.N_list[-1]))]
        res = run_sweep(sub)
        scale = psi(cfg.model, sub.N_list[0])
        streams = [r.nucleation_times / scale for r in res]
        r = analysis.poisson_stream_test(streams, rate, horizon, a_eff)
        ok = r.ks.passed and 0.8 <= r.dispersion <= 1.2
        return TestRecord(
            name, r.dispersion, [0.8, 1.2], bool(ok),
            {"N": sub.N_list[0], "ks_statistic": r.ks.statistic, "ks_critical": r.ks.critical, "events": r.n_events},
        )
    if name == "balance_decay":
        b = v.get("balance", {})
        sub = _subconfig(cfg, b, SimulationMode.TRUNCATED, StopRule.rescaled_horizon(float(b.get("horizon", 1.0))), balance=True)
        res = run_sweep(sub)
        deltas: dict[int, list] = {}
        for r in res:
            deltas.setdefault(r.summary.N, []).append(r.delta_1)
        if len(deltas) < 2:
            raise InsufficientData("balance decay needs at least two system sizes")
        d = analysis.balance_decay(deltas)
        Ns = sorted(d.medians)
        return TestRecord(name, d.medians[Ns[-1]], "strictly decreasing", d.strictly_decreasing, {"medians": {str(k): x for k, x in d.medians.items()}})
    raise ConfigurationError(f"unknown test {name!r}", "validate.tests")


def format_table(records: list[TestRecord]) -> str:
    lines = [f"{'test':<16} {'statistic':>14} {'threshold':>22}  result"]
    for r in records:
        stat = "-" if r.statistic is None else f"{r.statistic:.6g}"
        lines.append(f"{r.name:<16} {stat:>14} {str(r.threshold):>22}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
