"""Experiment orchestration: configs, Monte-Carlo loops, sweeps, reports.

All randomness is derived from (master seed, trial index, role), so runs are
reproducible and independent of worker count. Trial outcomes are written as
full-precision CSV; aggregation is a single fold over the per-trial rows.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import decoder, detector, embedder, numerics, queuenet, traffic
from .codebook import generate_codebook
from .numerics import (
    DeskScale,
    InfeasibleScenarioError,
    PlannerInputs,
    QueueSpec,
    Scenario,
    ScenarioPlan,
)
from .seeding import derive_seed

SWEEP_COLUMNS = ["T", "m_planned", "pe_emp", "pf_emp", "decode_acc"]


class ConfigError(ValueError):
    """Malformed experiment configuration; message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: int
    epsilon: float
    zeta: float
    lam: float
    mu: tuple[float, ...]
    lambda_prime: tuple[float, ...]
    T: float | None = None
    m_target: int | None = None
    n_flows: int | None = None
    trials: int = 1000
    master_seed: int = 0
    desk_m: int | None = None
    desk_M: int | None = None
    desk_p: float | None = None
    rate_list: tuple[float, ...] | None = None
    decode: bool = True
    align: str = "tail"
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.scenario not in (1, 2):
            raise ConfigError("scenario: must be 1 or 2")
        if self.trials < 1:
            raise ConfigError("run.trials: must be >= 1")
        if self.T is None and self.m_target is None:
            raise ConfigError("planner.T: either T or m_target is required")
        if self.desk_m is not None and self.desk_m < 1:
            raise ConfigError("scenario2.m_cap: must be >= 1")

    @property
    def queue_specs(self) -> tuple[QueueSpec, ...]:
        return tuple(
            QueueSpec(mu=m, interference_rate=lp)
            for m, lp in zip(self.mu, self.lambda_prime)
        )

    def desk_scale(self) -> DeskScale | None:
        if self.desk_m is None:
            return None
        return DeskScale(m_cap=self.desk_m, M_cap=self.desk_M, p=self.desk_p)


def _as_tuple(value, n: int | None = None) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        out = (float(value),) * (n or 1)
    else:
        out = tuple(float(v) for v in value)
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a TOML experiment config (flat sections per module)."""
    try:
        doc = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    planner = doc.get("planner", {})
    queues = doc.get("queues", {})
    run = doc.get("run", {})
    s2 = doc.get("scenario2", {})
    rates = doc.get("rates", {})
    for section, required in [("planner", planner), ("queues", queues)]:
        if not required:
            raise ConfigError(f"{section}: section missing")
    try:
        epsilon = float(planner["epsilon"])
        zeta = float(planner["zeta"])
        lam = float(planner["lambda"])
    except KeyError as exc:
        raise ConfigError(f"planner.{exc.args[0]}: required field missing") from exc
    if "mu" not in queues:
        raise ConfigError("queues.mu: required field missing")
    n_flows = run.get("n_flows")
    mu = _as_tuple(queues["mu"], n_flows)
    lambda_prime = _as_tuple(queues.get("lambda_prime", 0.0), len(mu))
    if len(lambda_prime) != len(mu):
        raise ConfigError("queues.lambda_prime: length must match queues.mu")
    return ExperimentConfig(
        scenario=int(doc.get("scenario", 1)),
        epsilon=epsilon,
        zeta=zeta,
        lam=lam,
        mu=mu,
        lambda_prime=lambda_prime,
        T=planner.get("T"),
        m_target=planner.get("m_target"),
        n_flows=n_flows,
        trials=int(run.get("trials", 1000)),
        master_seed=int(run.get("master_seed", 0)),
        desk_m=s2.get("m_cap"),
        desk_M=s2.get("M_cap"),
        desk_p=s2.get("p"),
        rate_list=tuple(rates["lambdas"]) if "lambdas" in rates else None,
        decode=bool(run.get("decode", True)),
        align=str(run.get("align", "tail")),
        out_dir=run.get("out_dir"),
    )


def build_plan(config: ExperimentConfig) -> ScenarioPlan:
    T = config.T
    if T is None:
        T = numerics.horizon_for_flow_count(
            config.epsilon, config.zeta, config.lam, config.queue_specs, config.m_target
        )
    inputs = PlannerInputs(
        T=T,
        epsilon=config.epsilon,
        zeta=config.zeta,
        lam=config.lam,
        queue_specs=config.queue_specs,
    )
    if config.scenario == 1:
        return numerics.plan_scenario1(inputs)
    return numerics.plan_scenario2(inputs, desk=config.desk_scale())


def flows_to_simulate(config: ExperimentConfig, plan: ScenarioPlan) -> int:
    if config.n_flows is not None:
        return config.n_flows
    return plan.m


def queue_specs_for_flows(config: ExperimentConfig, n: int) -> tuple[QueueSpec, ...]:
    specs = config.queue_specs
    if len(specs) == 1:
        return specs * n
    if len(specs) != n:
        raise ConfigError("queues.mu: need one spec (or one shared spec) per flow")
    return specs


# ---------------------------------------------------------------------------
# Single trial
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    n_fingerprinted: int
    underruns: int
    exhausted: bool
    h0_decision: str
    h1_decision: str
    h0_statistic: float
    h1_statistic: float
    decode_correct: int
    decode_total: int
    permutation_correct: bool | None

    def to_row(self) -> list:
        return [
            self.trial,
            self.n_fingerprinted,
            self.underruns,
            int(self.exhausted),
            self.h0_decision,
            self.h1_decision,
            repr(self.h0_statistic),
            repr(self.h1_statistic),
            self.decode_correct,
            self.decode_total,
            "" if self.permutation_correct is None else int(self.permutation_correct),
        ]


TRIAL_COLUMNS = [
    "trial", "n_fingerprinted", "underruns", "exhausted",
    "h0_decision", "h1_decision", "h0_statistic", "h1_statistic",
    "decode_correct", "decode_total", "permutation_correct",
]


def run_trial(config: ExperimentConfig, plan: ScenarioPlan, trial: int) -> TrialOutcome:
    """One full pipeline pass: traffic, embed, detect, queue, decode."""
    seed = config.master_seed
    n = flows_to_simulate(config, plan)
    specs = queue_specs_for_flows(config, n)

    cb = generate_codebook(plan.M, plan.lam, plan.T2, derive_seed(seed, "trial", trial, "codebook"))
    if plan.scenario is Scenario.ALL_FLOWS:
        selected = np.ones(n, dtype=bool)
    else:
        selected = embedder.select_flows(n, plan.p, derive_seed(seed, "trial", trial))
    assignment = embedder.assign_fingerprints(selected, cb)

    flows = [
        traffic.gen_poisson_trace(
            plan.lam, plan.T, derive_seed(seed, "trial", trial, "flow", i, "h1"), flow_id=i
        )
        for i in range(n)
    ]
    results = [
        embedder.embed(
            flows[i],
            plan,
            cb[assignment.indices[i]] if assignment.indices[i] is not None else None,
            fingerprint_id=assignment.indices[i],
        )
        for i in range(n)
    ]
    underruns = sum(1 for r in results if r.failure_kind is embedder.FailureKind.BUFFER_UNDERRUN)

    h1_counts = np.array([r.output_trace.count_before(plan.T1) for r in results])
    h0_counts = np.array(
        [
            traffic.gen_poisson_trace(
                plan.lam, plan.T, derive_seed(seed, "trial", trial, "flow", i, "h0"), flow_id=i
            ).count_before(plan.T1)
            for i in range(n)
        ]
    )
    if plan.scenario is Scenario.ALL_FLOWS:
        v0 = detector.lrt_scenario1(h0_counts, plan.lam, plan.delta, plan.T1)
        v1 = detector.lrt_scenario1(h1_counts, plan.lam, plan.delta, plan.T1)
    else:
        v0 = detector.lrt_scenario2(h0_counts, plan.lam, plan.delta, plan.T1, plan.p)
        v1 = detector.lrt_scenario2(h1_counts, plan.lam, plan.delta, plan.T1, plan.p)

    decode_correct = 0
    decode_total = 0
    permutation_correct: bool | None = None
    if config.decode:
        outputs = queuenet.simulate_network(
            [r.output_trace for r in results], list(specs),
            derive_seed(seed, "trial", trial, "net"), plan.T,
        )
        mu_effs = [s.effective_rate for s in specs]
        dec = decoder.decode_network(
            outputs, cb, plan, assignment.indices, mu_effs, align=config.align
        )
        for i, (_, decoded, _) in enumerate(dec.per_flow):
            if assignment.indices[i] is not None and not results[i].failed:
                decode_total += 1
                decode_correct += int(decoded == assignment.indices[i])
        permutation_correct = dec.permutation_correct
    return TrialOutcome(
        trial=trial,
        n_fingerprinted=int(assignment.n_selected),
        underruns=underruns,
        exhausted=assignment.exhausted,
        h0_decision=v0.decision.value,
        h1_decision=v1.decision.value,
        h0_statistic=v0.statistic,
        h1_statistic=v1.statistic,
        decode_correct=decode_correct,
        decode_total=decode_total,
        permutation_correct=permutation_correct,
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateReport:
    trials: int
    pe_emp: float
    pe_ci_halfwidth: float
    p_fa: float
    p_md: float
    pf_underrun: float
    pf_underrun_ci_halfwidth: float
    pf_exhausted: float
    decode_accuracy: float | None
    permutation_rate: float | None
    pe_theory_bound: float
    zeta_target: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _binom_hw(p: float, n: int, z: float = 1.96) -> float:
    return z * math.sqrt(max(p * (1 - p), 1e-12) / n) if n else float("nan")


def aggregate(
    outcomes: list[TrialOutcome], plan: ScenarioPlan, config: ExperimentConfig
) -> AggregateReport:
    n = len(outcomes)
    p_fa = sum(o.h0_decision == "H1" for o in outcomes) / n
    p_md = sum(o.h1_decision == "H0" for o in outcomes) / n
    pe = (p_fa + p_md) / 2.0
    fingerprinted = sum(o.n_fingerprinted for o in outcomes)
    underruns = sum(o.underruns for o in outcomes)
    pf = underruns / fingerprinted if fingerprinted else 0.0
    totals = sum(o.decode_total for o in outcomes)
    acc = sum(o.decode_correct for o in outcomes) / totals if totals else None
    perms = [o.permutation_correct for o in outcomes if o.permutation_correct is not None]
    kl = numerics.poisson_kl_bound(plan.m, plan.p, plan.delta, plan.T1, plan.lam)
    return AggregateReport(
        trials=n,
        pe_emp=pe,
        pe_ci_halfwidth=_binom_hw(pe, n),
        p_fa=p_fa,
        p_md=p_md,
        pf_underrun=pf,
        pf_underrun_ci_halfwidth=_binom_hw(pf, max(fingerprinted, 1)),
        pf_exhausted=sum(o.exhausted for o in outcomes) / n,
        decode_accuracy=acc,
        permutation_rate=(sum(perms) / len(perms)) if perms else None,
        pe_theory_bound=detector.pinsker_bound(kl),
        zeta_target=config.zeta,
    )


def run_experiment(
    config: ExperimentConfig, workers: int = 1
) -> tuple[ScenarioPlan, list[TrialOutcome], AggregateReport]:
    plan = build_plan(config)
    indices = range(config.trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_star, [(config, plan, i) for i in indices],
                                     chunksize=64))
    else:
        outcomes = [run_trial(config, plan, i) for i in indices]
    outcomes.sort(key=lambda o: o.trial)
    report = aggregate(outcomes, plan, config)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trials_csv(outcomes, out / "trials.csv")
        (out / "plan.json").write_text(json.dumps(plan.to_dict(), indent=1))
        (out / "summary.json").write_text(json.dumps(report.to_dict(), indent=1))
    return plan, outcomes, report


def _trial_star(args) -> TrialOutcome:
    return run_trial(*args)


def write_trials_csv(outcomes: list[TrialOutcome], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_COLUMNS)
        for o in outcomes:
            writer.writerow(o.to_row())


# ---------------------------------------------------------------------------
# Fast experiment paths (sufficient-statistic level)
# ---------------------------------------------------------------------------

def willie_error_experiment(
    plan: ScenarioPlan, n_flows: int, trials: int, master_seed: int
) -> dict:
    """Empirical detector error over many trials, vectorized on counts.

    The embedder's phase-1 release count is exactly Poisson((lam-delta)*T1)
    for a fingerprinted flow (time-scaling releases arrival k at
    a_k * lam/(lam-delta), so the count before T1 is the number of arrivals
    before T1*(lam-delta)/lam); unfingerprinted and H0 flows contribute
    Poisson(lam*T1) counts. Sampling at that sufficient-statistic level is
    distribution-exact and keeps 10k-trial runs in seconds; equality with
    the packet-level embedder is asserted in the test suite.
    """
    rng = np.random.default_rng(derive_seed(master_seed, "willie"))
    lam, delta, T1, p = plan.lam, plan.delta, plan.T1, plan.p
    null_mean = lam * T1
    alt_mean = (lam - delta) * T1
    h0 = rng.poisson(null_mean, size=(trials, n_flows))
    if plan.scenario is Scenario.ALL_FLOWS:
        h1 = rng.poisson(alt_mean, size=(trials, n_flows))
        stat0 = _lrt1_stats(h0, null_mean, alt_mean)
        stat1 = _lrt1_stats(h1, null_mean, alt_mean)
    else:
        sel = rng.random((trials, n_flows)) < p
        h1 = np.where(sel, rng.poisson(alt_mean, size=(trials, n_flows)),
                      rng.poisson(null_mean, size=(trials, n_flows)))
        stat0 = _lrt2_stats(h0, null_mean, alt_mean, p)
        stat1 = _lrt2_stats(h1, null_mean, alt_mean, p)
    p_fa = float(np.mean(stat0 > 0))
    p_md = float(np.mean(stat1 <= 0))
    pe = (p_fa + p_md) / 2.0
    return {"pe_emp": pe, "p_fa": p_fa, "p_md": p_md, "trials": trials}


def _lrt1_stats(counts: np.ndarray, null_mean: float, alt_mean: float) -> np.ndarray:
    lr = detector.poisson_logpmf(counts, alt_mean) - detector.poisson_logpmf(counts, null_mean)
    return np.sum(lr, axis=1)


def _lrt2_stats(counts: np.ndarray, null_mean: float, alt_mean: float, p: float) -> np.ndarray:
    lr = detector.poisson_logpmf(counts, alt_mean) - detector.poisson_logpmf(counts, null_mean)
    return np.sum(np.logaddexp(math.log(p) + lr, math.log1p(-p)), axis=1)


def reliability_experiment(plan: ScenarioPlan, trials: int, master_seed: int) -> dict:
    """Per-flow buffer-underrun frequency with the real packet-level embedder."""
    underruns = 0
    for t in range(trials):
        flow = traffic.gen_poisson_trace(
            plan.lam, plan.T, derive_seed(master_seed, "rel", t, "flow")
        )
        cb = generate_codebook(1, plan.lam, plan.T2, derive_seed(master_seed, "rel", t, "cw"))
        res = embedder.embed(flow, plan, cb[0], fingerprint_id=0)
        underruns += int(res.failed)
    pf = underruns / trials
    return {"pf_underrun": pf, "trials": trials}


def decode_accuracy_experiment(
    plan: ScenarioPlan,
    n_flows: int,
    specs: list[QueueSpec],
    trials: int,
    master_seed: int,
    align: str = "tail",
) -> dict:
    """Per-flow decode accuracy and permutation recovery, full pipeline."""
    correct = total = 0
    perm_ok = perm_total = 0
    mu_effs = [s.effective_rate for s in specs]
    for t in range(trials):
        cb = generate_codebook(plan.M, plan.lam, plan.T2, derive_seed(master_seed, "dec", t, "cb"))
        assignment = tuple(range(n_flows))
        flows = [
            traffic.gen_poisson_trace(
                plan.lam, plan.T, derive_seed(master_seed, "dec", t, "flow", i), flow_id=i
            )
            for i in range(n_flows)
        ]
        results = [
            embedder.embed(flows[i], plan, cb[assignment[i]], fingerprint_id=assignment[i])
            for i in range(n_flows)
        ]
        outputs = queuenet.simulate_network(
            [r.output_trace for r in results], specs,
            derive_seed(master_seed, "dec", t, "net"), plan.T,
        )
        dec = decoder.decode_network(outputs, cb, plan, assignment, mu_effs, align=align)
        trial_all_ok = True
        for i, (_, decoded, _) in enumerate(dec.per_flow):
            if results[i].failed:
                trial_all_ok = False
                continue
            total += 1
            correct += int(decoded == assignment[i])
            trial_all_ok &= decoded == assignment[i]
        perm_total += 1
        perm_ok += int(trial_all_ok and not any(r.failed for r in results))
    return {
        "decode_accuracy": correct / total if total else float("nan"),
        "permutation_rate": perm_ok / perm_total,
        "decoded_flows": total,
        "trials": trials,
    }


def calibrate_none_threshold(
    plan: ScenarioPlan,
    spec: QueueSpec,
    trials: int,
    master_seed: int,
    quantile: float = 0.001,
) -> float:
    """Offline score quantile for declaring a flow unfingerprinted.

    Estimates the distribution of the true codeword's log-score on
    successfully fingerprinted flows and returns its ``quantile`` point;
    scores below it are treated as "no fingerprint present".
    """
    scores = []
    mu_eff = spec.effective_rate
    for t in range(trials):
        cb = generate_codebook(1, plan.lam, plan.T2, derive_seed(master_seed, "cal", t, "cw"))
        flow = traffic.gen_poisson_trace(
            plan.lam, plan.T, derive_seed(master_seed, "cal", t, "flow")
        )
        res = embedder.embed(flow, plan, cb[0], fingerprint_id=0)
        if res.failed:
            continue
        out = queuenet.simulate_queue(
            res.output_trace, spec, derive_seed(master_seed, "cal", t, "q"), plan.T
        )
        obs = out.main_departures.times
        obs = obs[obs >= plan.T1]
        score = decoder.codeword_score(obs, cb[0], plan.T1, mu_eff, plan.lam)
        if score > decoder.NEG_INF:
            scores.append(score)
    if not scores:
        raise InfeasibleScenarioError("calibration produced no successful trials")
    return float(np.quantile(np.asarray(scores), quantile))


# ---------------------------------------------------------------------------
# Horizon sweep
# ---------------------------------------------------------------------------

def sweep_T(
    config: ExperimentConfig, grid: list[float], trials_per_point: int = 0
) -> list[dict]:
    """Plan (and optionally measure) across a horizon grid.

    Infeasible grid points are flagged with m_planned = 0 and skipped for
    metrics; they are not fatal.
    """
    rows: list[dict] = []
    for T in grid:
        cfg = dataclasses.replace(config, T=float(T), m_target=None)
        try:
            plan = build_plan(cfg)
        except (InfeasibleScenarioError, ValueError):
            rows.append({"T": float(T), "m_planned": 0, "pe_emp": float("nan"),
                         "pf_emp": float("nan"), "decode_acc": float("nan")})
            continue
        row = {"T": float(T), "m_planned": plan.m, "pe_emp": float("nan"),
               "pf_emp": float("nan"), "decode_acc": float("nan")}
        if trials_per_point > 0:
            cfg_n = dataclasses.replace(cfg, trials=trials_per_point)
            _, _, report = run_experiment(cfg_n)
            row["pe_emp"] = report.pe_emp
            row["pf_emp"] = report.pf_underrun
            row["decode_acc"] = (
                report.decode_accuracy if report.decode_accuracy is not None else float("nan")
            )
        rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([repr(float(row["T"])), int(row["m_planned"]),
                             repr(float(row["pe_emp"])), repr(float(row["pf_emp"])),
                             repr(float(row["decode_acc"]))])


def summarize_trials_csv(path: str | Path) -> dict:
    """Aggregate a trials.csv back into summary metrics (report command)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: no trial rows")
    n = len(rows)
    p_fa = sum(r["h0_decision"] == "H1" for r in rows) / n
    p_md = sum(r["h1_decision"] == "H0" for r in rows) / n
    fingerprinted = sum(int(r["n_fingerprinted"]) for r in rows)
    underruns = sum(int(r["underruns"]) for r in rows)
    totals = sum(int(r["decode_total"]) for r in rows)
    correct = sum(int(r["decode_correct"]) for r in rows)
    perms = [r["permutation_correct"] for r in rows if r["permutation_correct"] != ""]
    return {
        "trials": n,
        "pe_emp": (p_fa + p_md) / 2.0,
        "p_fa": p_fa,
        "p_md": p_md,
        "pf_underrun": underruns / fingerprinted if fingerprinted else 0.0,
        "decode_accuracy": correct / totals if totals else None,
        "permutation_rate": (sum(p == "1" for p in perms) / len(perms)) if perms else None,
    }
