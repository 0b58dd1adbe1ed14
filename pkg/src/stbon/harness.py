"""Experiment runner: configs in, JSONL records and summaries out.

One experiment runs one method over one task. Questions execute
sequentially in a seeded order and every record is serialized
canonically, so a rerun with the same config is byte-identical apart
from wall-clock-derived fields (use ``strip_wall_fields`` to compare).
"""

from __future__ import annotations

import dataclasses
import itertools
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .baselines import FullBonResult, full_bon_generate, majority_vote
from .clustered import ClusteredTask, Question, default_task, extract_answer
from .coe import coe_feature, scores_from_features
from .controller import DecodeResult, StBoNConfig, run_stbon
from .costs import SlotLedger, measure_run
from .errors import ConfigError, DegenerateChainError
from .interface import Model
from .jsonio import SCHEMA_VERSION, JsonlWriter
from .replay import RecordingModel, ReplayModel
from .sampling import QUESTION_NS, SamplingParams, derive_seed
from .scorers import make_scorer
from .streams import greedy_decode
from .theorem import CoupledChainConfig, check_drift_bound, check_markov_bound, simulate_coupled

TASKS = ("toy-clustered", "fixture-replay", "theorem-grid")
METHODS = ("stbon", "full-bon-vote", "full-bon-coe", "greedy", "ablation-semantic", "ablation-string")
WALL_FIELDS = frozenset({"wall_ms", "t_cost", "a_cost", "mean_wall_ms", "mean_t_cost", "mean_a_cost"})

OUT_DIR_ENV = "STBON_OUT_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "toy-clustered"
    method: str = "stbon"
    n: int = 5
    window_ratio: float = 1.0
    top_k: int = 20
    top_p: float = 0.95
    temperature: float = 0.7
    seed: int = 0
    num_questions: int = 50
    max_len: int = 160
    model: str = "toy"
    weight_seed: int = 11
    drift_strength: float = 1.0
    out: str | None = None
    fixture: str | None = None
    record: str | None = None
    # theorem grid axes
    lipschitz: tuple[float, ...] = (0.0, 0.05, 0.2)
    increment_bound: tuple[float, ...] = (0.5, 1.0, 2.0)
    horizon_gaps: tuple[int, ...] = (5, 20, 50)
    followers: int = 4
    trials: int = 10000

    def validate(self) -> "ExperimentConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.task != "theorem-grid" and self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.task == "fixture-replay" and not self.fixture:
            raise ConfigError("fixture-replay task needs a fixture path")
        if self.record and self.num_questions != 1:
            raise ConfigError("recording a fixture requires num_questions = 1")
        if self.n < 1 or self.num_questions < 1 or self.max_len < 1:
            raise ConfigError("n, num_questions, and max_len must be positive")
        try:
            self.sampling_params(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def sampling_params(self, question_index: int) -> SamplingParams:
        return SamplingParams(
            top_k=self.top_k,
            top_p=self.top_p,
            temperature=self.temperature,
            seed=derive_seed(self.seed, QUESTION_NS, question_index),
        )


_ALIASES = {"N": "n", "m": "window_ratio"}
_TUPLE_FIELDS = {"lipschitz": float, "increment_bound": float, "horizon_gaps": int}


def _coerce(name: str, raw: str):
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in fields:
        raise ConfigError(f"unknown config key {name!r}")
    if name in _TUPLE_FIELDS:
        cast = _TUPLE_FIELDS[name]
        return tuple(cast(part) for part in str(raw).split(",") if part != "")
    blank = ExperimentConfig()
    current = getattr(blank, name)
    if isinstance(current, bool):
        return str(raw).lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return None if raw in ("none", "null", "") else str(raw)


def load_config(path: str | Path | None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Flat ``key = value`` file plus command-line ``key=value`` overrides."""
    values: dict = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            key = _ALIASES.get(key, key)
            values[key] = _coerce(key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        key = _ALIASES.get(key, key)
        values[key] = _coerce(key, raw)
    return ExperimentConfig(**values).validate()


def strip_wall_fields(record: dict) -> dict:
    """Drop wall-clock-derived fields, recursively; for rerun comparisons."""
    out = {}
    for key, value in record.items():
        if key in WALL_FIELDS:
            continue
        out[key] = strip_wall_fields(value) if isinstance(value, dict) else value
    return out


def default_out_path(config: ExperimentConfig, kind: str = "run") -> Path:
    base = Path(os.environ.get(OUT_DIR_ENV, "stbon-out"))
    return base / f"{kind}_{config.task}_{config.method}_seed{config.seed}.jsonl"


def _cost_dict(report) -> dict:
    return {
        "m_cost": report.m_cost,
        "t_cost": report.t_cost,
        "a_cost": report.a_cost,
        "memory_reduction": report.memory_reduction,
        "wall_ms": report.wall_ms,
        "peak_slots": report.peak_slots,
        "total_slot_steps": report.total_slot_steps,
        "total_stream_steps": report.total_stream_steps,
    }


def select_full_bon_coe(result: FullBonResult) -> tuple[int, list[float | None]]:
    """Consistency selection over completed chains, skipping unscorable ones."""
    features: list[tuple[int, float]] = []
    for i, chain in enumerate(result.chains or ()):
        if chain is None:
            continue
        try:
            features.append((i, coe_feature(chain).value))
        except DegenerateChainError:
            continue
    scores: list[float | None] = [None] * len(result.sequences)
    if len(features) >= 2:
        values = np.array([f for _, f in features])
        partial = scores_from_features(values)
        for (idx, _), score in zip(features, partial):
            scores[idx] = float(score)
        chosen = min((idx for idx, _ in features), key=lambda k: (scores[k], k))
        return chosen, scores
    if len(features) == 1:
        return features[0][0], scores
    return 0, scores


@dataclass
class QuestionOutcome:
    record: dict
    c: int | None
    generated_length: int


def _run_question(
    config: ExperimentConfig,
    model: Model,
    task: ClusteredTask | None,
    question: Question | None,
    index: int,
    prompt: tuple[int, ...] | None = None,
) -> QuestionOutcome:
    if prompt is None:
        prompt = question.prompt if question is not None else ()
    params = config.sampling_params(index)
    greedy_tokens, greedy_ledger = greedy_decode(model, prompt, config.max_len)

    chosen: int | None = None
    c = None
    tau = None
    generated: tuple[int, ...] = ()
    ledger: SlotLedger = greedy_ledger
    extra: dict = {}

    if config.method == "greedy":
        generated = greedy_tokens
        ledger = greedy_ledger
    elif config.method in ("stbon", "ablation-semantic", "ablation-string"):
        scorer = None
        if config.method != "stbon":
            scorer = make_scorer(config.method.removeprefix("ablation-"))
        result = run_stbon(
            model,
            StBoNConfig(n=config.n, max_len=config.max_len, window_ratio=config.window_ratio, sampling=params),
            prompt,
            scorer=scorer,
        )
        chosen = result.record.final
        c, tau = result.telemetry.c, result.telemetry.tau
        generated = result.generated
        ledger = result.ledger
        extra = {
            "winners": list(result.record.winners),
            "fallback_steps": list(result.telemetry.fallback_steps),
            "capped": result.telemetry.capped,
            "c_trigger": result.telemetry.c_trigger,
        }
    elif config.method in ("full-bon-vote", "full-bon-coe"):
        want_chains = config.method == "full-bon-coe"
        result = full_bon_generate(model, params, config.n, config.max_len, prompt, want_chains=want_chains)
        answers = [_answer_of(task, seq) for seq in result.sequences]
        if config.method == "full-bon-vote":
            chosen, tally = majority_vote(answers)
            extra = {"tally": {str(k): v for k, v in tally.counts.items()}, "uniform_tie": tally.uniform_tie}
        else:
            chosen, _scores = select_full_bon_coe(result)
        generated = result.sequences[chosen]
        ledger = result.ledger
        extra["sample_answers"] = [None if a is None else int(a) for a in answers]
    else:  # pragma: no cover - validate() guards this
        raise ConfigError(f"method {config.method!r} not runnable")

    answer = _answer_of(task, generated)
    correct = None if question is None else (answer == question.answer)
    report = measure_run(ledger, greedy_ledger)
    record = {
        "kind": "run",
        "schema_version": SCHEMA_VERSION,
        "question_id": index,
        "method": config.method,
        "chosen_index": chosen,
        "answer": None if answer is None else int(answer),
        "expected": None if question is None else int(question.answer),
        "correct": correct,
        "c": c,
        "tau": tau,
        "generated_length": len(generated),
        "cost": _cost_dict(report),
        **extra,
    }
    return QuestionOutcome(record=record, c=c, generated_length=len(generated))


def _answer_of(task: ClusteredTask | None, generated) -> int | None:
    if task is None:
        return None
    return extract_answer(tuple(generated), task.model)


def _build_model(config: ExperimentConfig) -> tuple[Model, ClusteredTask | None, object | None]:
    """Returns (model, task, closeable)."""
    closeable = None
    if config.task == "fixture-replay":
        model: Model = ReplayModel.load(config.fixture)
        return model, None, None
    if config.model == "toy":
        task = default_task(
            seed=config.seed, weight_seed=config.weight_seed, drift_strength=config.drift_strength
        )
        return task.model, task, None
    if config.model.startswith("bridge:"):
        from .bridge import BridgeModel, parse_bridge_command
        from .clustered import ClusteredTaskConfig, build_clustered_task_model

        base = BridgeModel(parse_bridge_command(config.model))
        closeable = base
        ranges = tuple((4 + 4 * a, 8 + 4 * a) for a in range(12))
        wrapped = build_clustered_task_model(
            ClusteredTaskConfig(answer_token_ranges=ranges, drift_strength=config.drift_strength), base
        )
        return wrapped, ClusteredTask(model=wrapped, seed=config.seed), closeable
    raise ConfigError(f"unknown model spec {config.model!r}")


@dataclass
class Summary:
    config: ExperimentConfig
    num_questions: int
    accuracy: float | None
    mean_c: float | None
    mean_generated: float
    mean_m_cost: float
    mean_t_cost: float
    mean_a_cost: float
    mean_peak_slots: float
    mean_total_slot_steps: float

    def as_record(self) -> dict:
        return {
            "kind": "summary",
            "schema_version": SCHEMA_VERSION,
            "task": self.config.task,
            "method": self.config.method,
            "n": self.config.n,
            "window_ratio": self.config.window_ratio,
            "seed": self.config.seed,
            "num_questions": self.num_questions,
            "accuracy": self.accuracy,
            "mean_c": self.mean_c,
            "mean_generated": self.mean_generated,
            "mean_m_cost": self.mean_m_cost,
            "mean_t_cost": self.mean_t_cost,
            "mean_a_cost": self.mean_a_cost,
            "mean_peak_slots": self.mean_peak_slots,
            "mean_total_slot_steps": self.mean_total_slot_steps,
        }


def run_experiment(config: ExperimentConfig, writer: JsonlWriter | None = None) -> Summary:
    config = config.validate()
    if config.task == "theorem-grid":
        return run_theorem_grid(config, writer)

    model, task, closeable = _build_model(config)
    recording = None
    if config.record:
        recording = RecordingModel(model, label=f"{config.task}:{config.method}")
        model = recording

    records: list[dict] = []
    try:
        num_questions = 1 if config.task == "fixture-replay" else config.num_questions
        for index in range(num_questions):
            question = task.question(index) if task is not None else None
            prompt = None
            if config.task == "fixture-replay" and isinstance(model, ReplayModel):
                prompt = model.prompt or ()
            outcome = _run_question(config, model, task, question, index, prompt=prompt)
            records.append(outcome.record)
            if writer is not None:
                writer.write(outcome.record)
        if recording is not None:
            prompt = task.question(0).prompt if task is not None else ()
            recording.save(config.record, prompt=prompt)
    finally:
        if closeable is not None:
            closeable.close()

    known = [r["correct"] for r in records if r["correct"] is not None]
    cs = [r["c"] for r in records if r["c"] is not None]
    summary = Summary(
        config=config,
        num_questions=len(records),
        accuracy=(sum(known) / len(known)) if known else None,
        mean_c=(sum(cs) / len(cs)) if cs else None,
        mean_generated=float(np.mean([r["generated_length"] for r in records])),
        mean_m_cost=float(np.mean([r["cost"]["m_cost"] for r in records])),
        mean_t_cost=float(np.mean([r["cost"]["t_cost"] for r in records])),
        mean_a_cost=float(np.mean([r["cost"]["a_cost"] for r in records])),
        mean_peak_slots=float(np.mean([r["cost"]["peak_slots"] for r in records])),
        mean_total_slot_steps=float(np.mean([r["cost"]["total_slot_steps"] for r in records])),
    )
    if writer is not None:
        writer.write(summary.as_record())
    return summary


def run_theorem_grid(config: ExperimentConfig, writer: JsonlWriter | None = None) -> Summary:
    """One verdict record per grid cell; negative control per lossy cell."""
    cells = list(itertools.product(config.lipschitz, config.increment_bound, config.horizon_gaps))
    all_passed = True
    for cell_index, (lip, inc, gap) in enumerate(cells):
        sim = CoupledChainConfig(
            lipschitz=lip,
            increment_bound=inc,
            horizon=gap,
            start=0,
            followers=config.followers,
            trials=config.trials,
            seed=derive_seed(config.seed, 6, cell_index),
        )
        trajectories = simulate_coupled(sim)
        drift = check_drift_bound(trajectories, sim.gamma)
        finals = np.array([t.s[-1] for t in trajectories])
        epsilon = float(np.quantile(finals, 0.8))
        epsilon = max(epsilon, 1e-9)
        markov = check_markov_bound(trajectories, epsilon, sim.gamma)
        negative_flagged = None
        if lip > 0:
            falsified = 1.0 + lip * inc / 4.0
            negative_flagged = not check_drift_bound(trajectories, falsified).passed
        passed = drift.passed and markov.passed and (negative_flagged is not False)
        all_passed = all_passed and passed
        record = {
            "kind": "verdict",
            "schema_version": SCHEMA_VERSION,
            "cell": {"lipschitz": lip, "increment_bound": inc, "horizon_gap": gap},
            "gamma": sim.gamma,
            "trials": config.trials,
            "followers": config.followers,
            "epsilon": epsilon,
            "drift_passed": drift.passed,
            "drift_violations": len(drift.violations),
            "markov_passed": markov.passed,
            "markov_violations": len(markov.violations),
            "negative_control_flagged": negative_flagged,
            "passed": passed,
        }
        if writer is not None:
            writer.write(record)
    summary = Summary(
        config=config,
        num_questions=len(cells),
        accuracy=1.0 if all_passed else 0.0,
        mean_c=None,
        mean_generated=0.0,
        mean_m_cost=1.0,
        mean_t_cost=1.0,
        mean_a_cost=1.0,
        mean_peak_slots=0.0,
        mean_total_slot_steps=0.0,
    )
    if writer is not None:
        writer.write(summary.as_record())
    return summary


SWEEP_AXES = {"N": "n", "m": "window_ratio", "temperature": "temperature", "top_k": "top_k", "top_p": "top_p"}


def sweep(config: ExperimentConfig, axis: str, values: list, out_dir: str | Path) -> list[Summary]:
    """One experiment per axis value, plus a cost/accuracy curve file."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep values must be non-empty")
    fieldname = SWEEP_AXES[axis]
    cast = type(getattr(config, fieldname))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries: list[Summary] = []
    with JsonlWriter(out_dir / f"sweep_{axis}_{config.method}.jsonl") as writer:
        for value in values:
            point = replace(config, **{fieldname: cast(value)}).validate()
            summary = run_experiment(point)
            row = summary.as_record()
            row["kind"] = "sweep-point"
            row["axis"] = axis
            row["value"] = cast(value)
            writer.write(row)
            summaries.append(summary)
    curve = out_dir / f"curve_{axis}_{config.method}.tsv"
    with curve.open("w", encoding="utf-8") as fh:
        fh.write("a_cost\taccuracy\n")
        for s in summaries:
            fh.write(f"{s.mean_a_cost}\t{s.accuracy}\n")
    return summaries


@dataclass
class PairedRun:
    """Seed-matched early-truncation and full-generation runs of one question."""

    question: Question
    full: FullBonResult
    st: DecodeResult
    sample_answers: list[int | None]
    sample_correct: list[bool]
    st_choice: int
    st_correct: bool
    sample_lengths: list[int]


def paired_study(
    task: ClusteredTask,
    n: int,
    num_questions: int,
    *,
    config: ExperimentConfig | None = None,
) -> list[PairedRun]:
    """Run both decoders on shared seeds; the backbone of the analysis suite."""
    config = (config or ExperimentConfig()).validate()
    runs: list[PairedRun] = []
    for index in range(num_questions):
        question = task.question(index)
        params = config.sampling_params(index)
        full = full_bon_generate(task.model, params, n, config.max_len, question.prompt, want_chains=True)
        st = run_stbon(
            task.model,
            StBoNConfig(n=n, max_len=config.max_len, window_ratio=config.window_ratio, sampling=params),
            question.prompt,
        )
        answers = [extract_answer(seq, task.model) for seq in full.sequences]
        correct = [a == question.answer for a in answers]
        runs.append(
            PairedRun(
                question=question,
                full=full,
                st=st,
                sample_answers=answers,
                sample_correct=correct,
                st_choice=st.record.final,
                st_correct=correct[st.record.final],
                sample_lengths=[len(seq) for seq in full.sequences],
            )
        )
    return runs
