import asyncio
import logging
from collections.abc import Sequence
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifacts import config_snapshot, input_hashes, write_json, write_rows
from .cgs import TopicModel, train
from .corpus import Corpus
from .evaluation import perplexity
from .laplace import MECHANISM as LAPLACE_MECHANISM
from .laplace import LaplaceConfig, baseline_train
from .lp import PerturbedBatch, lp_train
from .model import Mechanism, RunConfig, RunMetadata
from .monitor import COMPOSITION_NOTE, LevelKind, PrivacyLedger, ledger_total, monitored_train

logger = logging.getLogger("dp-lda")

RUN_FIELDS = ["mechanism", "epsilon_or_f", "seed", "perplexity"]
SUMMARY_FIELDS = ["mechanism", "value", "epsilon", "n_seeds", "median_perplexity"]


@dataclass(eq=False)
class TrainingRun:
    model: TopicModel
    metadata: RunMetadata
    ledger: PrivacyLedger | None = None
    batch: PerturbedBatch | None = None


def _metadata(config: RunConfig, **extra) -> RunMetadata:
    return RunMetadata(
        mechanism=extra.pop("mechanism", config.mechanism.value),
        K=config.topics,
        alpha=config.alpha,
        beta=config.beta,
        n_iters=config.iters,
        seed=config.seed,
        **extra,
    )


def train_with_mechanism(corpus: Corpus, config: RunConfig) -> TrainingRun:
    """Trains one model on `corpus` with the mechanism the config selects."""
    hyper, n_iters, seed = config.hyper, config.iters, config.seed

    match config.mechanism:
        case Mechanism.PLAIN:
            model, _ = train(corpus, hyper, n_iters, seed)
            return TrainingRun(model, _metadata(config))

        case Mechanism.MONITORED_WORD | Mechanism.MONITORED_DOC:
            kind = LevelKind.WORD if config.mechanism is Mechanism.MONITORED_WORD else LevelKind.DOCUMENT
            model, _, ledger = monitored_train(corpus, hyper, n_iters, seed, kind)
            meta = _metadata(config, total_eps=ledger_total(ledger), notes=[COMPOSITION_NOTE])
            return TrainingRun(model, meta, ledger=ledger)

        case Mechanism.LP:
            flip = config.flip
            model, batch = lp_train(corpus, flip, hyper, n_iters, seed)
            meta = _metadata(config, f=flip.f, local_epsilon=flip.epsilon, binary_encoding=True)
            return TrainingRun(model, meta, batch=batch)

        case Mechanism.LAPLACE:
            if config.epsilon is None:
                raise ValueError("laplace needs epsilon")
            model, _ = baseline_train(corpus, hyper, config.epsilon, n_iters, seed)
            scale = LaplaceConfig(epsilon=config.epsilon, K=hyper.K).per_entry_scale
            meta = _metadata(
                config, mechanism=LAPLACE_MECHANISM, epsilon=config.epsilon, laplace_scale=scale
            )
            return TrainingRun(model, meta)


@dataclass(frozen=True)
class SweepJob:
    mechanism: Mechanism
    value: float | None
    seed: int


@dataclass(frozen=True)
class SweepRun:
    job: SweepJob
    epsilon: float | None
    perplexity: float


def job_config(config: RunConfig, job: SweepJob) -> RunConfig:
    overrides: dict[str, object] = {"seed": job.seed}
    if job.value is not None:
        overrides[config.value_kind] = job.value
    return config.merged(overrides)


def job_epsilon(config: RunConfig) -> float | None:
    match config.mechanism:
        case Mechanism.LP:
            return config.flip.epsilon
        case Mechanism.LAPLACE:
            return config.epsilon
        case _:
            return None


def plan_jobs(config: RunConfig) -> list[SweepJob]:
    """One job per (value, seed), values outermost, in the order given."""
    seeds = config.sweep_seeds
    if config.mechanism in (Mechanism.LP, Mechanism.LAPLACE):
        if not config.values:
            raise ValueError(f"A {config.mechanism.value} sweep needs at least one value.")
        if config.mechanism is Mechanism.LAPLACE and config.value_kind != "epsilon":
            raise ValueError("laplace sweeps are over epsilon; set value_kind = epsilon")
        return [SweepJob(config.mechanism, value, seed) for value in config.values for seed in seeds]
    if config.values:
        logger.warning(f"⚠️ Mechanism {config.mechanism.value} takes no privacy parameter; ignoring values.")
    return [SweepJob(config.mechanism, None, seed) for seed in seeds]


def run_job(job: SweepJob, train_corpus: Corpus, test_corpus: Corpus, config: RunConfig) -> SweepRun:
    cfg = job_config(config, job)
    run = train_with_mechanism(train_corpus, cfg)
    report = perplexity(run.model, test_corpus, cfg.fold_in_iters, cfg.seed)
    logger.info(
        f"🧪 {job.mechanism.value} value={job.value} seed={job.seed}: perplexity {report.perplexity:.4f}"
    )
    return SweepRun(job, job_epsilon(cfg), report.perplexity)


async def run_jobs(
    jobs: Sequence[SweepJob], train_corpus: Corpus, test_corpus: Corpus, config: RunConfig
) -> list[SweepRun]:
    """Runs every job on an executor, at most `workers` at a time; results keep submission order."""
    loop = asyncio.get_running_loop()
    semaphore = asyncio.Semaphore(config.workers)
    executor: Executor
    if config.workers > 1:
        executor = ProcessPoolExecutor(max_workers=config.workers)
    else:
        executor = ThreadPoolExecutor(max_workers=1)

    async def submit(job: SweepJob) -> SweepRun:
        async with semaphore:
            return await loop.run_in_executor(executor, run_job, job, train_corpus, test_corpus, config)

    with executor:
        tasks = [asyncio.create_task(submit(job)) for job in jobs]
        return list(await asyncio.gather(*tasks))


def summarize(runs: Sequence[SweepRun]) -> list[dict[str, object]]:
    """Median perplexity over seeds, one row per (mechanism, value) in first-seen order."""
    groups: dict[tuple[Mechanism, float | None], list[SweepRun]] = {}
    for run in runs:
        groups.setdefault((run.job.mechanism, run.job.value), []).append(run)
    rows = []
    for (mechanism, value), members in groups.items():
        epsilon = members[0].epsilon
        rows.append(
            {
                "mechanism": mechanism.value,
                "value": "" if value is None else value,
                "epsilon": "" if epsilon is None else epsilon,
                "n_seeds": len(members),
                "median_perplexity": float(np.median([m.perplexity for m in members])),
            }
        )
    return rows


def sweep(
    config: RunConfig, train_corpus: Corpus, test_corpus: Corpus, out_dir: Path
) -> tuple[Path, Path]:
    jobs = plan_jobs(config)
    logger.info(f"🚀 Sweep of {len(jobs)} runs on {config.workers} worker(s)")
    runs = asyncio.run(run_jobs(jobs, train_corpus, test_corpus, config))

    runs_path = write_rows(
        out_dir / "sweep-runs.csv",
        RUN_FIELDS,
        (
            {
                "mechanism": run.job.mechanism.value,
                "epsilon_or_f": "" if run.job.value is None else run.job.value,
                "seed": run.job.seed,
                "perplexity": run.perplexity,
            }
            for run in runs
        ),
    )
    summary_path = write_rows(out_dir / "sweep.csv", SUMMARY_FIELDS, summarize(runs))
    write_json(
        out_dir / "sweep.json",
        {
            "runs": len(runs),
            "value_kind": config.value_kind,
            "config": config_snapshot(config),
            "inputs": input_hashes([config.train, config.test]),
        },
    )
    logger.info(f"💾 Sweep written to {summary_path}")
    return runs_path, summary_path
