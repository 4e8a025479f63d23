import argparse
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from . import configure_logging
from .artifacts import (
    config_snapshot,
    format_float,
    input_hashes,
    read_model,
    write_json,
    write_ledger,
    write_model,
    write_rows,
)
from .cgs import Hyperparams
from .corpus import (
    Corpus,
    EmptyVocabularyError,
    Vocabulary,
    load_stopwords,
    load_uci_bag_of_words,
    preprocess,
    restrict_vocabulary,
    split_train_test,
    write_uci_bag_of_words,
)
from .evaluation import OutOfVocabularyError, PerplexityReport, perplexity
from .lp import read_perturbed_batch, rr_epsilon, server_train, write_perturbed_batch
from .model import Mechanism, RunConfig, RunMetadata, parse_key_values
from .monitor import DegenerateCorpus, compare_with_oracle, random_oracle_instance
from .seeding import derive_rng
from .sweep import TrainingRun, sweep, train_with_mechanism
from .synthetic import planted_corpus

logger = logging.getLogger("dp-lda")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

ORACLE_FIELDS = [
    "instance",
    "K",
    "N",
    "word",
    "single_topic_eps",
    "full_search_eps",
    "full_search_eps_on_p",
    "argmax_partition",
    "n_partitions",
    "sound",
]

DEGENERATE_HINT = (
    "Reduce N_max by truncating long documents, or switch to word-level monitoring (--level word)."
)


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise ValueError(f"No {what} given; set `{what} = <path>` in the config or pass --{what}.")
    return path


def cmd_train(config: RunConfig) -> int:
    out = config.out
    inputs = input_hashes([config.train, config.replay])

    if config.replay is not None:
        run = _replay_lp(config)
    else:
        corpus = load_uci_bag_of_words(_require(config.train, "train"))
        logger.info(
            f"🏋️ Training {config.mechanism.value}: K={config.topics}, alpha={config.alpha}, "
            f"beta={config.beta}, iters={config.iters}, seed={config.seed}"
        )
        run = train_with_mechanism(corpus, config)

    metadata = run.metadata.model_copy(update={"config": config_snapshot(config), "inputs": inputs})
    write_model(run.model, out, metadata)
    if run.ledger is not None:
        write_ledger(run.ledger, out, config_snapshot(config), inputs)
    if run.batch is not None:
        write_perturbed_batch(run.batch, out / "perturbed.txt")
    return EXIT_OK


def _replay_lp(config: RunConfig) -> TrainingRun:
    """Server-side training from a captured perturbed batch."""
    batch = read_perturbed_batch(_require(config.replay, "replay"))
    if config.train is not None:
        vocab = load_uci_bag_of_words(config.train).vocab
    else:
        vocab = Vocabulary.synthetic(batch.V)
    logger.info(f"📼 Replaying {batch.M} perturbed vectors (f={batch.f:.6g})")
    model, _, _ = server_train(batch, vocab, config.hyper, config.iters, config.seed)
    metadata = RunMetadata(
        mechanism=Mechanism.LP.value,
        K=config.topics,
        alpha=config.alpha,
        beta=config.beta,
        n_iters=config.iters,
        seed=config.seed,
        f=batch.f,
        local_epsilon=rr_epsilon(batch.f),
        binary_encoding=True,
        notes=["trained from a replayed perturbed batch"],
    )
    return TrainingRun(model, metadata)


def map_onto_vocabulary(test: Corpus, vocab: Vocabulary) -> Corpus:
    """Re-indexes `test` by word string; a test token the model has no column for is an error."""
    if test.vocab.words == vocab.words:
        return test
    used = np.flatnonzero(test.word_counts())
    missing = [test.vocab.words[t] for t in used.tolist() if test.vocab.words[t] not in vocab.index]
    if missing:
        raise OutOfVocabularyError(
            f"{len(missing)} test word(s) are not in the model vocabulary, e.g. {missing[:5]}"
        )
    return restrict_vocabulary(test, vocab)


def cmd_eval(config: RunConfig) -> PerplexityReport:
    model_path = _require(config.model, "model")
    test_path = _require(config.test, "test")
    model = read_model(model_path)
    test = map_onto_vocabulary(load_uci_bag_of_words(test_path), model.vocab)
    report = perplexity(model, test, config.fold_in_iters, config.seed)
    write_json(
        config.out / "perplexity.json",
        {
            **report.model_dump(),
            "config": config_snapshot(config),
            "inputs": input_hashes([model_path, test_path]),
        },
    )
    print(format_float(report.perplexity))
    return report


def cmd_sweep(config: RunConfig) -> int:
    train_corpus = load_uci_bag_of_words(_require(config.train, "train"))
    test_corpus = load_uci_bag_of_words(_require(config.test, "test"))
    test_corpus = map_onto_vocabulary(test_corpus, train_corpus.vocab)
    sweep(config, train_corpus, test_corpus, config.out)
    return EXIT_OK


def _write_split(train: Corpus, test: Corpus, out: Path) -> None:
    write_uci_bag_of_words(train, out / "train.txt")
    write_uci_bag_of_words(test, out / "test.txt")
    logger.info(f"💾 Wrote {out / 'train.txt'} (M={train.M}) and {out / 'test.txt'} (M={test.M})")


def cmd_ingest(config: RunConfig) -> int:
    """Split a raw UCI corpus, prune on the training side and apply the result to the test side."""
    raw = load_uci_bag_of_words(_require(config.train, "train"))
    train_raw, test_raw = split_train_test(raw, config.n_test, config.seed)
    stopwords = load_stopwords(config.stopwords) if config.stopwords is not None else frozenset()
    try:
        train = preprocess(train_raw, stopwords, config.top_v)
    except EmptyVocabularyError as e:
        raise EmptyVocabularyError(f"{e} Stopword list: {config.stopwords}") from e
    test = restrict_vocabulary(test_raw, train.vocab)
    _write_split(train, test, config.out)
    write_json(
        config.out / "ingest.json",
        {
            "M_train": train.M,
            "M_test": test.M,
            "V": train.V,
            "W_train": train.W,
            "W_test": test.W,
            "N_max": train.N_max,
            "config": config_snapshot(config),
            "inputs": input_hashes([config.train, config.stopwords]),
        },
    )
    return EXIT_OK


def cmd_synth(config: RunConfig) -> int:
    corpus = planted_corpus(
        config.docs + config.test_docs,
        config.vocab_size,
        config.planted_topics,
        config.doc_len,
        config.seed,
    )
    train, test = split_train_test(corpus, config.test_docs, config.seed)
    _write_split(train, test, config.out)
    write_json(config.out / "synth.json", {"config": config_snapshot(config)})
    return EXIT_OK


def cmd_oracle(config: RunConfig) -> int:
    """Full partition search against the single-topic search on random small instances."""
    rng = derive_rng(config.seed, "oracle")
    rows: list[dict[str, Any]] = []
    violations = 0
    for i in range(config.instances):
        K = int(rng.integers(2, config.max_topics + 1))
        N = int(rng.integers(1, config.max_removed + 1))
        counts = random_oracle_instance(rng, K, N)
        t = int(rng.integers(counts.V))
        hyper = Hyperparams(K=K, alpha=config.alpha, beta=config.beta)
        searched, oracle = compare_with_oracle(counts, 0, t, hyper, N)
        sound = oracle.epsilon <= searched
        violations += not sound
        rows.append(
            {
                "instance": i,
                "K": K,
                "N": N,
                "word": t,
                "single_topic_eps": searched,
                "full_search_eps": oracle.epsilon,
                "full_search_eps_on_p": oracle.epsilon_on_p,
                "argmax_partition": "|".join(str(c) for c in oracle.argmax.counts),
                "n_partitions": oracle.n_partitions,
                "sound": int(sound),
            }
        )
    path = write_rows(config.out / "oracle.csv", ORACLE_FIELDS, rows)
    write_json(
        config.out / "oracle.json",
        {"instances": len(rows), "violations": violations, "config": config_snapshot(config)},
    )
    if violations:
        logger.error(f"🛑 {violations} of {len(rows)} instances exceed the single-topic search; see {path}")
        return EXIT_FAILURE
    logger.info(f"✅ Single-topic search matched the full search on all {len(rows)} instances")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dp-lda",
        description="LDA with inherent privacy monitoring, locally private training and a Laplace baseline",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="Flat key = value configuration file")
    common.add_argument("--seed", type=int, help="Master seed (default: 0)")
    common.add_argument("--out", type=Path, help="Output directory (default: out)")
    common.add_argument("--train", type=Path, help="Training corpus in UCI bag-of-words format")
    common.add_argument("--test", type=Path, help="Held-out corpus in UCI bag-of-words format")
    common.add_argument("--topics", type=int, help="Number of topics K (default: 50)")
    common.add_argument("--iters", type=int, help="Gibbs iterations (default: 300)")

    privacy = argparse.ArgumentParser(add_help=False)
    privacy.add_argument("--f", type=float, help="Randomized response flip probability")
    privacy.add_argument("--epsilon", type=float, help="Privacy budget (lp: local epsilon)")

    sub.add_parser("ingest", parents=[common], help="Split, prune and write a UCI corpus").add_argument(
        "--stopwords", type=Path, help="Stopword list, one word per line"
    )
    sub.add_parser("synth", parents=[common], help="Write a planted-topic synthetic corpus")

    p = sub.add_parser("train", parents=[common, privacy], help="Train with any mechanism")
    p.add_argument("--mechanism", choices=[m.value for m in Mechanism])
    p.add_argument("--level", choices=["word", "doc"], help="Monitor privacy at this level")
    p.add_argument("--replay", type=Path, help="Train lp from a captured perturbed batch")

    p = sub.add_parser("lp-train", parents=[common, privacy], help="Locally private training")
    p.add_argument("--replay", type=Path, help="Train from a captured perturbed batch")
    sub.add_parser("baseline-train", parents=[common, privacy], help="Laplace-noised initialization baseline")

    p = sub.add_parser("eval", parents=[common], help="Held-out perplexity of a trained model")
    p.add_argument("--model", type=Path, help="model.csv written by a train verb")

    p = sub.add_parser("sweep", parents=[common, privacy], help="Perplexity over privacy values and seeds")
    p.add_argument("--mechanism", choices=[m.value for m in Mechanism])
    p.add_argument("--values", type=str, help="Comma-separated f or epsilon values")
    p.add_argument("--value-kind", choices=["f", "epsilon"], dest="value_kind")
    p.add_argument("--seeds", type=str, help="Comma-separated seeds")
    p.add_argument("--workers", type=int, help="Concurrent runs (default: 1)")

    p = sub.add_parser("oracle", parents=[common], help="Check the single-topic search against brute force")
    p.add_argument("--instances", type=int, help="Random instances to check (default: 200)")
    return parser


def _split_list(value: str | None) -> list[str] | None:
    if value is None:
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = parse_key_values(args.config) if args.config is not None else {}
    overrides = {
        k: v for k, v in vars(args).items() if k not in {"config", "verb", "level", "values", "seeds"}
    }
    overrides["values"] = _split_list(getattr(args, "values", None))
    overrides["seeds"] = _split_list(getattr(args, "seeds", None))

    match args.verb:
        case "lp-train":
            overrides["mechanism"] = Mechanism.LP
        case "baseline-train":
            overrides["mechanism"] = Mechanism.LAPLACE
        case "train" if args.level is not None:
            overrides["mechanism"] = f"monitored-{args.level}"
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def _print_validation_error(e: ValidationError) -> None:
    print("🛑 Invalid configuration:", file=sys.stderr)
    for error in e.errors():
        field = ".".join(str(part) for part in error["loc"]) or "config"
        print(f"  - {field}: {error['msg']}", file=sys.stderr)


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "train": cmd_train,
    "lp-train": cmd_train,
    "baseline-train": cmd_train,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verb)

    try:
        config = resolve_config(args)
    except ValidationError as e:
        _print_validation_error(e)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"🛑 Could not read the configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.verb == "eval":
            cmd_eval(config)
            return EXIT_OK
        return COMMANDS[args.verb](config)
    except ValidationError as e:
        _print_validation_error(e)
        return EXIT_CONFIG
    except DegenerateCorpus as e:
        print(f"🛑 {e}\n   {DEGENERATE_HINT}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, ValueError) as e:
        print(f"🛑 {e}", file=sys.stderr)
        return EXIT_FAILURE


def run() -> None:
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n👋 Interrupted.")
        sys.exit(130)
