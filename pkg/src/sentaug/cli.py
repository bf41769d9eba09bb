"""Command-line pipeline orchestrator.

Stages operate on files, so each is independently re-runnable:
stats -> rewrite -> optimize-prompt -> train -> reproduce -> evaluate.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import corpus as corpus_mod
from . import evaluate as evaluate_mod
from . import reproduce as reproduce_mod
from . import rewrite as rewrite_mod
from .config import ConfigError, PipelineConfig, load_config
from .scorers import BowSentimentJudge, HybridThreeWayJudge, NgramFluencyScorer
from .service import HttpGenerationClient, MockGenerationClient
from .train import build_model, load_checkpoint, train

logger = logging.getLogger("sentaug")

STAGES = ("stats", "rewrite", "optimize-prompt", "train", "reproduce", "evaluate")


class CliError(Exception):
    """Validation failure: bad arguments, config, or missing stage artifact."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(path: Path, stage: str, artifact: str):
    if not path.exists():
        raise CliError(f"stage {stage!r}: missing {artifact} at {path}; run the earlier stage first")
    return path


def _load_corpus(cfg: PipelineConfig):
    path = Path(cfg.paths.corpus)
    if not path.exists():
        raise CliError(f"corpus file not found: {path}")
    return corpus_mod.load_reviews(path, cfg.corpus.format)


def _make_client(cfg: PipelineConfig, mock: bool):
    if mock:
        return MockGenerationClient()
    if cfg.service.endpoint:
        return HttpGenerationClient(
            endpoint=cfg.service.endpoint,
            model=cfg.service.model,
            timeout=cfg.service.timeout,
            max_retries=cfg.service.max_retries,
            max_concurrency=max(cfg.workers, 1),
        )
    raise CliError("no generation service configured; pass --mock-service or --service-endpoint")


def _load_prompt(cfg: PipelineConfig) -> rewrite_mod.PromptState:
    if cfg.paths.prompt.exists():
        return rewrite_mod.PromptState.load(cfg.paths.prompt)
    state = rewrite_mod.PromptState(temperature=cfg.prompt.temperature)
    if cfg.prompt.seed_examples:
        doc = yaml.safe_load(Path(cfg.prompt.seed_examples).read_text(encoding="utf-8"))
        examples = [(e["source"], e["counterfactual"]) for e in doc][: cfg.prompt.k]
        state = state.with_examples(examples)
    return state


# ------------------------------------------------------------------- stages


def stage_stats(cfg: PipelineConfig) -> int:
    reviews = _load_corpus(cfg)
    stats = corpus_mod.compute_distribution(reviews)
    _write_json(cfg.paths.stats_report, stats.to_record())
    print(f"total {stats.total}")
    print(f"positive_fraction {stats.positive_fraction:.3f}")
    return 0

def stage_rewrite(cfg: PipelineConfig, client) -> int:
    reviews = _load_corpus(cfg)
    sources = corpus_mod.select_rewrite_sources(reviews)
    if cfg.prompt.max_rewrites is not None:
        sources = sources[: cfg.prompt.max_rewrites]
    if not sources:
        raise CliError("corpus has no rating-5 reviews to rewrite")
    state = _load_prompt(cfg)
    pairs, rejected = [], 0
    for source in sources:
        try:
            pairs.append(rewrite_mod.rewrite(client, state, source))
        except rewrite_mod.RewriteError as exc:
            rejected += 1
            logger.warning("skipping rewrite: %s", exc)
    corpus_mod.save_pairs(pairs, cfg.paths.seed_pairs)
    print(f"rewrote {len(pairs)} pairs ({rejected} rejected) -> {cfg.paths.seed_pairs}")
    return 0


def stage_optimize_prompt(cfg: PipelineConfig, client, annotations_path=None) -> int:
    reviews = _load_corpus(cfg)
    sources = corpus_mod.select_rewrite_sources(reviews)
    if not sources:
        raise CliError("corpus has no rating-5 reviews to build an evaluation set from")
    judge = BowSentimentJudge.from_reviews(reviews)
    evaluator = rewrite_mod.ReferenceEvaluator(judge)
    state = _load_prompt(cfg)

    if annotations_path:
        table = json.loads(Path(annotations_path).read_text(encoding="utf-8"))

        def annotate(review):
            if review.review_id not in table:
                raise CliError(f"annotation file lacks review {review.review_id!r}")
            return table[review.review_id]
    elif isinstance(client, MockGenerationClient):
        from .synthetic import flip_polarity

        annotate = lambda review: flip_polarity(review.text)  # noqa: E731
    else:
        raise CliError("optimize-prompt needs --annotations when not using --mock-service")

    pool = sources[: cfg.prompt.m + cfg.prompt.n]
    evalset = rewrite_mod.build_evalset(
        pool, state, client, evaluator, cfg.prompt.m, cfg.prompt.n,
        seed=cfg.seed, workers=cfg.workers,
    )
    if len(evalset.items) < 2:
        raise CliError("evaluation set has fewer than 2 items; corpus too small")
    result = rewrite_mod.optimize_prompt(
        state, evalset, client, evaluator, annotate,
        delta=cfg.prompt.delta, epsilon=cfg.prompt.epsilon,
        seed=cfg.seed, workers=cfg.workers,
    )
    result.state.save(cfg.paths.prompt)
    print(
        f"optimized prompt: {len(result.trace)} iterations, "
        f"score {result.baseline_score:.3f} -> {result.final_score:.3f} "
        f"(stop: {result.stop_reason}) -> {cfg.paths.prompt}"
    )
    return 0


def stage_train(cfg: PipelineConfig) -> int:
    pairs_path = _require(cfg.paths.seed_pairs, "train", "pair file")
    pairs = corpus_mod.load_pairs(pairs_path)
    if not pairs:
        raise CliError("pair file is empty; nothing to train on")
    members = corpus_mod.ReviewSet()
    for p in pairs:
        for r in (p.positive, p.negative):
            if r.review_id not in members:
                members.add(r)
    vocab = corpus_mod.build_vocab(members, cfg.corpus.min_freq)
    model = build_model(cfg.model.build(len(vocab)), seed=cfg.seed)
    report = train(
        model, pairs, vocab, cfg.training.build(cfg.seed),
        checkpoint_path=cfg.paths.checkpoint, progress_path=cfg.paths.train_log,
    )
    last = report.history[-1].total if report.history else float("nan")
    print(
        f"trained {len(report.history)} steps (final total {last:.4f}) "
        f"-> {cfg.paths.checkpoint}"
    )
    return 0


def stage_reproduce(cfg: PipelineConfig) -> int:
    checkpoint_path = _require(cfg.paths.checkpoint, "reproduce", "model checkpoint")
    model, vocab = load_checkpoint(checkpoint_path)
    reviews = _load_corpus(cfg)
    scorer = NgramFluencyScorer(r.text for r in reviews)
    judge = BowSentimentJudge.from_reviews(reviews)
    products = cfg.reproduction.products
    if products is None:
        products = [
            pid for pid in reviews.product_ids
            if any(r.rating == 5 for r in reviews.for_product(pid))
        ]
    pairs, audits = reproduce_mod.reproduce(
        model, vocab, reviews, products,
        per_product_quota=cfg.reproduction.per_product_quota,
        scorer=scorer, judge=judge, cfg=cfg.filter.build(),
        seed=cfg.seed, parent_limit=cfg.reproduction.parent_limit,
    )
    corpus_mod.save_pairs(pairs, cfg.paths.reproduced_pairs)
    _write_json(cfg.paths.audit, {pid: a.to_record() for pid, a in audits.items()})
    print(
        f"reproduced {len(pairs)} pairs across {len(products)} products "
        f"-> {cfg.paths.reproduced_pairs}"
    )
    return 0


def _summary_groups(reviews, rating: int, group_size: int, min_group_size: int):
    groups = []
    for pid in reviews.product_ids:
        matching = [r for r in reviews.for_product(pid) if r.rating == rating]
        if len(matching) >= min_group_size:
            groups.append(matching[:group_size])
    return groups


def stage_evaluate(cfg: PipelineConfig, baseline_path=None) -> int:
    checkpoint_path = _require(cfg.paths.checkpoint, "evaluate", "model checkpoint")
    pairs_path = _require(cfg.paths.seed_pairs, "evaluate", "pair file")
    model, vocab = load_checkpoint(checkpoint_path)
    reviews = _load_corpus(cfg)
    judge3 = HybridThreeWayJudge.from_reviews(reviews)

    pairs = corpus_mod.load_pairs(pairs_path)
    if cfg.evaluation.max_pairs is not None:
        pairs = pairs[: cfg.evaluation.max_pairs]
    cf_rouge = evaluate_mod.counterfactual_reconstruction_rouge(model, vocab, pairs)

    report = {
        "rouge": {
            "R1": round(cf_rouge.r1.f1 * 100, 2),
            "R2": round(cf_rouge.r2.f1 * 100, 2),
            "RL": round(cf_rouge.rl.f1 * 100, 2),
        },
        "sentiment": {},
    }
    for polarity, rating in (("Pos", 5), ("Neg", 1)):
        groups = _summary_groups(
            reviews, rating, cfg.evaluation.group_size, cfg.evaluation.min_group_size
        )
        if not groups:
            report["sentiment"][polarity] = None
            continue
        summaries = [evaluate_mod.summarize_mean(model, vocab, g) for g in groups]
        sentiment = evaluate_mod.sentiment_precision(
            summaries, judge3, "positive" if polarity == "Pos" else "negative"
        )
        report["sentiment"][polarity] = {
            "Rev": round(sentiment.review_level * 100, 2),
            "Sen": round(sentiment.sentence_level * 100, 2),
        }

    if baseline_path:
        base = json.loads(Path(baseline_path).read_text(encoding="utf-8"))
        difs = {}
        for polarity in ("Pos", "Neg"):
            new = report["sentiment"].get(polarity)
            old = (base.get("sentiment") or {}).get(polarity)
            if new and old:
                difs[polarity] = round(
                    evaluate_mod.dif(old["Rev"], old["Sen"], new["Rev"], new["Sen"]), 2
                )
        report["sentiment"]["Dif"] = difs or None
    else:
        report["sentiment"]["Dif"] = None

    _write_json(cfg.paths.evaluation, report)
    print(f"evaluation report -> {cfg.paths.evaluation}")
    return 0


# --------------------------------------------------------------------- main


def _build_parser() -> _Parser:
    parser = _Parser(prog="sentaug", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name in STAGES + ("pipeline",):
        p = sub.add_parser(name, add_help=True)
        p.add_argument("--config", default=None, help="YAML pipeline config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--service-endpoint", default=None)
        p.add_argument("--mock-service", action="store_true")
        if name in ("optimize-prompt", "pipeline"):
            p.add_argument("--annotations", default=None,
                           help="JSON map of review_id to counterfactual text")
        if name == "evaluate":
            p.add_argument("--baseline", default=None,
                           help="earlier evaluation report to compute Dif against")
        if name == "pipeline":
            p.add_argument("--resume-from", choices=STAGES, default=None)
    return parser


def _effective_config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.service_endpoint is not None:
        cfg.service.endpoint = args.service_endpoint
    cfg.validate()
    logger.info("effective config:\n%s", yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    logger.info("seed: %d", cfg.seed)
    return cfg


def run(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = _effective_config(args)
        mock = args.mock_service

        if args.command == "stats":
            return stage_stats(cfg)
        if args.command == "rewrite":
            return stage_rewrite(cfg, _make_client(cfg, mock))
        if args.command == "optimize-prompt":
            return stage_optimize_prompt(cfg, _make_client(cfg, mock), args.annotations)
        if args.command == "train":
            return stage_train(cfg)
        if args.command == "reproduce":
            return stage_reproduce(cfg)
        if args.command == "evaluate":
            return stage_evaluate(cfg, args.baseline)

        # pipeline: run every stage from the resume point onward
        start = STAGES.index(args.resume_from) if args.resume_from else 0
        for stage in STAGES[start:]:
            logger.info("pipeline stage: %s", stage)
            if stage == "stats":
                stage_stats(cfg)
            elif stage == "rewrite":
                stage_rewrite(cfg, _make_client(cfg, mock))
            elif stage == "optimize-prompt":
                stage_optimize_prompt(cfg, _make_client(cfg, mock), args.annotations)
            elif stage == "train":
                stage_train(cfg)
            elif stage == "reproduce":
                stage_reproduce(cfg)
            elif stage == "evaluate":
                stage_evaluate(cfg, None)
        return 0
    except (CliError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        logger.exception("stage failed: %s", exc)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
