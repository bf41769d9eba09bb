"""Few-shot counterfactual rewriting and iterative prompt optimization.

A prompt is an instruction plus an ordered demonstration list. The optimizer
grows the demonstration list one annotated example at a time, trying every
insertion position and keeping the permutation that scores best on the
not-yet-inserted remainder of the evaluation set.
"""

from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import yaml

from .corpus import CounterfactualPair, Review, word_tokens
from .scorers import NEGATIVE, SentimentJudge
from .service import GenerationClient

logger = logging.getLogger(__name__)

DEFAULT_INSTRUCTION = (
    "Your task is to generate a counterfactual that retains internal coherence "
    "and avoids unnecessary changes."
)

DEFAULT_TEMPERATURE = 0.2
DEFAULT_SEED_EXAMPLES = 5  # k
DEFAULT_DELTA = 0.80
DEFAULT_EPSILON = 0.10


class RewriteError(Exception):
    """Unusable completion from the generation service."""


@dataclass(frozen=True)
class PromptState:
    instruction: str = DEFAULT_INSTRUCTION
    examples: tuple[tuple[str, str], ...] = ()
    temperature: float = DEFAULT_TEMPERATURE

    def with_examples(self, examples) -> "PromptState":
        return replace(self, examples=tuple(examples))

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {
            "instruction": self.instruction,
            "temperature": self.temperature,
            "examples": [{"source": x, "counterfactual": y} for x, y in self.examples],
        }
        path.write_text(yaml.safe_dump(doc, sort_keys=True, allow_unicode=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PromptState":
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        return cls(
            instruction=doc["instruction"],
            examples=tuple((e["source"], e["counterfactual"]) for e in doc.get("examples", [])),
            temperature=float(doc.get("temperature", DEFAULT_TEMPERATURE)),
        )


@dataclass(frozen=True)
class EvalSet:
    """Annotation-eligible reviews: m problem cases plus n reasonable ones."""

    items: tuple[Review, ...]
    m: int
    n: int

    def __post_init__(self):
        if len(self.items) != self.m + self.n:
            raise ValueError(f"|items| = {len(self.items)} but m + n = {self.m + self.n}")


def render_prompt(state: PromptState, query: Review | str) -> str:
    """Instruction, then Example/Counterfactual blocks in order, then the query."""
    query_text = query.text if isinstance(query, Review) else query
    blocks = [state.instruction]
    for source, counterfactual in state.examples:
        blocks.append(f"Example: {source}\n\nCounterfactual: {counterfactual}")
    blocks.append(f"Example: {query_text}\n\nCounterfactual:")
    return "\n\n".join(blocks)


def rewrite(client: GenerationClient, state: PromptState, source: Review) -> CounterfactualPair:
    """Flip one top-rated review into its negative counterfactual."""
    if source.rating != 5:
        raise ValueError(f"rewrite source must have rating 5, got {source.rating}")
    prompt = render_prompt(state, source)
    completion = client.complete(
        [{"role": "user", "content": prompt}], temperature=state.temperature
    ).strip()
    if not completion:
        raise RewriteError(f"empty completion for review {source.review_id!r}")
    negative = Review(
        review_id=f"{source.review_id}#cf",
        product_id=source.product_id,
        text=completion,
        rating=1,
    )
    return CounterfactualPair(positive=source, negative=negative, origin="llm_rewrite")


def token_edit_ratio(a: str, b: str) -> float:
    """Levenshtein distance over word tokens, normalized by the longer length."""
    ta, tb = word_tokens(a), word_tokens(b)
    if not ta and not tb:
        return 0.0
    prev = list(range(len(tb) + 1))
    for i, tok_a in enumerate(ta, start=1):
        cur = [i] + [0] * len(tb)
        for j, tok_b in enumerate(tb, start=1):
            cost = 0 if tok_a == tok_b else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1] / max(len(ta), len(tb))


class ReferenceEvaluator:
    """Automatic verdict: rewrite must read negative and stay a minimal edit."""

    def __init__(self, judge: SentimentJudge, max_edit_ratio: float = 0.6):
        self.judge = judge
        self.max_edit_ratio = max_edit_ratio

    def verdict(self, source: str, rewrite_text: str) -> int:
        if self.judge.judge(rewrite_text) != NEGATIVE:
            return 0
        if token_edit_ratio(source, rewrite_text) > self.max_edit_ratio:
            return 0
        return 1


def _verdicts(state, testset, client, evaluator, workers=1) -> list[int]:
    def one(review):
        prompt = render_prompt(state, review)
        completion = client.complete(
            [{"role": "user", "content": prompt}], temperature=state.temperature
        ).strip()
        return evaluator.verdict(review.text, completion)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, testset))
    return [one(r) for r in testset]


def score_prompt(state: PromptState, testset, client, evaluator, workers: int = 1) -> float:
    """Success rate of the prompt over the test set, in [0, 1]."""
    if not testset:
        raise ValueError("score_prompt requires a non-empty test set")
    verdicts = _verdicts(state, testset, client, evaluator, workers)
    return sum(verdicts) / len(verdicts)


def build_evalset(
    sources, state: PromptState, client, evaluator, m: int, n: int,
    seed: int = 0, workers: int = 1,
) -> EvalSet:
    """Draw m problem-transformation and n reasonable-transformation reviews,
    judged under the current prompt."""
    verdicts = _verdicts(state, sources, client, evaluator, workers)
    failing = [r for r, v in zip(sources, verdicts) if v == 0]
    passing = [r for r, v in zip(sources, verdicts) if v == 1]
    rng = random.Random(seed)
    chosen_fail = rng.sample(failing, min(m, len(failing)))
    chosen_pass = rng.sample(passing, min(n, len(passing)))
    if len(chosen_fail) < m or len(chosen_pass) < n:
        logger.warning(
            "evalset smaller than requested: %d/%d failing, %d/%d passing",
            len(chosen_fail), m, len(chosen_pass), n,
        )
    return EvalSet(
        items=tuple(chosen_fail + chosen_pass), m=len(chosen_fail), n=len(chosen_pass)
    )


@dataclass(frozen=True)
class OptimizeStep:
    t: int
    chosen_id: str
    test_ids: tuple[str, ...]
    position_scores: tuple[float, ...]
    chosen_position: int
    score: float


@dataclass
class OptimizeResult:
    state: PromptState
    baseline_score: float
    trace: list[OptimizeStep] = field(default_factory=list)
    stop_reason: str = ""
    pool_exhausted: bool = False

    @property
    def final_score(self) -> float:
        return self.trace[-1].score if self.trace else self.baseline_score


def optimize_prompt(
    seed_state: PromptState,
    evalset: EvalSet,
    client: GenerationClient,
    evaluator,
    annotate: Callable[[Review], str],
    delta: float = DEFAULT_DELTA,
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
    workers: int = 1,
) -> OptimizeResult:
    """Grow the demonstration list until the success rate clears ``delta``
    or stops improving by at least ``epsilon``.

    Each iteration draws one candidate review from the failing pool, obtains
    its annotated counterfactual, scores all insertion positions on the
    evaluation items not yet inserted, and keeps the best permutation
    (earliest position wins ties). Inserted items never re-enter the pool
    and are never scored on.
    """
    if len(evalset.items) < 2:
        raise ValueError("optimize_prompt needs an evaluation set with >= 2 items")
    rng = random.Random(seed)
    state = seed_state
    inserted: set[str] = set()
    pool = list(evalset.items)

    previous = score_prompt(state, list(evalset.items), client, evaluator, workers)
    result = OptimizeResult(state=state, baseline_score=previous)
    t = 1
    while True:
        if not pool:
            logger.warning("candidate pool exhausted before a stopping rule fired")
            result.pool_exhausted = True
            result.stop_reason = "pool_exhausted"
            break
        chosen = pool[rng.randrange(len(pool))]
        annotation = annotate(chosen)
        testset = [r for r in evalset.items if r.review_id not in inserted and r.review_id != chosen.review_id]
        if not testset:
            logger.warning("no evaluation items left to score on; stopping")
            result.pool_exhausted = True
            result.stop_reason = "pool_exhausted"
            break

        best_position, best_score, best_verdicts = -1, -1.0, None
        position_scores = []
        examples = list(state.examples)
        for position in range(len(examples) + 1):
            candidate = state.with_examples(
                examples[:position] + [(chosen.text, annotation)] + examples[position:]
            )
            verdicts = _verdicts(candidate, testset, client, evaluator, workers)
            score = sum(verdicts) / len(verdicts)
            position_scores.append(score)
            if score > best_score:  # strict: earliest position wins ties
                best_position, best_score, best_verdicts = position, score, verdicts

        state = state.with_examples(
            examples[:best_position] + [(chosen.text, annotation)] + examples[best_position:]
        )
        inserted.add(chosen.review_id)
        result.trace.append(
            OptimizeStep(
                t=t,
                chosen_id=chosen.review_id,
                test_ids=tuple(r.review_id for r in testset),
                position_scores=tuple(position_scores),
                chosen_position=best_position,
                score=best_score,
            )
        )
        # Refresh the pool to the currently failing items under the new prompt.
        pool = [r for r, v in zip(testset, best_verdicts) if v == 0]

        if best_score > delta:
            result.stop_reason = "delta"
            break
        if best_score - previous < epsilon:
            result.stop_reason = "epsilon"
            break
        previous = best_score
        t += 1

    result.state = state
    return result
