import pytest

from sentaug.corpus import Review
from sentaug.rewrite import (
    DEFAULT_INSTRUCTION,
    EvalSet,
    PromptState,
    ReferenceEvaluator,
    RewriteError,
    build_evalset,
    optimize_prompt,
    render_prompt,
    rewrite,
    score_prompt,
    token_edit_ratio,
)
from sentaug.service import MockGenerationClient

TABLE_SOURCE = (
    "Great place to eat. Food always tastes fresh. Frequently visit ray road "
    "location. Ice machine always seems to be working. Very sanitary to scoop "
    "ice with a clean scooper provided."
)
TABLE_FLIP = (
    "Terrible place to eat. Food always tastes stale. Rarely visit ray road "
    "location. Ice machine never seems to be working. Very unsanitary to scoop "
    "ice with a dirty scooper provided."
)


def review(text, rid="r1", rating=5):
    return Review(rid, "p1", text, rating)


class TestRenderPrompt:
    def test_zero_examples(self):
        state = PromptState()
        out = render_prompt(state, review("the query"))
        assert out == f"{DEFAULT_INSTRUCTION}\n\nExample: the query\n\nCounterfactual:"

    def test_default_instruction_text(self):
        assert PromptState().instruction == (
            "Your task is to generate a counterfactual that retains internal "
            "coherence and avoids unnecessary changes."
        )

    def test_examples_render_in_order(self):
        state = PromptState(examples=(("src one", "flip one"), ("src two", "flip two")))
        out = render_prompt(state, review("q"))
        assert out.index("src one") < out.index("src two")
        assert out.index("flip one") < out.index("src two")
        assert out.rstrip().endswith("Counterfactual:")

    def test_default_temperature(self):
        assert PromptState().temperature == 0.2


class TestRewrite:
    def test_canned_flip_matches_reference(self):
        client = MockGenerationClient(responses={TABLE_SOURCE: TABLE_FLIP})
        pair = rewrite(client, PromptState(), review(TABLE_SOURCE))
        assert pair.negative.text == TABLE_FLIP
        assert pair.positive.text == TABLE_SOURCE
        assert pair.negative.rating == 1
        assert pair.origin == "llm_rewrite"

    def test_empty_completion_rejected(self):
        client = MockGenerationClient(responder=lambda q: "   ")
        with pytest.raises(RewriteError):
            rewrite(client, PromptState(), review("anything"))

    def test_deterministic(self):
        client = MockGenerationClient()
        a = rewrite(client, PromptState(), review("the fabric is great"))
        b = rewrite(client, PromptState(), review("the fabric is great"))
        assert a == b

    def test_requires_top_rating(self):
        with pytest.raises(ValueError):
            rewrite(MockGenerationClient(), PromptState(), review("x", rating=4))


def test_prompt_state_file_round_trip(tmp_path):
    state = PromptState(examples=(("a", "b"), ("c", "d")), temperature=0.3)
    path = tmp_path / "prompt.yaml"
    state.save(path)
    assert PromptState.load(path) == state


class TestEditRatio:
    def test_identical(self):
        assert token_edit_ratio("the cat", "the cat") == 0.0

    def test_single_substitution(self):
        assert token_edit_ratio("the cat sat", "the dog sat") == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert token_edit_ratio("a b", "c d") == 1.0

    def test_both_empty(self):
        assert token_edit_ratio("", "") == 0.0


class ScriptedJudge:
    """Sentiment judge driven by a fixed verdict table."""

    def __init__(self, table):
        self.table = table

    def judge(self, text):
        return self.table.get(text, "non_negative")


def test_reference_evaluator_requires_negative_and_minimal_edit():
    judge = ScriptedJudge({"bad text": "negative", "totally different bad": "negative"})
    evaluator = ReferenceEvaluator(judge, max_edit_ratio=0.5)
    assert evaluator.verdict("bad text extra", "bad text") == 1
    assert evaluator.verdict("bad text", "fine text") == 0  # judged non-negative
    assert evaluator.verdict("a b c d e f", "totally different bad") == 0  # too far


class CountingEvaluator:
    def __init__(self, verdicts):
        self.verdicts = list(verdicts)
        self.i = 0

    def verdict(self, source, rewrite_text):
        v = self.verdicts[self.i % len(self.verdicts)]
        self.i += 1
        return v


class TestScorePrompt:
    def setup_method(self):
        self.client = MockGenerationClient()
        self.testset = [review(f"text {i}", rid=f"r{i}") for i in range(4)]

    def test_all_pass(self):
        assert score_prompt(PromptState(), self.testset, self.client, CountingEvaluator([1])) == 1.0

    def test_all_fail(self):
        assert score_prompt(PromptState(), self.testset, self.client, CountingEvaluator([0])) == 0.0

    def test_three_of_four(self):
        score = score_prompt(PromptState(), self.testset, self.client, CountingEvaluator([1, 1, 1, 0]))
        assert score == 0.75

    def test_empty_testset_rejected(self):
        with pytest.raises(ValueError):
            score_prompt(PromptState(), [], self.client, CountingEvaluator([1]))


def test_evalset_composition_invariant():
    items = tuple(review(f"t{i}", rid=f"r{i}") for i in range(3))
    with pytest.raises(ValueError):
        EvalSet(items=items, m=1, n=1)
    EvalSet(items=items, m=2, n=1)


class PromptSizeClient:
    """Completion encodes how many demonstrations the prompt carries."""

    def complete(self, messages, temperature):
        return str(messages[-1]["content"].count("Counterfactual:"))


class ThresholdEvaluator:
    """Item r<i> passes once the prompt carries at least i+1 demonstrations."""

    def verdict(self, source, rewrite_text):
        needed = int(source.split()[-1]) + 1
        return 1 if int(rewrite_text) - 1 >= needed else 0


def make_evalset(k):
    items = tuple(review(f"item {i}", rid=f"e{i}") for i in range(k))
    return EvalSet(items=items, m=k, n=0)


class TestOptimizePrompt:
    def test_delta_stop_after_one_iteration(self):
        result = optimize_prompt(
            PromptState(), make_evalset(4), MockGenerationClient(),
            CountingEvaluator([1]), annotate=lambda r: "flip", delta=0.8, epsilon=0.1, seed=3,
        )
        assert result.stop_reason == "delta"
        assert len(result.trace) == 1
        assert len(result.state.examples) == 1

    def test_epsilon_stop_when_no_improvement(self):
        result = optimize_prompt(
            PromptState(), make_evalset(4), MockGenerationClient(),
            CountingEvaluator([0]), annotate=lambda r: "flip", delta=0.8, epsilon=0.1, seed=3,
        )
        assert result.stop_reason == "epsilon"
        assert len(result.trace) == 1

    def test_seeded_prompt_scores_all_insertion_positions(self):
        seed_state = PromptState(examples=tuple((f"s{i}", f"f{i}") for i in range(4)))
        result = optimize_prompt(
            seed_state, make_evalset(4), MockGenerationClient(),
            CountingEvaluator([1]), annotate=lambda r: "flip", delta=0.8, epsilon=0.1, seed=0,
        )
        assert len(result.trace[0].position_scores) == 5

    def test_tie_break_earliest_position(self):
        seed_state = PromptState(examples=(("s0", "f0"), ("s1", "f1")))
        result = optimize_prompt(
            seed_state, make_evalset(4), MockGenerationClient(),
            CountingEvaluator([1]), annotate=lambda r: "flip", delta=0.8, epsilon=0.1, seed=0,
        )
        assert result.trace[0].chosen_position == 0

    def test_progressive_run_contract(self):
        evalset = make_evalset(6)
        kwargs = dict(
            client=PromptSizeClient(), evaluator=ThresholdEvaluator(),
            annotate=lambda r: "flip", delta=0.95, epsilon=0.01, seed=5,
        )
        result = optimize_prompt(PromptState(), evalset, **kwargs)

        assert len(result.trace) <= len(evalset.items)
        inserted = set()
        for step in result.trace:
            # never scores on already-inserted examples (including this step's)
            assert not (set(step.test_ids) & (inserted | {step.chosen_id}))
            # monotone acceptance: kept permutation beats or ties every sibling
            assert step.score == max(step.position_scores)
            inserted.add(step.chosen_id)

        # replay determinism under the same seed
        again = optimize_prompt(PromptState(), evalset, **kwargs)
        assert again.trace == result.trace
        assert again.state == result.state

    def test_pool_exhausted_sets_warning(self):
        # delta = 1.0 is unreachable; scores improve, so epsilon never fires
        # until the failing pool runs dry.
        evalset = make_evalset(2)
        result = optimize_prompt(
            PromptState(), evalset, PromptSizeClient(), ThresholdEvaluator(),
            annotate=lambda r: "flip", delta=1.0, epsilon=0.01, seed=0,
        )
        assert result.pool_exhausted
        assert result.stop_reason == "pool_exhausted"

    def test_needs_two_items(self):
        with pytest.raises(ValueError):
            optimize_prompt(
                PromptState(), make_evalset(1), MockGenerationClient(),
                CountingEvaluator([1]), annotate=lambda r: "flip",
            )


def test_build_evalset_composition():
    sources = [review(f"item {i}", rid=f"e{i}") for i in range(6)]
    evalset = build_evalset(
        sources, PromptState(), PromptSizeClient(), ThresholdEvaluator(), m=3, n=2, seed=0
    )
    assert evalset.m + evalset.n == len(evalset.items)
    assert evalset.m <= 3 and evalset.n <= 2
