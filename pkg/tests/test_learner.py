import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import t
from nltab.abduction import AbductionConfig
from nltab.kb import EMPTY_KB, add_relation, load_kb, sub
from nltab.harness import bundled_path
from nltab.learner import (
    DegenerateFoldError,
    LearnConfig,
    Problem,
    accuracy_impact,
    cross_validate,
    evaluate,
    learn,
    predictions,
    stratified_folds,
)


def problem(pid, premise, hypothesis, gold):
    return Problem(pid, (t(premise),), t(hypothesis), gold)


class TestEvaluate:
    def test_reference_kb_solves_the_marked_subset(self, corpus, reference_kb):
        solvable = [p for p in corpus if p.solvable]
        metrics = evaluate(solvable, reference_kb, 50)
        assert metrics.accuracy == 1.0
        assert len(solvable) == len(corpus) - 1

    def test_empty_corpus_reports_flagged_unit_metrics(self, reference_kb):
        metrics = evaluate([], reference_kb, 50)
        assert metrics.accuracy == metrics.precision == metrics.recall == 1.0
        assert "empty_corpus" in metrics.flags

    def test_zero_budget_predicts_all_neutral(self, corpus, reference_kb):
        metrics = evaluate(corpus, EMPTY_KB, 0)
        assert metrics.recall == 0.0
        assert metrics.precision == 1.0
        assert "no_ec_predictions" in metrics.flags
        neutrals = sum(1 for p in corpus if p.gold == "neutral")
        assert metrics.accuracy == pytest.approx(neutrals / len(corpus))

    def test_confusion_counts_total(self, corpus, seed_kb):
        metrics = evaluate(corpus, seed_kb, 50)
        assert sum(n for _, _, n in metrics.confusion) == len(corpus)

    def test_parallel_matches_serial(self, corpus, reference_kb):
        sample = corpus[:6]
        assert predictions(sample, reference_kb, 50, jobs=2) == predictions(
            sample, reference_kb, 50, jobs=1
        )


IMPACT_CORPUS = [
    problem("p1", "((a.det dog.n) doze.v)", "((a.det cat.n) doze.v)", "entailment"),
    problem("p2", "((a.det dog.n) prowl.v)", "((a.det cat.n) prowl.v)", "entailment"),
    problem("n1", "((a.det dog.n) yawn.v)", "((a.det cat.n) yawn.v)", "neutral"),
    problem("n2", "((a.det dog.n) purr.v)", "((a.det cat.n) purr.v)", "neutral"),
]


class TestAccuracyImpact:
    def test_solving_two_but_breaking_two_scores_zero(self):
        candidate = frozenset([sub(t("dog.n"), t("cat.n"))])
        assert accuracy_impact(candidate, EMPTY_KB, IMPACT_CORPUS, 50) == 0

    def test_absent_lemmas_have_no_impact(self):
        candidate = frozenset([sub(t("heron.n"), t("bird.n"))])
        assert accuracy_impact(candidate, EMPTY_KB, IMPACT_CORPUS, 50) == 0

    def test_single_recoverable_relation_scores_plus_one(self, corpus, reference_kb):
        withheld = sub(t("rose.n"), t("flower.n"))
        without = load_kb(bundled_path("train_seed.kb"))
        target = [p for p in corpus if p.id in ("e06-rose-girl", "n03-violin", "n06-hold-cradle")]
        assert accuracy_impact(frozenset([withheld]), without, target, 50) == 1

    def test_lemma_scoped_scoring_is_exact_here(self, corpus, seed_kb):
        candidate = frozenset([sub(t("poodle.n"), t("dog.n"))])
        full = accuracy_impact(candidate, seed_kb, corpus, 50)
        scoped = accuracy_impact(candidate, seed_kb, corpus, 50, lemma_scoped=True)
        assert full == scoped == 4


@pytest.fixture(scope="module")
def learned(corpus, seed_kb):
    return learn(corpus, seed_kb, LearnConfig())


class TestLearn:
    def test_converges_and_recovers_withheld_relations(self, learned):
        assert learned.converged
        assert len(learned.epochs) <= 10
        lines = {fact.relation.line() for fact in learned.learned}
        assert lines == {
            "sub poodle.n dog.n",
            "sub rose.n flower.n",
            "sub sprint.v run.v",
            "sub dog.n pet.n",
        }

    def test_non_regression_and_positive_impacts(self, corpus, seed_kb, learned):
        before = evaluate(corpus, seed_kb, 50).accuracy
        after = evaluate(corpus, learned.kb, 50).accuracy
        assert after >= before
        assert all(fact.impact >= 1 for fact in learned.learned)

    def test_growth_is_append_only(self, seed_kb, learned):
        assert seed_kb.sub_edges <= learned.kb.sub_edges
        assert seed_kb.dis_pairs <= learned.kb.dis_pairs

    def test_provenance_problems_become_solvable(self, corpus, learned):
        by_id = {p.id: p for p in corpus}
        for fact in learned.learned:
            source = by_id[fact.problem_id]
            assert predictions([source], learned.kb, 50) == [source.gold]

    def test_fixpoint_rerun_commits_nothing(self, corpus, learned):
        again = learn(corpus, learned.kb, LearnConfig())
        assert again.converged
        assert len(again.learned) == 0
        assert len(again.epochs) == 1

    def test_determinism(self, corpus, seed_kb, learned):
        rerun = learn(corpus, seed_kb, LearnConfig())
        assert rerun.learned == learned.learned
        assert rerun.epochs == learned.epochs
        assert rerun.kb.sub_edges == learned.kb.sub_edges

    def test_epoch_accuracy_is_monotone(self, learned):
        for stats in learned.epochs:
            assert stats.accuracy_after >= stats.accuracy_before

    def test_corpus_without_ec_problems_converges_immediately(self, corpus, seed_kb):
        neutrals = [p for p in corpus if p.gold == "neutral"]
        result = learn(neutrals, seed_kb, LearnConfig())
        assert result.converged
        assert len(result.learned) == 0
        assert len(result.epochs) == 1

    def test_precision_guard_on_neutrals(self, corpus, learned):
        neutrals = [p for p in corpus if p.gold == "neutral"]
        assert predictions(neutrals, learned.kb, 50) == ["neutral"] * len(neutrals)


class TestStratifiedFolds:
    def test_perfectly_balanced_case(self):
        corpus = [
            problem(f"{g}{i}", "((a.det dog.n) bark.v)", "((a.det dog.n) bark.v)", g)
            for g in ("entailment", "contradiction", "neutral")
            for i in range(3)
        ]
        folds = stratified_folds(corpus, 3, seed=1)
        for fold in folds:
            labels = sorted(corpus[i].gold for i in fold)
            assert labels == ["contradiction", "entailment", "neutral"]

    def test_desk_corpus_fold_arithmetic(self, corpus):
        folds = stratified_folds(corpus, 3, seed=0)
        for fold in folds:
            assert len(fold) == 10
            counts = {g: 0 for g in ("entailment", "contradiction", "neutral")}
            for i in fold:
                counts[corpus[i].gold] += 1
            assert counts == {"entailment": 4, "contradiction": 3, "neutral": 3}

    def test_same_seed_same_folds(self, corpus):
        assert stratified_folds(corpus, 3, seed=7) == stratified_folds(corpus, 3, seed=7)

    def test_union_is_disjoint_cover(self, corpus):
        folds = stratified_folds(corpus, 3, seed=3)
        flat = sorted(i for fold in folds for i in fold)
        assert flat == list(range(len(corpus)))

    def test_k_larger_than_corpus_rejected(self, corpus):
        with pytest.raises(DegenerateFoldError):
            stratified_folds(corpus, len(corpus) + 1, seed=0)

    def test_scarce_label_rejected(self):
        corpus = [
            problem("e1", "((a.det dog.n) bark.v)", "((a.det dog.n) bark.v)", "entailment"),
            problem("n1", "((a.det dog.n) bark.v)", "((a.det cat.n) bark.v)", "neutral"),
            problem("n2", "((a.det dog.n) doze.v)", "((a.det cat.n) doze.v)", "neutral"),
        ]
        with pytest.raises(DegenerateFoldError):
            stratified_folds(corpus, 2, seed=0)

    def test_k_below_two_rejected(self, corpus):
        with pytest.raises(DegenerateFoldError):
            stratified_folds(corpus, 1, seed=0)

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=12, max_value=40))
    @settings(max_examples=50, deadline=None)
    def test_per_label_counts_within_one(self, seed, size):
        import random as stdlib_random

        rng = stdlib_random.Random(seed)
        labels = ["entailment", "contradiction", "neutral"]
        corpus = [
            problem(f"p{i}", "((a.det dog.n) bark.v)", "((a.det dog.n) bark.v)", rng.choice(labels))
            for i in range(size)
        ]
        counts = {g: sum(1 for p in corpus if p.gold == g) for g in labels}
        if min(counts.values()) < 3:
            return
        folds = stratified_folds(corpus, 3, seed=seed)
        for label in labels:
            per_fold = [sum(1 for i in fold if corpus[i].gold == label) for fold in folds]
            assert max(per_fold) - min(per_fold) <= 1


class TestCrossValidate:
    def test_learning_beats_or_matches_the_frozen_kb(self, corpus, seed_kb):
        result = cross_validate(corpus, seed_kb, k=3, seed=0, cfg=LearnConfig())
        folds = stratified_folds(corpus, 3, seed=0)
        baseline = sum(
            evaluate([corpus[i] for i in fold], seed_kb, 50).accuracy for fold in folds
        ) / len(folds)
        assert result.test_accuracy >= baseline
        assert result.train_accuracy >= baseline

    def test_fold_reports_cover_the_corpus(self, corpus, seed_kb):
        result = cross_validate(corpus, seed_kb, k=3, seed=0, cfg=LearnConfig())
        covered = sorted(i for fold in result.folds for i in fold.test_indices)
        assert covered == list(range(len(corpus)))
