"""Learning loop: evaluate, abduce on failures, score by accuracy impact,
commit, repeat to fixpoint.  Also stratified cross-validation."""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import kb as kbmod
from .abduction import AbductionConfig, ClosingSet, abduce
from .kb import KnowledgeBase, Relation, add_relation
from .llf import Lam, App, Lex, Term
from .tableau import classify

GOLD_LABELS = ("entailment", "contradiction", "neutral")


@dataclass(frozen=True)
class Problem:
    id: str
    premises: tuple[Term, ...]
    hypothesis: Term
    gold: str
    text: str | None = None
    solvable: bool = True


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    confusion: tuple  # ((gold, predicted, count), ...) over nonzero cells
    flags: frozenset

    def confusion_dict(self) -> dict:
        return {(g, p): n for g, p, n in self.confusion}


@dataclass(frozen=True)
class LearnConfig:
    abduction: AbductionConfig = field(default_factory=AbductionConfig)
    budget: int = 50
    max_epochs: int = 10
    lemma_scoped_impact: bool = False


@dataclass(frozen=True)
class LearnedFact:
    relation: Relation
    problem_id: str
    epoch: int
    impact: int


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    commits: int
    accuracy_before: float
    accuracy_after: float


@dataclass(frozen=True)
class CommitRecord:
    epoch: int
    problem_id: str
    relations: tuple
    impact: int
    competing: int


@dataclass(frozen=True)
class LearnResult:
    kb: KnowledgeBase
    learned: tuple
    epochs: tuple
    commits: tuple
    converged: bool


class LearnerError(ValueError):
    pass


class DegenerateFoldError(LearnerError):
    pass


def _predict(problem: Problem, kb: KnowledgeBase, budget: int) -> str:
    return classify(problem.premises, problem.hypothesis, kb, budget).label


def _predict_job(payload):
    problem, kb, budget = payload
    return _predict(problem, kb, budget)


def predictions(corpus, kb: KnowledgeBase, budget: int = 50, jobs: int = 1) -> list[str]:
    if jobs > 1 and len(corpus) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_predict_job, [(p, kb, budget) for p in corpus]))
    return [_predict(p, kb, budget) for p in corpus]


def evaluate(corpus, kb: KnowledgeBase, budget: int = 50, jobs: int = 1) -> Metrics:
    """Classify every problem and aggregate accuracy, precision and recall.

    Precision and recall are over entailment/contradiction predictions, the
    labels a proof actually commits to; an empty denominator reports 1.0
    together with a flag.
    """
    labels = predictions(corpus, kb, budget, jobs)
    confusion: dict = {}
    correct = 0
    predicted_ec = 0
    predicted_ec_correct = 0
    gold_ec = 0
    for problem, label in zip(corpus, labels):
        confusion[(problem.gold, label)] = confusion.get((problem.gold, label), 0) + 1
        if label == problem.gold:
            correct += 1
        if label in ("entailment", "contradiction"):
            predicted_ec += 1
            if label == problem.gold:
                predicted_ec_correct += 1
        if problem.gold in ("entailment", "contradiction"):
            gold_ec += 1
    flags = set()
    if not corpus:
        flags.add("empty_corpus")
    accuracy = correct / len(corpus) if corpus else 1.0
    if predicted_ec:
        precision = predicted_ec_correct / predicted_ec
    else:
        precision = 1.0
        flags.add("no_ec_predictions")
    if gold_ec:
        recall = predicted_ec_correct / gold_ec
    else:
        recall = 1.0
        flags.add("no_ec_gold")
    cells = tuple(sorted((g, p, n) for (g, p), n in confusion.items()))
    return Metrics(accuracy, precision, recall, cells, frozenset(flags))


def _term_lemmas(term: Term) -> frozenset:
    if isinstance(term, Lex):
        return frozenset((term.lemma,))
    if isinstance(term, App):
        return _term_lemmas(term.fun) | _term_lemmas(term.arg)
    if isinstance(term, Lam):
        return _term_lemmas(term.body)
    return frozenset()


def _problem_lemmas(problem: Problem) -> frozenset:
    lemmas = _term_lemmas(problem.hypothesis)
    for premise in problem.premises:
        lemmas |= _term_lemmas(premise)
    return lemmas


def _extend(kb: KnowledgeBase, relations, source: str = "candidate") -> KnowledgeBase:
    for relation in sorted(relations, key=Relation.sort_key):
        kb = add_relation(kb, relation, source=source, enforce_comparable=False)
    return kb


def accuracy_impact(
    candidate,
    kb: KnowledgeBase,
    corpus,
    budget: int = 50,
    baseline: dict | None = None,
    lemma_scoped: bool = False,
) -> int:
    """Solved-minus-unsolved delta over the corpus when `candidate` is
    adopted.  `baseline` caches per-problem correctness under plain `kb`.
    With `lemma_scoped` on, problems sharing no lemma with the candidate
    reuse the baseline verdict; in this rule inventory a relation over
    absent lemmas can never enable a new closure."""
    relations = candidate.relations if isinstance(candidate, ClosingSet) else frozenset(candidate)
    extended = _extend(kb, relations)
    if baseline is None:
        baseline = {p.id: _predict(p, kb, budget) == p.gold for p in corpus}
    lemmas = frozenset()
    for relation in relations:
        lemmas |= _term_lemmas(relation.left) | _term_lemmas(relation.right)
    delta = 0
    for problem in corpus:
        was_correct = baseline[problem.id]
        if lemma_scoped and not (lemmas & _problem_lemmas(problem)):
            continue
        now_correct = _predict(problem, extended, budget) == problem.gold
        delta += int(now_correct) - int(was_correct)
    return delta


def learn(corpus, kb0: KnowledgeBase, cfg: LearnConfig = LearnConfig()) -> LearnResult:
    """Greedy fixpoint loop over the corpus.

    Per epoch, in corpus order: abduce on each unsolved entailment or
    contradiction problem whose gold-side tableau is open, score the
    surviving candidate sets by accuracy impact, and immediately commit the
    best one provided it has strictly positive impact and makes its own
    problem provable.  Stops when an epoch commits nothing.
    """
    kb = kb0
    learned: list = []
    epochs: list = []
    commit_records: list = []
    converged = False
    for epoch in range(1, cfg.max_epochs + 1):
        accuracy_before = evaluate(corpus, kb, cfg.budget).accuracy
        baseline = {p.id: _predict(p, kb, cfg.budget) == p.gold for p in corpus}
        committed = 0
        for problem in corpus:
            if problem.gold == "neutral" or baseline[problem.id]:
                continue
            verdict = classify(problem.premises, problem.hypothesis, kb, cfg.budget)
            if verdict.label == problem.gold:
                continue
            gold_tab = (
                verdict.entail_tableau
                if problem.gold == "entailment"
                else verdict.contra_tableau
            )
            if gold_tab.closed():
                continue  # wrong for reasons no extra relation can fix
            candidates = abduce(problem, verdict, kb, cfg.abduction)
            viable = []
            for candidate in candidates:
                impact = accuracy_impact(
                    candidate, kb, corpus, cfg.budget, baseline, cfg.lemma_scoped_impact
                )
                if impact <= 0:
                    continue
                extended = _extend(kb, candidate.relations)
                if _predict(problem, extended, cfg.budget) != problem.gold:
                    continue
                viable.append((impact, candidate))
            if not viable:
                continue
            best_impact = max(impact for impact, _ in viable)
            best = next(c for impact, c in viable if impact == best_impact)
            source = f"learned problem={problem.id} epoch={epoch} impact={best_impact}"
            for relation in best.sorted_relations():
                kb = add_relation(
                    kb, relation, source=source, enforce_comparable=cfg.abduction.comparable
                )
                learned.append(LearnedFact(relation, problem.id, epoch, best_impact))
            assert _predict(problem, kb, cfg.budget) == problem.gold
            committed += 1
            commit_records.append(
                CommitRecord(
                    epoch,
                    problem.id,
                    tuple(r.line() for r in best.sorted_relations()),
                    best_impact,
                    len(candidates),
                )
            )
            baseline = {p.id: _predict(p, kb, cfg.budget) == p.gold for p in corpus}
        accuracy_after = evaluate(corpus, kb, cfg.budget).accuracy
        epochs.append(EpochStats(epoch, committed, accuracy_before, accuracy_after))
        if committed == 0:
            converged = True
            break
    return LearnResult(kb, tuple(learned), tuple(epochs), tuple(commit_records), converged)


def stratified_folds(corpus, k: int, seed: int = 0) -> list[list[int]]:
    """k disjoint index lists preserving the gold-label distribution to
    within one problem per label per fold.  Deterministic in the seed."""
    if k < 2:
        raise DegenerateFoldError(f"need at least 2 folds, got {k}")
    if len(corpus) < k:
        raise DegenerateFoldError(f"corpus of {len(corpus)} problems cannot fill {k} folds")
    by_label: dict = {}
    for index, problem in enumerate(corpus):
        by_label.setdefault(problem.gold, []).append(index)
    for label, indices in sorted(by_label.items()):
        if len(indices) < k:
            raise DegenerateFoldError(
                f"label {label!r} has {len(indices)} problems, fewer than {k} folds"
            )
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for label, indices in sorted(by_label.items()):
        shuffled = list(indices)
        rng.shuffle(shuffled)
        for i, index in enumerate(shuffled):
            folds[i % k].append(index)
    return [sorted(fold) for fold in folds]


@dataclass(frozen=True)
class FoldReport:
    fold: int
    test_indices: tuple
    train_metrics: Metrics
    test_metrics: Metrics
    learned: int


@dataclass(frozen=True)
class CVResult:
    folds: tuple
    train_accuracy: float
    test_accuracy: float
    test_precision: float
    test_recall: float


def cross_validate(
    corpus,
    kb0: KnowledgeBase,
    k: int = 3,
    seed: int = 0,
    cfg: LearnConfig = LearnConfig(),
    jobs: int = 1,
) -> CVResult:
    """Stratified k-fold: learn on each training split, evaluate on both."""
    folds = stratified_folds(corpus, k, seed)
    reports = []
    for fold_no, test_indices in enumerate(folds):
        test_set = frozenset(test_indices)
        train = [p for i, p in enumerate(corpus) if i not in test_set]
        test = [corpus[i] for i in test_indices]
        result = learn(train, kb0, cfg)
        train_metrics = evaluate(train, result.kb, cfg.budget, jobs)
        test_metrics = evaluate(test, result.kb, cfg.budget, jobs)
        reports.append(
            FoldReport(fold_no, tuple(test_indices), train_metrics, test_metrics, len(result.learned))
        )
    n = len(reports)
    return CVResult(
        tuple(reports),
        sum(r.train_metrics.accuracy for r in reports) / n,
        sum(r.test_metrics.accuracy for r in reports) / n,
        sum(r.test_metrics.precision for r in reports) / n,
        sum(r.test_metrics.recall for r in reports) / n,
    )
