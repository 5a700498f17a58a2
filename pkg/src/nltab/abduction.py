"""Reverse proving: relation sets that would close a failed refutation.

Running the closure rules backwards over an open, saturated branch yields
candidate relations: a (T, F) entry pair with identical argument lists
proposes a subsumption, a (T, T) pair a disjointness.  Candidates surviving
the per-relation filters form the branch basis.  Sets that close every open
branch of the tableau are candidate explanations of the problem's gold
label; `shared` mode admits only relations common to all branch bases,
`hitting` mode enumerates all unions of nonempty per-branch subsets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from . import kb as kbmod
from .kb import (
    KnowledgeBase,
    Relation,
    RelationConflictError,
    RelationFormError,
    RelKind,
    add_relation,
    conflicts_with,
    is_trivial_subsective_dis,
)
from .llf import LexCategory, Shape, atom_count, head_category, is_fully_lexicalized, term_shape
from .tableau import CLOSED, Branch, ProverVerdict, Sign, init_tableau, saturate


class AbductionError(ValueError):
    pass


class AbductionPreconditionError(AbductionError):
    pass


class CombinatorialLimitError(AbductionError):
    pass


@dataclass(frozen=True)
class AbductionConfig:
    """Mode and filter switches for candidate generation.

    The shape and lexicalized switches are listed for completeness; stored
    relations enforce both structurally, so disabling them cannot admit
    extra candidates.
    """

    mode: str = "shared"
    shape: bool = True
    comparable: bool = True
    lexicalized: bool = True
    kb_consistent: bool = True
    drop_b_dis_ab: bool = True
    sentence_consistent: bool = True
    sentence_check_budget: int = 50
    max_tsets: int = 64
    hitting_ceiling: int = 4096


@dataclass(frozen=True)
class BasisRelation:
    relation: Relation
    branch_index: int
    witness: tuple[int, int]


@dataclass(frozen=True)
class ClosingSet:
    """A set of relations that closes every open branch of a tableau."""

    relations: frozenset
    problem_id: str
    atomic_term_count: int
    minimal: bool = True
    impact: int | None = None

    def sorted_relations(self) -> list[Relation]:
        return sorted(self.relations, key=Relation.sort_key)

    def sort_key(self) -> tuple:
        return (
            self.atomic_term_count,
            len(self.relations),
            tuple(r.sort_key() for r in self.sorted_relations()),
        )


_COMPARABLE_CATS = (LexCategory.NOUN, LexCategory.VERB, LexCategory.ADJ_ADV)


def _closing_set(relations, problem_id: str, minimal: bool = True) -> ClosingSet:
    relations = frozenset(relations)
    count = sum(atom_count(r.left) + atom_count(r.right) for r in relations)
    return ClosingSet(relations, problem_id, count, minimal)


def branch_basis(branch: Branch, kb: KnowledgeBase, cfg: AbductionConfig) -> list[BasisRelation]:
    """Filtered backward-closure candidates for one open branch."""
    raw = []
    entries = branch.entries
    for i, a in enumerate(entries):
        for b in entries[i + 1 :]:
            if a.args != b.args:
                continue
            if a.sign is not b.sign:
                t, f = (a, b) if a.sign is Sign.T else (b, a)
                raw.append((RelKind.SUB, t.term, f.term, (t.eid, f.eid)))
            elif a.sign is Sign.T and a.term != b.term:
                raw.append((RelKind.DIS, a.term, b.term, (a.eid, b.eid)))
    basis = []
    seen = set()
    for kind, left, right, witness in raw:
        if cfg.lexicalized and not (is_fully_lexicalized(left) and is_fully_lexicalized(right)):
            continue
        if cfg.shape and Shape.OTHER in (term_shape(left), term_shape(right)):
            continue
        try:
            relation = Relation(kind, left, right)
        except RelationFormError:
            continue
        if cfg.comparable:
            cats = (head_category(relation.left), head_category(relation.right))
            if cats[0] is not cats[1] or cats[0] not in _COMPARABLE_CATS:
                continue
        if cfg.kb_consistent and conflicts_with(kb, relation):
            continue
        if cfg.drop_b_dis_ab and is_trivial_subsective_dis(relation):
            continue
        if relation in seen:
            continue
        seen.add(relation)
        basis.append(BasisRelation(relation, 0, witness))
    basis.sort(key=lambda br: br.relation.sort_key())
    return basis


def _nonempty_subsets(relations):
    ordered = sorted(relations, key=Relation.sort_key)
    for size in range(1, len(ordered) + 1):
        for combo in itertools.combinations(ordered, size):
            yield frozenset(combo)


def shared_closing_sets(bases, cfg: AbductionConfig, problem_id: str = "") -> list[ClosingSet]:
    """Candidate sets built only from relations shared by every branch basis.

    Each shared relation alone closes every branch, so every nonempty subset
    of the shared pool qualifies.
    """
    if not bases:
        return []
    pools = [frozenset(br.relation for br in basis) for basis in bases]
    shared = frozenset.intersection(*pools)
    out = []
    for subset in _nonempty_subsets(shared):
        out.append(_closing_set(subset, problem_id, minimal=len(subset) == 1))
        if len(out) >= cfg.max_tsets:
            break
    return out


def hitting_closing_sets(bases, cfg: AbductionConfig, problem_id: str = "") -> list[ClosingSet]:
    """All unions of one nonempty subset per branch basis, minimal ones
    flagged.  The uncapped combination count is bounded by a hard ceiling
    since the underlying problem is a set-cover search."""
    pools = [sorted({br.relation for br in basis}, key=Relation.sort_key) for basis in bases]
    combos = 1
    for pool in pools:
        combos *= (1 << len(pool)) - 1
    if combos > cfg.hitting_ceiling:
        raise CombinatorialLimitError(
            f"{combos} basis combinations exceed the ceiling of {cfg.hitting_ceiling}"
        )
    unions = []
    seen = set()
    for choice in itertools.product(*[list(_nonempty_subsets(pool)) for pool in pools]):
        union = frozenset().union(*choice)
        if union and union not in seen:
            seen.add(union)
            unions.append(union)
    sets = []
    for union in unions:
        minimal = not any(other < union for other in unions)
        sets.append(_closing_set(union, problem_id, minimal))
    sets.sort(key=ClosingSet.sort_key)
    return sets[: cfg.max_tsets]


def _overlay(kb: KnowledgeBase, relations) -> KnowledgeBase | None:
    """kb extended with candidate relations, or None when they clash."""
    extended = kb
    for relation in sorted(relations, key=Relation.sort_key):
        try:
            extended = add_relation(extended, relation, source="candidate", enforce_comparable=False)
        except RelationConflictError:
            return None
    return extended


def _relations_of(candidate) -> frozenset:
    return candidate.relations if isinstance(candidate, ClosingSet) else frozenset(candidate)


def sentence_consistent(candidate, problem, kb: KnowledgeBase, cfg: AbductionConfig) -> bool:
    """Candidate relations must not refute any sentence of the problem.

    Each sentence is asserted true on its own tableau under kb plus the
    candidate set; a closed tableau means the candidate contradicts the
    sentence (the relations would deny a situation the problem asserts).
    """
    relations = _relations_of(candidate)
    extended = _overlay(kb, relations)
    if extended is None:
        return False
    for sentence in [*problem.premises, problem.hypothesis]:
        t = saturate(init_tableau([], sentence, Sign.T, extended, cfg.sentence_check_budget))
        if t.closed():
            return False
    return True


def _gold_tableau(problem, verdict: ProverVerdict):
    if problem.gold == "entailment":
        return verdict.entail_tableau, Sign.F
    if problem.gold == "contradiction":
        return verdict.contra_tableau, Sign.T
    raise AbductionPreconditionError(f"problem {problem.id} has neutral gold label")


def abduce(problem, verdict: ProverVerdict, kb: KnowledgeBase, cfg: AbductionConfig) -> list[ClosingSet]:
    """Candidate explanations for the gold label of an unsolved problem.

    Pipeline: per-branch bases on the open gold-side tableau, set building
    per mode, consistency drops, inclusion-minimality, and a verification
    rerun (the tableau must actually close under kb plus the candidate).
    Impact scoring is the learner's job.
    """
    tableau, sign = _gold_tableau(problem, verdict)
    if tableau.closed():
        raise AbductionPreconditionError(f"problem {problem.id} is already provable")
    open_branches = [b for b in tableau.branches if b.status != CLOSED]
    bases = []
    for index, branch in enumerate(open_branches):
        basis = [replace(br, branch_index=index) for br in branch_basis(branch, kb, cfg)]
        bases.append(basis)
    if cfg.mode == "shared":
        candidates = shared_closing_sets(bases, cfg, problem.id)
    elif cfg.mode == "hitting":
        candidates = hitting_closing_sets(bases, cfg, problem.id)
    else:
        raise AbductionError(f"unknown abduction mode {cfg.mode!r}")
    survivors = []
    for candidate in candidates:
        extended = _overlay(kb, candidate.relations)
        if extended is None:
            continue
        if cfg.sentence_consistent and not sentence_consistent(candidate, problem, kb, cfg):
            continue
        survivors.append((candidate, extended))
    kept = []
    for candidate, extended in survivors:
        if any(other.relations < candidate.relations for other, _ in survivors):
            continue
        rerun = saturate(
            init_tableau(problem.premises, problem.hypothesis, sign, extended, tableau.budget_max)
        )
        if not rerun.closed():
            continue
        kept.append(replace(candidate, minimal=True))
    kept.sort(key=ClosingSet.sort_key)
    return kept
