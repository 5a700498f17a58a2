"""Knowledge base of lexical relations.

Two relation kinds are stored: subsumption (``sub a b``, a is-a b) and
disjointness (``dis a b``, a and b are incompatible).  Both sides must be
fully lexicalized compounds of shape A, AB, (AB)C or A(BC).  Subsumption
queries close the edge set reflexively and transitively; disjointness is
inherited downward through subsumption on both sides.

File format, one relation per line, ``#`` comments::

    sub boy.n person.n
    dis clean.adj dirty.adj
    sub webcam.n (digital.adj camera.n)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

from .llf import (
    App,
    Lex,
    Shape,
    Term,
    _Parser,
    format_llf,
    head_category,
    is_fully_lexicalized,
    term_key,
    term_shape,
)


class RelKind(Enum):
    SUB = "sub"
    DIS = "dis"


class KBError(ValueError):
    pass


class RelationFormError(KBError):
    """The candidate relation violates the structural storage invariants."""


class RelationCategoryError(KBError):
    """The two sides have different head categories."""


class RelationConflictError(KBError):
    """The relation clashes with a stored one (lazy A|B vs A<=B check)."""


class KBParseError(KBError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Relation:
    kind: RelKind
    left: Term
    right: Term

    def __post_init__(self):
        for side in (self.left, self.right):
            if not is_fully_lexicalized(side):
                raise RelationFormError(f"not fully lexicalized: {format_llf(side)}")
            if term_shape(side) is Shape.OTHER:
                raise RelationFormError(f"unsupported term shape: {format_llf(side)}")
        if self.kind is RelKind.DIS:
            if self.left == self.right:
                raise RelationFormError(f"self-disjointness: {format_llf(self.left)}")
            # Disjointness is symmetric; store the smaller side first.
            if term_key(self.left) > term_key(self.right):
                left, right = self.right, self.left
                object.__setattr__(self, "left", left)
                object.__setattr__(self, "right", right)

    def line(self) -> str:
        return f"{self.kind.value} {format_llf(self.left)} {format_llf(self.right)}"

    def sort_key(self) -> tuple:
        return (self.kind.value, term_key(self.left), term_key(self.right))


def sub(left: Term, right: Term) -> Relation:
    return Relation(RelKind.SUB, left, right)


def dis(left: Term, right: Term) -> Relation:
    return Relation(RelKind.DIS, left, right)


@dataclass(frozen=True, eq=True)
class KnowledgeBase:
    sub_edges: frozenset[tuple[Term, Term]] = frozenset()
    dis_pairs: frozenset[frozenset[Term]] = frozenset()
    provenance: dict = field(default_factory=dict, compare=False)

    @cached_property
    def _successors(self) -> dict:
        succ: dict = {}
        for a, b in self.sub_edges:
            succ.setdefault(a, set()).add(b)
        return succ

    @cached_property
    def _up_memo(self) -> dict:
        return {}

    def up_set(self, term: Term) -> frozenset[Term]:
        """All terms reachable from `term` through sub edges, plus itself."""
        cached = self._up_memo.get(term)
        if cached is not None:
            return cached
        seen = {term}
        frontier = [term]
        while frontier:
            node = frontier.pop()
            for nxt in self._successors.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        result = frozenset(seen)
        self._up_memo[term] = result
        return result

    def relations(self) -> list[Relation]:
        rels = [Relation(RelKind.SUB, a, b) for a, b in self.sub_edges]
        for pair in self.dis_pairs:
            a, b = sorted(pair, key=term_key)
            rels.append(Relation(RelKind.DIS, a, b))
        rels.sort(key=Relation.sort_key)
        return rels

    def __len__(self) -> int:
        return len(self.sub_edges) + len(self.dis_pairs)


EMPTY_KB = KnowledgeBase()


def entails_sub(kb: KnowledgeBase, a: Term, b: Term) -> bool:
    """a <= b under the reflexive-transitive closure of the sub edges."""
    return a == b or b in kb.up_set(a)


def entails_dis(kb: KnowledgeBase, a: Term, b: Term) -> bool:
    """Disjointness of a and b, inherited downward through subsumption."""
    if not kb.dis_pairs:
        return False
    up_a = kb.up_set(a)
    up_b = kb.up_set(b)
    for pair in kb.dis_pairs:
        p, q = tuple(pair)
        if (p in up_a and q in up_b) or (q in up_a and p in up_b):
            return True
    return False


def conflicts_with(kb: KnowledgeBase, relation: Relation) -> bool:
    """Lazy consistency check against raw edges, not the closure.

    A|B conflicts when A<=B or B<=A is stored directly; A<=B conflicts when
    A|B is stored.  Closure-level checking is `strict_conflicts`.
    """
    a, b = relation.left, relation.right
    if relation.kind is RelKind.DIS:
        return (a, b) in kb.sub_edges or (b, a) in kb.sub_edges
    return frozenset((a, b)) in kb.dis_pairs


def is_trivial_subsective_dis(relation: Relation) -> bool:
    """True for B | MB disjointness, dropped because modifiers are mostly
    subsective (a small animal is an animal)."""
    if relation.kind is not RelKind.DIS:
        return False
    a, b = relation.left, relation.right
    for whole, part in ((a, b), (b, a)):
        if isinstance(whole, App) and isinstance(whole.fun, Lex) and whole.arg == part:
            return True
    return False


def add_relation(
    kb: KnowledgeBase,
    relation: Relation,
    source: str = "initial",
    enforce_comparable: bool = True,
) -> KnowledgeBase:
    """A new KB extended with `relation`; idempotent for duplicates.

    Cross-category relations are rejected at insertion unless
    `enforce_comparable` is off (internal query overlays need that to test
    candidate sets the comparability filter would not admit for storage).
    """
    if enforce_comparable:
        left_cat = head_category(relation.left)
        right_cat = head_category(relation.right)
        if left_cat is not right_cat:
            raise RelationCategoryError(
                f"cross-category relation {relation.line()} "
                f"({left_cat.name.lower()} vs {right_cat.name.lower()})"
            )
    if conflicts_with(kb, relation):
        raise RelationConflictError(
            f"{relation.line()} conflicts with stored relations on the same pair"
        )
    if relation.kind is RelKind.SUB:
        edge = (relation.left, relation.right)
        if edge in kb.sub_edges:
            return kb
        sub_edges = kb.sub_edges | {edge}
        dis_pairs = kb.dis_pairs
    else:
        pair = frozenset((relation.left, relation.right))
        if pair in kb.dis_pairs:
            return kb
        sub_edges = kb.sub_edges
        dis_pairs = kb.dis_pairs | {pair}
    provenance = dict(kb.provenance)
    provenance[relation] = source
    return KnowledgeBase(sub_edges, dis_pairs, provenance)


def strict_conflicts(kb: KnowledgeBase) -> list[tuple[Relation, str]]:
    """Closure-level consistency scan used by `kb check`."""
    findings = []
    for relation in kb.relations():
        a, b = relation.left, relation.right
        if relation.kind is RelKind.DIS:
            if entails_sub(kb, a, b) or entails_sub(kb, b, a):
                findings.append((relation, "disjoint terms are related by subsumption"))
        else:
            if entails_dis(kb, a, b):
                findings.append((relation, "subsumption between disjoint terms"))
    return findings


def _parse_relation_line(line: str, path, line_no: int) -> Relation:
    head, _, rest = line.partition(" ")
    try:
        kind = RelKind(head)
    except ValueError:
        raise KBParseError(path, line_no, f"expected 'sub' or 'dis', got {head!r}") from None
    parser = _Parser(rest)
    try:
        left = parser.term(frozenset())
        right = parser.term(frozenset())
    except ValueError as exc:
        raise KBParseError(path, line_no, str(exc)) from None
    if parser.peek() is not None:
        raise KBParseError(path, line_no, "trailing input after the two terms")
    try:
        return Relation(kind, left, right)
    except RelationFormError as exc:
        raise KBParseError(path, line_no, str(exc)) from None


def load_kb(path) -> KnowledgeBase:
    kb = KnowledgeBase()
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        relation = _parse_relation_line(line, path, line_no)
        try:
            kb = add_relation(kb, relation, source="initial")
        except KBError as exc:
            raise KBParseError(path, line_no, str(exc)) from None
    return kb


def save_kb(kb: KnowledgeBase, path) -> None:
    lines = []
    for relation in kb.relations():
        source = kb.provenance.get(relation, "initial")
        lines.append(f"{relation.line()}  # source={source}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
