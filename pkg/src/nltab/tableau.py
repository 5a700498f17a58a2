"""Signed tableau refutation engine over lambda logical forms.

Entries are ``term : [args] : sign`` triples: the term still expects the
entity constants in ``args`` (innermost first) before yielding a truth value.
Entry creation beta-normalizes the term and moves trailing entity-constant
applications into the argument list, so ``((by c2 cradle.v) c1) : T``
is stored as ``by c2 cradle : [c1] : T``.

Rule inventory
    delta (entity-introducing, non-branching)
        exists_T   {a,an,some} A B : T   ->  A:[n]:T, B:[n]:T   (n fresh)
        forall_F   every A B : F         ->  A:[n]:T, B:[n]:F
        no_F       no A B : F            ->  A:[n]:T, B:[n]:T
    gamma (entity-instantiating, branching)
        exists_F   {a,an,some} A B : F   ->  A:[o]:F | B:[o]:F   (o old)
        forall_T   every A B : T         ->  A:[o]:F | B:[o]:T
        no_T       no A B : T            ->  A:[o]:F | B:[o]:F
    rewriting (non-branching)
        aux        (be X) : args : X'    ->  X : args : X'
        lam_pull   lam x. p : [c]+r : X  ->  p[x/c] : r : X
        pss        by b V : [h]+r : X    ->  V : [h]+r+[b] : X
    modifiers / relative clauses
        mod_T      (M B) : args : T      ->  M:args:T, B:args:T   (M adj/adv)
        mod_F      (M B) : args : F      ->  M:args:F | B:args:F
        which_T    (which V N):args:T    ->  V:args:T, N:args:T
        which_F    (which V N):args:F    ->  V:args:F | N:args:F
    closure
        id    A:args:T with A:args:F
        sub   A:args:T with B:args:F when KB gives A <= B
        dis   A:args:T with B:args:T when KB gives A | B

Strategy: non-branching instances fire first, oldest entry first.  Branching
instances fire oldest-first as well, but gamma instances are additionally
gated on relevance: an (entry, entity) pair is applicable only when some
resulting child could close the branch, possibly after decomposing through
the rewriting and modifier rules.  Without the gate, blind instantiation
over every old entity buries the essential proof under junk splits; with
it the engine emits the minimal proof trees the acceptance suite pins down,
and irrelevant instantiations never detach open branches that abduction
would then have to explain away.  Closure checks are free and run after
every entry addition; each rule application that adds at least one entry
costs one unit of the tableau budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import kb as kbmod
from .llf import (
    App,
    Lam,
    Lex,
    LexCategory,
    Term,
    beta_reduce,
    entity_constant,
    format_llf,
    free_vars,
    is_entity_constant,
    substitute,
)

DELTA_DETS = frozenset({"a", "an", "some"})
FORALL_DETS = frozenset({"every"})
NO_DETS = frozenset({"no"})

OPEN = "open"
CLOSED = "closed"
SATURATED = "saturated"


class Sign(Enum):
    T = "T"
    F = "F"


@dataclass(frozen=True)
class Entry:
    eid: int
    term: Term
    args: tuple[Term, ...]
    sign: Sign
    rule: str
    sources: tuple[int, ...]
    entity: str | None = None

    def triple(self):
        return (self.term, self.args, self.sign)

    def render(self) -> str:
        args = ",".join(format_llf(a) for a in self.args)
        return f"{format_llf(self.term)} : [{args}] : {self.sign.value}"


@dataclass(eq=False)
class Branch:
    entries: list[Entry] = field(default_factory=list)
    applied: set = field(default_factory=set)
    entities: list[Term] = field(default_factory=list)
    status: str = OPEN
    closure: tuple[str, tuple[int, int]] | None = None

    def fork(self) -> "Branch":
        return Branch(list(self.entries), set(self.applied), list(self.entities))

    def has(self, term: Term, args: tuple, sign: Sign) -> bool:
        return any(e.triple() == (term, args, sign) for e in self.entries)


class TableauError(ValueError):
    pass


class FreeVariableError(TableauError):
    pass


@dataclass
class Tableau:
    kb: kbmod.KnowledgeBase
    budget_max: int
    branches: list[Branch] = field(default_factory=list)
    budget_used: int = 0
    next_eid: int = 1
    entity_count: int = 0
    applications: list = field(default_factory=list)
    flags: set = field(default_factory=set)

    def closed(self) -> bool:
        return all(b.status == CLOSED for b in self.branches)

    def open_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.status != CLOSED]


@dataclass(frozen=True)
class ProverVerdict:
    label: str
    entail_tableau: Tableau
    contra_tableau: Tableau
    flags: frozenset


def _strip_entity_args(term: Term, args: tuple) -> tuple[Term, tuple]:
    while isinstance(term, App) and is_entity_constant(term.arg):
        args = (term.arg,) + args
        term = term.fun
    return term, args


def _normalize(term: Term, args: tuple) -> tuple[Term, tuple]:
    return _strip_entity_args(beta_reduce(term), args)


def _det_parts(term: Term):
    if (
        isinstance(term, App)
        and isinstance(term.fun, App)
        and isinstance(term.fun.fun, Lex)
        and term.fun.fun.cat is LexCategory.DET
    ):
        return term.fun.fun.lemma, term.fun.arg, term.arg
    return None


def _which_parts(term: Term):
    if (
        isinstance(term, App)
        and isinstance(term.fun, App)
        and isinstance(term.fun.fun, Lex)
        and term.fun.fun.cat is LexCategory.CONN
        and term.fun.fun.lemma == "which"
    ):
        return term.fun.arg, term.arg
    return None


def _pss_parts(term: Term):
    if (
        isinstance(term, App)
        and isinstance(term.fun, App)
        and isinstance(term.fun.fun, Lex)
        and term.fun.fun.cat is LexCategory.PREP
        and term.fun.fun.lemma == "by"
        and is_entity_constant(term.fun.arg)
    ):
        return term.fun.arg, term.arg
    return None


def _nonbranching_instance(entry: Entry):
    """(rule, drafts) for the one non-branching rule matching `entry`."""
    term, args, sign = entry.term, entry.args, entry.sign
    if isinstance(term, App) and isinstance(term.fun, Lex) and term.fun.cat is LexCategory.AUX:
        return "aux", [(term.arg, args, sign)]
    if isinstance(term, Lam) and args:
        body = substitute(term.body, term.var, args[0])
        return "lam_pull", [(body, args[1:], sign)]
    pss = _pss_parts(term)
    if pss is not None:
        agent, verb = pss
        return "pss", [(verb, args + (agent,), sign)]
    if isinstance(term, App) and isinstance(term.fun, Lex) and term.fun.cat is LexCategory.ADJ_ADV:
        if sign is Sign.T:
            return "mod_T", [(term.fun, args, Sign.T), (term.arg, args, Sign.T)]
        return None  # mod_F branches
    which = _which_parts(term)
    if which is not None and sign is Sign.T:
        verb, noun = which
        return "which_T", [(verb, args, Sign.T), (noun, args, Sign.T)]
    det = _det_parts(term)
    if det is not None and not args:
        lemma, restr, body = det
        if lemma in DELTA_DETS and sign is Sign.T:
            return "exists_T", "delta-TT"
        if lemma in FORALL_DETS and sign is Sign.F:
            return "forall_F", "delta-TF"
        if lemma in NO_DETS and sign is Sign.F:
            return "no_F", "delta-TT"
    return None


_DELTA_SIGNS = {"delta-TT": (Sign.T, Sign.T), "delta-TF": (Sign.T, Sign.F)}


def _gamma_rule(entry: Entry):
    """(rule, restrictor, body, child signs) when `entry` instantiates over
    old entities."""
    det = _det_parts(entry.term)
    if det is None or entry.args:
        return None
    lemma, restr, body = det
    if lemma in DELTA_DETS and entry.sign is Sign.F:
        return "exists_F", restr, body, (Sign.F, Sign.F)
    if lemma in FORALL_DETS and entry.sign is Sign.T:
        return "forall_T", restr, body, (Sign.F, Sign.T)
    if lemma in NO_DETS and entry.sign is Sign.T:
        return "no_T", restr, body, (Sign.F, Sign.F)
    return None


def _branching_instance(entry: Entry):
    """(rule, children) for branching rules that need no entity."""
    term, args, sign = entry.term, entry.args, entry.sign
    if (
        isinstance(term, App)
        and isinstance(term.fun, Lex)
        and term.fun.cat is LexCategory.ADJ_ADV
        and sign is Sign.F
    ):
        return "mod_F", [[(term.fun, args, Sign.F)], [(term.arg, args, Sign.F)]]
    which = _which_parts(term)
    if which is not None and sign is Sign.F:
        verb, noun = which
        return "which_F", [[(verb, args, Sign.F)], [(noun, args, Sign.F)]]
    return None


def _closes_against(branch: Branch, kb, term: Term, args: tuple, sign: Sign) -> bool:
    for other in branch.entries:
        if other.args != args:
            continue
        if other.sign is sign:
            if sign is Sign.T and other.term != term and kbmod.entails_dis(kb, other.term, term):
                return True
        else:
            t_term, f_term = (term, other.term) if sign is Sign.T else (other.term, term)
            if t_term == f_term or kbmod.entails_sub(kb, t_term, f_term):
                return True
    return False


def _virtual_atoms(term: Term, args: tuple, sign: Sign, depth: int = 0):
    """Entries a draft could contribute after decomposition, quantifiers
    excluded.  Used only by the gamma relevance gate."""
    term, args = _normalize(term, args)
    yield term, args, sign
    if depth > 8:
        return
    if isinstance(term, Lam) and args:
        body = substitute(term.body, term.var, args[0])
        yield from _virtual_atoms(body, args[1:], sign, depth + 1)
        return
    if isinstance(term, App) and isinstance(term.fun, Lex):
        if term.fun.cat is LexCategory.AUX:
            yield from _virtual_atoms(term.arg, args, sign, depth + 1)
            return
        if term.fun.cat is LexCategory.ADJ_ADV:
            yield from _virtual_atoms(term.fun, args, sign, depth + 1)
            yield from _virtual_atoms(term.arg, args, sign, depth + 1)
            return
    which = _which_parts(term)
    if which is not None:
        yield from _virtual_atoms(which[0], args, sign, depth + 1)
        yield from _virtual_atoms(which[1], args, sign, depth + 1)
        return
    pss = _pss_parts(term)
    if pss is not None:
        yield from _virtual_atoms(pss[1], args + (pss[0],), sign, depth + 1)


def _gamma_relevant(branch: Branch, kb, children) -> bool:
    for child in children:
        for term, args, sign in child:
            for vt, va, vs in _virtual_atoms(term, args, sign):
                if _closes_against(branch, kb, vt, va, vs):
                    return True
    return False


def check_closure(branch: Branch, kb) -> tuple[str, tuple[int, int]] | None:
    """First closing pair on the branch, scanning id, then sub, then dis."""
    entries = branch.entries
    for i, a in enumerate(entries):
        for b in entries[i + 1 :]:
            if a.args != b.args or a.sign is b.sign or a.term != b.term:
                continue
            t, f = (a, b) if a.sign is Sign.T else (b, a)
            return ("id", (t.eid, f.eid))
    for i, a in enumerate(entries):
        for b in entries[i + 1 :]:
            if a.args != b.args or a.sign is b.sign:
                continue
            t, f = (a, b) if a.sign is Sign.T else (b, a)
            if kbmod.entails_sub(kb, t.term, f.term):
                return ("sub", (t.eid, f.eid))
    for i, a in enumerate(entries):
        for b in entries[i + 1 :]:
            if a.args != b.args or a.sign is not Sign.T or b.sign is not Sign.T:
                continue
            if a.term != b.term and kbmod.entails_dis(kb, a.term, b.term):
                return ("dis", (a.eid, b.eid))
    return None


def _add_entries(t: Tableau, branch: Branch, drafts, rule: str, sources, entity) -> list[int]:
    added = []
    for term, args, sign in drafts:
        if branch.status == CLOSED:
            break
        term, args = _normalize(term, args)
        if branch.has(term, args, sign):
            continue
        entry = Entry(t.next_eid, term, args, sign, rule, tuple(sources), entity)
        t.next_eid += 1
        branch.entries.append(entry)
        added.append(entry.eid)
        closing = check_closure(branch, t.kb)
        if closing is not None:
            branch.status = CLOSED
            branch.closure = closing
    return added


def _select_nonbranching(branch: Branch):
    for entry in branch.entries:
        found = _nonbranching_instance(entry)
        if found is None:
            continue
        rule, drafts = found
        if (rule, entry.eid) in branch.applied:
            continue
        return rule, entry, drafts
    return None


def _select_branching(branch: Branch, kb):
    for entry in branch.entries:
        plain = _branching_instance(entry)
        if plain is not None and (plain[0], entry.eid) not in branch.applied:
            return plain[0], entry, None, plain[1]
        gamma = _gamma_rule(entry)
        if gamma is None:
            continue
        rule, restr, body, signs = gamma
        for entity in branch.entities:
            key = (rule, entry.eid, format_llf(entity))
            if key in branch.applied:
                continue
            children = [[(restr, (entity,), signs[0])], [(body, (entity,), signs[1])]]
            if _gamma_relevant(branch, kb, children):
                return rule, entry, entity, children
    return None


def _apply_nonbranching(t: Tableau, branch: Branch, rule: str, entry: Entry, drafts) -> None:
    entity = None
    if isinstance(drafts, str):  # delta rule: mint the fresh entity lazily
        signs = _DELTA_SIGNS[drafts]
        _, restr, body = _det_parts(entry.term)
        t.entity_count += 1
        entity = entity_constant(t.entity_count)
        branch.entities.append(entity)
        drafts = [(restr, (entity,), signs[0]), (body, (entity,), signs[1])]
    branch.applied.add((rule, entry.eid))
    added = _add_entries(t, branch, drafts, rule, (entry.eid,), format_llf(entity) if entity else None)
    t.applications.append((rule, (entry.eid,), format_llf(entity) if entity else None, tuple(added)))
    if added:
        t.budget_used += 1


def _apply_branching(t: Tableau, branch: Branch, rule, entry, entity, children) -> None:
    ent_name = format_llf(entity) if entity is not None else None
    key = (rule, entry.eid, ent_name) if entity is not None else (rule, entry.eid)
    branch.applied.add(key)
    # A split where some child adds nothing is uninformative: that disjunct
    # already holds on the branch.
    staged = []
    for child in children:
        new = [
            (term, args, sign)
            for term, args, sign in (_normalize(te, ar) + (si,) for te, ar, si in child)
            if not branch.has(term=term, args=args, sign=sign)
        ]
        if not new:
            t.applications.append((rule, (entry.eid,), ent_name, ()))
            return
        staged.append(new)
    forks = [branch.fork() for _ in staged[1:]]
    all_added = []
    all_added.extend(_add_entries(t, branch, staged[0], rule, (entry.eid,), ent_name))
    position = next(i for i, b in enumerate(t.branches) if b is branch)
    for offset, (fork, drafts) in enumerate(zip(forks, staged[1:]), start=1):
        all_added.extend(_add_entries(t, fork, drafts, rule, (entry.eid,), ent_name))
        t.branches.insert(position + offset, fork)
    t.applications.append((rule, (entry.eid,), ent_name, tuple(all_added)))
    if all_added:
        t.budget_used += 1


def init_tableau(
    premise_terms,
    hypothesis_term: Term,
    hypothesis_sign: Sign,
    kb: kbmod.KnowledgeBase,
    budget: int = 50,
) -> Tableau:
    """Root tableau: premises signed T, hypothesis signed as requested."""
    for term in [*premise_terms, hypothesis_term]:
        unbound = free_vars(term)
        if unbound:
            name = sorted(unbound)[0]
            raise FreeVariableError(f"free variable '{name}' in {format_llf(term)}")
    t = Tableau(kb=kb, budget_max=budget)
    root = Branch()
    t.branches.append(root)
    drafts = [(p, (), Sign.T) for p in premise_terms]
    drafts.append((hypothesis_term, (), hypothesis_sign))
    _add_entries(t, root, drafts, "root", (), None)
    return t


def saturate(t: Tableau) -> Tableau:
    """Apply rule instances until every branch closes or saturates, or the
    budget runs out.  Mutates and returns `t`."""
    while True:
        branch = None
        instance = None
        for candidate in t.branches:
            if candidate.status != OPEN:
                continue
            found = _select_nonbranching(candidate)
            if found is not None:
                branch, instance = candidate, ("nb",) + found
                break
            found = _select_branching(candidate, t.kb)
            if found is not None:
                branch, instance = candidate, ("br",) + found
                break
            candidate.status = SATURATED
        if instance is None:
            return t
        if t.budget_used >= t.budget_max:
            t.flags.add("budget_exhausted")
            return t
        if instance[0] == "nb":
            _, rule, entry, drafts = instance
            _apply_nonbranching(t, branch, rule, entry, drafts)
        else:
            _, rule, entry, entity, children = instance
            _apply_branching(t, branch, rule, entry, entity, children)


def classify(
    premises,
    hypothesis: Term,
    kb: kbmod.KnowledgeBase,
    budget: int = 50,
) -> ProverVerdict:
    """Check the problem for entailment (refute hypothesis-false) and for
    contradiction (refute hypothesis-true); neutral when neither closes."""
    entail = saturate(init_tableau(premises, hypothesis, Sign.F, kb, budget))
    contra = saturate(init_tableau(premises, hypothesis, Sign.T, kb, budget))
    flags = set()
    if "budget_exhausted" in entail.flags or "budget_exhausted" in contra.flags:
        flags.add("budget_exhausted")
    if entail.closed() and contra.closed():
        flags.add("both_closed")
        label = "contradiction"
    elif entail.closed():
        label = "entailment"
    elif contra.closed():
        label = "contradiction"
    else:
        label = "neutral"
    return ProverVerdict(label, entail, contra, frozenset(flags))


# ---------------------------------------------------------------------------
# Proof export


def _tree_of(t: Tableau):
    """Regroup the branch list into the proof tree via shared entry prefixes."""

    def build(branches, depth):
        segment = []
        while True:
            alive = [b for b in branches if len(b.entries) > depth]
            if not alive:
                return segment, [], branches[0] if branches else None
            heads = {b.entries[depth].eid for b in alive}
            if len(heads) == 1 and len(alive) == len(branches):
                segment.append(alive[0].entries[depth])
                depth += 1
                continue
            groups = []
            for b in branches:
                key = b.entries[depth].eid if len(b.entries) > depth else None
                if not groups or groups[-1][0] != key:
                    groups.append((key, [b]))
                else:
                    groups[-1][1].append(b)
            children = [build(group, depth) for _, group in groups]
            return segment, children, None

    return build(t.branches, 0)


def _leaf_note(branch: Branch) -> str:
    if branch.status == CLOSED:
        rule, (a, b) = branch.closure
        return f"x ({rule} {a},{b})"
    if branch.status == SATURATED:
        return "open"
    return "unfinished"


def _render_entry(entry: Entry) -> str:
    origin = entry.rule
    if entry.sources:
        origin += " " + ",".join(str(s) for s in entry.sources)
    if entry.entity:
        origin += f" @{entry.entity}"
    return f"{entry.eid}. {entry.render()}  <- {origin}"


def export_proof(t: Tableau, fmt: str = "text") -> str:
    """Deterministic rendering of the proof tree ('text' or 'dot')."""
    if fmt == "text":
        lines = [
            f"tableau: {'closed' if t.closed() else 'open'}"
            f" (budget {t.budget_used}/{t.budget_max})"
        ]

        def walk(node, depth):
            segment, children, leaf = node
            pad = "  " * depth
            for entry in segment:
                lines.append(pad + _render_entry(entry))
            if children:
                for child in children:
                    walk(child, depth + 1)
            elif leaf is not None:
                lines.append(pad + _leaf_note(leaf))

        walk(_tree_of(t), 0)
        return "\n".join(lines) + "\n"
    if fmt == "dot":
        lines = ["digraph tableau {", '  node [shape=box, fontname="monospace"];']
        leaf_ids = iter(range(1, len(t.branches) + 1))

        def walk(node, parent):
            segment, children, leaf = node
            for entry in segment:
                name = f"e{entry.eid}"
                label = f"{entry.eid}: {entry.render()}".replace('"', '\\"')
                lines.append(f'  {name} [label="{label}"];')
                if parent is not None:
                    lines.append(f"  {parent} -> {name};")
                parent = name
            if children:
                for child in children:
                    walk(child, parent)
            elif leaf is not None:
                name = f"leaf{next(leaf_ids)}"
                note = _leaf_note(leaf).replace("x (", "closed (")
                lines.append(f'  {name} [label="{note}", shape=plaintext];')
                if parent is not None:
                    lines.append(f"  {parent} -> {name};")

        walk(_tree_of(t), None)
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise TableauError(f"unknown export format {fmt!r}")
