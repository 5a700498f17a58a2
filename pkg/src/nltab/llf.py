"""Lambda logical forms (LLFs): sentence representations for the prover.

An LLF is a lambda term built from lexical constants, variables, abstraction
and application.  The concrete syntax is an s-expression language::

    term := lex | var | "(" "lam" var term ")" | "(" term term+ ")"
    lex  := lemma "." tag            e.g. boy.n, cradle.v, young.adj

Multi-argument application ``(f a b)`` sugars to ``((f a) b)``; ``;`` starts
a line comment.  Lexical tags map onto coarse categories: ``n`` noun, ``v``
verb, ``adj``/``adv`` adjective-or-adverb, ``det``, ``prep``, ``aux``,
``conn`` and ``o`` for everything else.  Entity constants minted during proof
search are lexical constants ``c1.o``, ``c2.o``, ... with reserved lemmas;
they never occur in user-supplied sentences.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class LexCategory(Enum):
    NOUN = "n"
    VERB = "v"
    ADJ_ADV = "adj"
    DET = "det"
    PREP = "prep"
    AUX = "aux"
    CONN = "conn"
    OTHER = "o"


TAG_TO_CATEGORY = {
    "n": LexCategory.NOUN,
    "v": LexCategory.VERB,
    "adj": LexCategory.ADJ_ADV,
    "adv": LexCategory.ADJ_ADV,
    "det": LexCategory.DET,
    "prep": LexCategory.PREP,
    "aux": LexCategory.AUX,
    "conn": LexCategory.CONN,
    "o": LexCategory.OTHER,
}


class Term:
    """Base class for LLF nodes.  Concrete nodes are Lex/Var/Lam/App."""

    __slots__ = ()


@dataclass(frozen=True)
class Lex(Term):
    lemma: str
    cat: LexCategory


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Lam(Term):
    var: str
    body: Term


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term


class Shape(Enum):
    """Size/structure class of a fully applied lexical compound."""

    A = "A"
    AB = "AB"
    ABC_LEFT = "(AB)C"
    ABC_RIGHT = "A(BC)"
    OTHER = "other"


_ENTITY_RE = re.compile(r"^c[0-9]+$")
_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_'-]*$")


def entity_constant(index: int) -> Lex:
    """The index-th entity constant introduced by the prover (c1, c2, ...)."""
    return Lex(f"c{index}", LexCategory.OTHER)


def is_entity_constant(term: Term) -> bool:
    return (
        isinstance(term, Lex)
        and term.cat is LexCategory.OTHER
        and _ENTITY_RE.match(term.lemma) is not None
    )


class LLFError(ValueError):
    """Base error for LLF parsing and analysis."""


class LLFSyntaxError(LLFError):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.pos = pos
        self.line = line
        self.col = col


class UnboundVariableError(LLFSyntaxError):
    def __init__(self, name: str, text: str, pos: int):
        super().__init__(f"unbound variable '{name}'", text, pos)
        self.name = name


class UnknownCategoryError(LLFSyntaxError):
    def __init__(self, tag: str, text: str, pos: int):
        super().__init__(f"unknown category tag '{tag}'", text, pos)
        self.tag = tag


_TOKEN_RE = re.compile(r"\(|\)|[^\s();]+")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == ";":
            nl = text.find("\n", i)
            i = len(text) if nl < 0 else nl + 1
            continue
        if ch.isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise LLFSyntaxError(f"unexpected character {ch!r}", text, i)
        tokens.append((m.group(), i))
        i = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise LLFSyntaxError("unexpected end of input", self.text, len(self.text))
        self.i += 1
        return tok

    def atom(self, token: str, pos: int, bound: frozenset[str]) -> Term:
        if "." in token:
            lemma, _, tag = token.rpartition(".")
            if not lemma or "." in lemma or not _NAME_RE.match(lemma):
                raise LLFSyntaxError(f"malformed lexical token {token!r}", self.text, pos)
            if tag not in TAG_TO_CATEGORY:
                raise UnknownCategoryError(tag, self.text, pos)
            return Lex(lemma, TAG_TO_CATEGORY[tag])
        if token == "lam":
            raise LLFSyntaxError("'lam' is only valid as an abstraction head", self.text, pos)
        if not _NAME_RE.match(token):
            raise LLFSyntaxError(f"malformed token {token!r}", self.text, pos)
        if token not in bound:
            raise UnboundVariableError(token, self.text, pos)
        return Var(token)

    def term(self, bound: frozenset[str]) -> Term:
        token, pos = self.next()
        if token == ")":
            raise LLFSyntaxError("unexpected ')'", self.text, pos)
        if token != "(":
            return self.atom(token, pos, bound)
        head = self.peek()
        if head is None:
            raise LLFSyntaxError("unclosed '('", self.text, pos)
        if head[0] == "lam":
            self.next()
            var_tok, var_pos = self.next()
            if var_tok in ("(", ")") or "." in var_tok or not _NAME_RE.match(var_tok):
                raise LLFSyntaxError("abstraction needs a bare variable name", self.text, var_pos)
            body = self.term(bound | {var_tok})
            self.expect_close(pos)
            return Lam(var_tok, body)
        parts = [self.term(bound)]
        while True:
            tok = self.peek()
            if tok is None:
                raise LLFSyntaxError("unclosed '('", self.text, pos)
            if tok[0] == ")":
                self.next()
                break
            parts.append(self.term(bound))
        if len(parts) < 2:
            raise LLFSyntaxError("application needs at least two terms", self.text, pos)
        term = parts[0]
        for arg in parts[1:]:
            term = App(term, arg)
        return term

    def expect_close(self, open_pos: int) -> None:
        tok = self.peek()
        if tok is None:
            raise LLFSyntaxError("unclosed '('", self.text, open_pos)
        if tok[0] != ")":
            raise LLFSyntaxError(f"expected ')' but found {tok[0]!r}", self.text, tok[1])
        self.next()


def parse_llf(text: str) -> Term:
    """Parse concrete LLF syntax, rejecting unbound variables."""
    parser = _Parser(text)
    term = parser.term(frozenset())
    trailing = parser.peek()
    if trailing is not None:
        raise LLFSyntaxError(f"trailing input {trailing[0]!r}", text, trailing[1])
    return term


def format_llf(term: Term) -> str:
    """Canonical s-expression for a term.

    Application spines print flattened, so ``App(App(by, y), cradle)`` comes
    out as ``(by.prep y cradle.v)``.  ``parse_llf(format_llf(t)) == t``.
    """
    if isinstance(term, Lex):
        return f"{term.lemma}.{term.cat.value}"
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Lam):
        return f"(lam {term.var} {format_llf(term.body)})"
    if isinstance(term, App):
        spine = []
        node = term
        while isinstance(node, App):
            spine.append(node.arg)
            node = node.fun
        spine.append(node)
        spine.reverse()
        return "(" + " ".join(format_llf(part) for part in spine) + ")"
    raise TypeError(f"not a term: {term!r}")


def free_vars(term: Term) -> frozenset[str]:
    if isinstance(term, Var):
        return frozenset((term.name,))
    if isinstance(term, Lam):
        return free_vars(term.body) - {term.var}
    if isinstance(term, App):
        return free_vars(term.fun) | free_vars(term.arg)
    return frozenset()


def _fresh_name(base: str, taken: frozenset[str]) -> str:
    stem = base.rstrip("0123456789") or "x"
    n = 1
    while f"{stem}{n}" in taken:
        n += 1
    return f"{stem}{n}"


def substitute(term: Term, name: str, value: Term) -> Term:
    """Capture-avoiding substitution of `value` for free `name` in `term`."""
    if isinstance(term, Var):
        return value if term.name == name else term
    if isinstance(term, Lex):
        return term
    if isinstance(term, App):
        return App(substitute(term.fun, name, value), substitute(term.arg, name, value))
    if isinstance(term, Lam):
        if term.var == name:
            return term
        if name not in free_vars(term.body):
            return term
        value_free = free_vars(value)
        if term.var in value_free:
            fresh = _fresh_name(term.var, value_free | free_vars(term.body) | {name})
            body = substitute(term.body, term.var, Var(fresh))
            return Lam(fresh, substitute(body, name, value))
        return Lam(term.var, substitute(term.body, name, value))
    raise TypeError(f"not a term: {term!r}")


def _reduce_leftmost(term: Term) -> tuple[Term, bool]:
    if isinstance(term, App):
        if isinstance(term.fun, Lam):
            return substitute(term.fun.body, term.fun.var, term.arg), True
        fun, changed = _reduce_leftmost(term.fun)
        if changed:
            return App(fun, term.arg), True
        arg, changed = _reduce_leftmost(term.arg)
        if changed:
            return App(term.fun, arg), True
        return term, False
    if isinstance(term, Lam):
        body, changed = _reduce_leftmost(term.body)
        if changed:
            return Lam(term.var, body), True
        return term, False
    return term, False


def beta_reduce(term: Term, max_steps: int = 10_000) -> Term:
    """Beta-normal form via leftmost-outermost reduction.

    The sentence fragment is simply typed, so reduction terminates; the step
    cap only guards against untyped garbage fed in from outside.
    """
    for _ in range(max_steps):
        term, changed = _reduce_leftmost(term)
        if not changed:
            return term
    raise LLFError("beta reduction exceeded the step limit; term is likely untyped")


def _lexical_leaves(term: Term) -> list[Lex] | None:
    # None signals a disqualifying node (Var, Lam, entity constant).
    if isinstance(term, Lex):
        return None if is_entity_constant(term) else [term]
    if isinstance(term, App):
        left = _lexical_leaves(term.fun)
        right = _lexical_leaves(term.arg)
        if left is None or right is None:
            return None
        return left + right
    return None


def term_shape(term: Term) -> Shape:
    """Classify a compound as A, AB, (AB)C or A(BC); anything else is Other."""
    leaves = _lexical_leaves(term)
    if leaves is None or len(leaves) > 3:
        return Shape.OTHER
    if isinstance(term, Lex):
        return Shape.A
    if isinstance(term, App):
        if isinstance(term.fun, Lex) and isinstance(term.arg, Lex):
            return Shape.AB
        if (
            isinstance(term.fun, App)
            and isinstance(term.fun.fun, Lex)
            and isinstance(term.fun.arg, Lex)
            and isinstance(term.arg, Lex)
        ):
            return Shape.ABC_LEFT
        if (
            isinstance(term.fun, Lex)
            and isinstance(term.arg, App)
            and isinstance(term.arg.fun, Lex)
            and isinstance(term.arg.arg, Lex)
        ):
            return Shape.ABC_RIGHT
    return Shape.OTHER


class HeadUndefinedError(LLFError):
    pass


_HEAD_CATS = (LexCategory.NOUN, LexCategory.VERB)


def _head_lex(term: Term) -> Lex:
    if isinstance(term, Lex):
        return term
    assert isinstance(term, App)
    fun_head = _head_lex(term.fun)
    arg_head = _head_lex(term.arg)
    # Modifier-head reading: the argument is the head when it is a noun or
    # verb (young *person*, loud *bark*); otherwise the function is.
    return arg_head if arg_head.cat in _HEAD_CATS else fun_head


def head_category(term: Term) -> LexCategory:
    """Category of the head lexical item of a shaped compound."""
    if term_shape(term) is Shape.OTHER:
        raise HeadUndefinedError(f"no head for shapeless term {format_llf(term)}")
    return _head_lex(term).cat


def is_fully_lexicalized(term: Term) -> bool:
    """True iff the term is built purely from non-reserved lexical constants."""
    return _lexical_leaves(term) is not None


def term_key(term: Term) -> str:
    """Stable sort key; used everywhere iteration order matters."""
    return format_llf(term)


def atom_count(term: Term) -> int:
    """Number of lexical-leaf occurrences."""
    if isinstance(term, Lex):
        return 1
    if isinstance(term, App):
        return atom_count(term.fun) + atom_count(term.arg)
    if isinstance(term, Lam):
        return atom_count(term.body)
    return 0
