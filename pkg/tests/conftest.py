import pytest

from nltab.harness import bundled_path, load_problems
from nltab.kb import load_kb
from nltab.llf import parse_llf

EQ_1A = "((a.det hedgehog.n) (be.aux (lam x ((a.det boy.n) (lam y (((by.prep y) cradle.v) x))))))"
EQ_2A = "((a.det person.n) (lam x ((an.det animal.n) (lam y ((hold.v y) x)))))"
EQ_2A_VARIANT = (
    "((a.det (young.adj person.n)) (lam x ((a.det (small.adj animal.n)) (lam y ((hold.v y) x)))))"
)


def t(text):
    return parse_llf(text)


@pytest.fixture(scope="session")
def paper_kb():
    return load_kb(bundled_path("paper.kb"))


@pytest.fixture(scope="session")
def reference_kb():
    return load_kb(bundled_path("initial.kb"))


@pytest.fixture(scope="session")
def seed_kb():
    return load_kb(bundled_path("train_seed.kb"))


@pytest.fixture(scope="session")
def corpus():
    return load_problems(bundled_path("desk_corpus.jsonl"))


@pytest.fixture(scope="session")
def worked_example():
    return t(EQ_1A), t(EQ_2A)


@pytest.fixture(scope="session")
def variant_example():
    return t(EQ_1A), t(EQ_2A_VARIANT)
