"""Corpus ingestion, configuration and the command-line surface.

Corpus files are line-delimited JSON records::

    {"id": "e1", "premises": ["((a.det poodle.n) bark.v)"],
     "hypothesis": "((a.det dog.n) bark.v)", "gold": "entailment",
     "text": "A poodle barks. / A dog barks.", "solvable": true}

`text` is optional display material; `solvable` marks whether the bundled
reference KB suffices to prove the gold label (defaults to true).
"""

from __future__ import annotations

import json
import sys
from argparse import ArgumentParser
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from . import kb as kbmod
from .abduction import AbductionConfig, abduce
from .kb import load_kb, save_kb, strict_conflicts
from .learner import (
    GOLD_LABELS,
    LearnConfig,
    Problem,
    cross_validate,
    evaluate,
    learn,
    stratified_folds,
)
from .llf import Lam, App, Lex, Term, is_entity_constant, parse_llf
from .tableau import classify, export_proof

FILTER_NAMES = (
    "shape",
    "comparable",
    "lexicalized",
    "kb_consistent",
    "drop_b_dis_ab",
    "sentence_consistent",
)


@dataclass(frozen=True)
class Config:
    budget: int = 50
    abduction: AbductionConfig = field(default_factory=AbductionConfig)
    cv_k: int = 3
    seed: int = 0
    max_epochs: int = 10
    jobs: int = 1
    kb_path: str | None = None
    corpus_path: str | None = None
    out_dir: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class HarnessError(ValueError):
    pass


class CorpusError(HarnessError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")


class UsageError(HarnessError):
    pass


def bundled_path(name: str) -> Path:
    """Path of a bundled data file (desk corpus, KBs, sample problem)."""
    return Path(resources.files("nltab").joinpath("data", name))


def _contains_entity(term: Term) -> bool:
    if isinstance(term, Lex):
        return is_entity_constant(term)
    if isinstance(term, App):
        return _contains_entity(term.fun) or _contains_entity(term.arg)
    if isinstance(term, Lam):
        return _contains_entity(term.body)
    return False


def _problem_from_record(record: dict, path, line_no: int) -> Problem:
    for key in ("id", "premises", "hypothesis", "gold"):
        if key not in record:
            raise CorpusError(path, line_no, f"missing field {key!r}")
    pid = record["id"]
    if not isinstance(pid, str) or not pid:
        raise CorpusError(path, line_no, "id must be a nonempty string")
    if record["gold"] not in GOLD_LABELS:
        raise CorpusError(path, line_no, f"unknown gold label {record['gold']!r} in {pid}")
    raw_premises = record["premises"]
    if not isinstance(raw_premises, list) or not raw_premises:
        raise CorpusError(path, line_no, f"{pid}: premises must be a nonempty list")
    terms = []
    for source in [*raw_premises, record["hypothesis"]]:
        try:
            term = parse_llf(source)
        except ValueError as exc:
            raise CorpusError(path, line_no, f"{pid}: {exc}") from None
        if _contains_entity(term):
            raise CorpusError(path, line_no, f"{pid}: reserved entity constant in LLF")
        terms.append(term)
    return Problem(
        id=pid,
        premises=tuple(terms[:-1]),
        hypothesis=terms[-1],
        gold=record["gold"],
        text=record.get("text"),
        solvable=bool(record.get("solvable", True)),
    )


def load_problems(path) -> list[Problem]:
    problems = []
    seen = set()
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(path, line_no, f"bad JSON: {exc}") from None
        problem = _problem_from_record(record, path, line_no)
        if problem.id in seen:
            raise CorpusError(path, line_no, f"duplicate problem id {problem.id!r}")
        seen.add(problem.id)
        problems.append(problem)
    return problems


def parse_filters(spec: str) -> dict:
    """Comma list of enabled filter names; also 'all' or 'none'."""
    if spec == "all":
        return {name: True for name in FILTER_NAMES}
    if spec == "none":
        return {name: False for name in FILTER_NAMES}
    enabled = {name: False for name in FILTER_NAMES}
    for part in spec.split(","):
        name = part.strip()
        if not name:
            continue
        if name not in enabled:
            raise UsageError(f"unknown filter {name!r}; choose from {', '.join(FILTER_NAMES)}")
        enabled[name] = True
    return enabled


def _abduction_config(args) -> AbductionConfig:
    filters = parse_filters(getattr(args, "filters", "all"))
    return AbductionConfig(
        mode=getattr(args, "mode", "shared"),
        max_tsets=getattr(args, "max_tsets", 64),
        **filters,
    )


def _metrics_dict(metrics) -> dict:
    return {
        "accuracy": round(metrics.accuracy, 6),
        "precision": round(metrics.precision, 6),
        "recall": round(metrics.recall, 6),
        "flags": sorted(metrics.flags),
        "confusion": [[g, p, n] for g, p, n in metrics.confusion],
    }


def _out_dirs(out: str) -> dict:
    root = Path(out)
    layout = {name: root / name for name in ("proofs", "kb", "reports")}
    for directory in layout.values():
        directory.mkdir(parents=True, exist_ok=True)
    return layout


def _load_single_problem(args) -> Problem:
    if args.problem:
        text = Path(args.problem).read_text(encoding="utf-8")
        record = json.loads(text)
        if isinstance(record, list):
            raise UsageError("--problem expects a single JSON record")
        return _problem_from_record(record, args.problem, 1)
    if args.corpus and args.id:
        for problem in load_problems(args.corpus):
            if problem.id == args.id:
                return problem
        raise UsageError(f"problem id {args.id!r} not found in {args.corpus}")
    raise UsageError("select a problem with --problem FILE or --corpus FILE --id ID")


class _Parser(ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="nltab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, corpus=False, problem=False, learnish=False):
        p.add_argument("--kb", required=True, help="knowledge base file")
        p.add_argument("--budget", type=int, default=50)
        if corpus:
            p.add_argument("--corpus", required=True)
        if problem:
            p.add_argument("--problem", help="single-problem JSON file")
            p.add_argument("--corpus", help="corpus to pick --id from")
            p.add_argument("--id", help="problem id within --corpus")
        if learnish:
            p.add_argument("--mode", choices=("shared", "hitting"), default="shared")
            p.add_argument("--filters", default="all")
            p.add_argument("--max-tsets", dest="max_tsets", type=int, default=64)

    prove = sub.add_parser("prove", help="classify one problem")
    common(prove, problem=True)
    prove.add_argument("--export", choices=("text", "dot"))
    prove.add_argument("--out", default="out")

    evalp = sub.add_parser("eval", help="metrics of a KB over a corpus")
    common(evalp, corpus=True)
    evalp.add_argument("--jobs", type=int, default=1)
    evalp.add_argument("--out")

    abd = sub.add_parser("abduce", help="candidate relation sets for one problem")
    common(abd, problem=True, learnish=True)

    lrn = sub.add_parser("learn", help="run the abductive learning loop")
    common(lrn, corpus=True, learnish=True)
    lrn.add_argument("--max-epochs", dest="max_epochs", type=int, default=10)
    lrn.add_argument("--seed", type=int, default=0)
    lrn.add_argument("--jobs", type=int, default=1)
    lrn.add_argument("--out", default="out")

    cv = sub.add_parser("cv", help="stratified cross-validation")
    common(cv, corpus=True, learnish=True)
    cv.add_argument("--k", type=int, default=3)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--max-epochs", dest="max_epochs", type=int, default=10)
    cv.add_argument("--jobs", type=int, default=1)
    cv.add_argument("--out")

    kbp = sub.add_parser("kb", help="knowledge base utilities")
    kbsub = kbp.add_subparsers(dest="kb_command", required=True)
    check = kbsub.add_parser("check", help="closure-level consistency scan")
    check.add_argument("--kb", required=True)

    cfg = sub.add_parser("config", help="configuration utilities")
    cfgsub = cfg.add_subparsers(dest="config_command", required=True)
    cfgsub.add_parser("print", help="emit all defaults as JSON")
    return parser


def _cmd_prove(args) -> int:
    kb = load_kb(args.kb)
    problem = _load_single_problem(args)
    verdict = classify(problem.premises, problem.hypothesis, kb, args.budget)
    report = {"id": problem.id, "label": verdict.label, "flags": sorted(verdict.flags)}
    if problem.gold:
        report["gold"] = problem.gold
        report["correct"] = verdict.label == problem.gold
    if args.export:
        layout = _out_dirs(args.out)
        suffix = "dot" if args.export == "dot" else "txt"
        target = layout["proofs"] / f"{problem.id}.{suffix}"
        tableau = (
            verdict.entail_tableau if verdict.label != "contradiction" else verdict.contra_tableau
        )
        target.write_text(export_proof(tableau, args.export), encoding="utf-8")
        report["proof"] = str(target)
    print(json.dumps(report))
    return 0


def _cmd_eval(args) -> int:
    kb = load_kb(args.kb)
    corpus = load_problems(args.corpus)
    metrics = evaluate(corpus, kb, args.budget, args.jobs)
    payload = _metrics_dict(metrics)
    payload["problems"] = len(corpus)
    if args.out:
        layout = _out_dirs(args.out)
        (layout["reports"] / "eval.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
    print(json.dumps(payload))
    return 0


def _cmd_abduce(args) -> int:
    kb = load_kb(args.kb)
    problem = _load_single_problem(args)
    cfg = _abduction_config(args)
    verdict = classify(problem.premises, problem.hypothesis, kb, args.budget)
    candidates = abduce(problem, verdict, kb, cfg)
    for index, candidate in enumerate(candidates):
        for relation in candidate.sorted_relations():
            print(
                f"{relation.line()}  # tset={index} minimal={str(candidate.minimal).lower()}"
                f" terms={candidate.atomic_term_count}"
            )
    if not candidates:
        print(f"# no candidate sets for {problem.id} in mode {cfg.mode}")
    return 0


def _learn_config(args) -> LearnConfig:
    return LearnConfig(
        abduction=_abduction_config(args),
        budget=args.budget,
        max_epochs=args.max_epochs,
    )


def _cmd_learn(args) -> int:
    kb = load_kb(args.kb)
    corpus = load_problems(args.corpus)
    cfg = _learn_config(args)
    result = learn(corpus, kb, cfg)
    layout = _out_dirs(args.out)
    kb_file = layout["kb"] / "learned.kb"
    save_kb(result.kb, kb_file)
    lines = []
    for epoch in result.epochs:
        for commit in result.commits:
            if commit.epoch == epoch.epoch:
                lines.append(
                    json.dumps(
                        {
                            "record": "commit",
                            "epoch": commit.epoch,
                            "problem": commit.problem_id,
                            "relations": list(commit.relations),
                            "impact": commit.impact,
                            "competing": commit.competing,
                        }
                    )
                )
        lines.append(
            json.dumps(
                {
                    "record": "epoch",
                    "epoch": epoch.epoch,
                    "commits": epoch.commits,
                    "accuracy_before": round(epoch.accuracy_before, 6),
                    "accuracy_after": round(epoch.accuracy_after, 6),
                }
            )
        )
    (layout["reports"] / "learn.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = {
        "learned": len(result.learned),
        "epochs": len(result.epochs),
        "converged": result.converged,
        "kb": str(kb_file),
        "accuracy": round(result.epochs[-1].accuracy_after, 6) if result.epochs else None,
    }
    print(json.dumps(summary))
    return 0


def _cmd_cv(args) -> int:
    kb = load_kb(args.kb)
    corpus = load_problems(args.corpus)
    cfg = _learn_config(args)
    result = cross_validate(corpus, kb, args.k, args.seed, cfg, args.jobs)
    payload = {
        "k": args.k,
        "seed": args.seed,
        "train_accuracy": round(result.train_accuracy, 6),
        "test_accuracy": round(result.test_accuracy, 6),
        "test_precision": round(result.test_precision, 6),
        "test_recall": round(result.test_recall, 6),
        "folds": [
            {
                "fold": r.fold,
                "test_size": len(r.test_indices),
                "learned": r.learned,
                "train": _metrics_dict(r.train_metrics),
                "test": _metrics_dict(r.test_metrics),
            }
            for r in result.folds
        ],
    }
    if args.out:
        layout = _out_dirs(args.out)
        (layout["reports"] / "cv.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
    print(json.dumps({k: payload[k] for k in ("k", "train_accuracy", "test_accuracy")}))
    return 0


def _cmd_kb_check(args) -> int:
    kb = load_kb(args.kb)
    findings = strict_conflicts(kb)
    for relation, reason in findings:
        print(json.dumps({"relation": relation.line(), "reason": reason}))
    print(json.dumps({"relations": len(kb), "conflicts": len(findings)}))
    return 1 if findings else 0


def _cmd_config_print(_args) -> int:
    print(json.dumps(Config().to_dict(), indent=2))
    return 0


def run_cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "prove":
            return _cmd_prove(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "abduce":
            return _cmd_abduce(args)
        if args.command == "learn":
            return _cmd_learn(args)
        if args.command == "cv":
            return _cmd_cv(args)
        if args.command == "kb":
            return _cmd_kb_check(args)
        if args.command == "config":
            return _cmd_config_print(args)
        raise UsageError(f"unknown command {args.command!r}")
    except (HarnessError, kbmod.KBError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
