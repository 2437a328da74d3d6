"""Candidate-question extraction rules and their evaluation against gold
labels.  Both "question" and "c_question" count as positives: the rules
exist to build the candidate pool, not to tell the two apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .corpus import Dataset, LabeledSentence
from .errors import ConfigError, DataError
from .features import FIVE_W1H, tokenize

# Auxiliary words accepted immediately after a 5W1H token (refined rule 2).
AUXILIARIES = frozenset({
    "is", "are", "was", "were", "do", "does", "did", "can", "could",
    "should", "would", "will", "has", "have", "had",
})

# First-person forms accepted at the head of the intent pattern.  A closed
# set, not a bare "i" prefix: "in", "it" etc. must not match.
_I_FORMS = frozenset({"i", "i'm", "i'd", "i've", "im"})
_INTENT_TAIL = frozenset({"find", "know"})


class RuleId(Enum):
    QM = "qm"
    QM_AND_5W1H = "qm_and_5w1h"
    LI_RULE1 = "li_rule1"
    LI_RULE2 = "li_rule2"
    LI_RULE12 = "li_rule12"
    EFRON = "efron"


def rule_qm(s: LabeledSentence) -> bool:
    """Last non-whitespace character is a question mark."""
    stripped = s.text.rstrip()
    return bool(stripped) and stripped[-1] == "?"


def rule_5w1h(s: LabeledSentence) -> bool:
    """Some token, case-insensitive, is one of what/who/where/when/why/how."""
    return any(t.lower() in FIVE_W1H for t in tokenize(s.text))


def rule_li(s: LabeledSentence, variant: int | str = "both",
            with_qm: bool = False) -> bool:
    """Refined 5W1H rules.

    variant 1: the sentence starts with a 5W1H word.
    variant 2: a 5W1H token is immediately followed by an auxiliary
               ("what is", "how does").
    "both": either.  with_qm additionally ORs in the question-mark rule.
    """
    if variant not in (1, 2, "both"):
        raise ConfigError(f"unknown Li rule variant {variant!r}")
    if with_qm and rule_qm(s):
        return True
    tokens = [t.lower() for t in tokenize(s.text)]
    v1 = tokens[0] in FIVE_W1H
    v2 = any(
        a in FIVE_W1H and b in AUXILIARIES
        for a, b in zip(tokens, tokens[1:])
    )
    if variant == 1:
        return v1
    if variant == 2:
        return v2
    return v1 or v2


def _intent_pattern(tokens: list[str]) -> bool:
    for i in range(len(tokens) - 3):
        first, verb, to, tail = tokens[i:i + 4]
        if (
            first in _I_FORMS
            and (verb.startswith("try") or verb in ("like", "need"))
            and to == "to"
            and tail in _INTENT_TAIL
        ):
            return True
    return False


def rule_efron(s: LabeledSentence) -> bool:
    """Question mark, or the first-person intent pattern
    "I(+contraction) try*/like/need to find/know" over consecutive tokens."""
    if rule_qm(s):
        return True
    tokens = [t.lower() for t in tokenize(s.text)]
    return _intent_pattern(tokens)


_PREDICATES: dict[RuleId, Callable[[LabeledSentence], bool]] = {
    RuleId.QM: rule_qm,
    RuleId.QM_AND_5W1H: lambda s: rule_qm(s) or rule_5w1h(s),
    RuleId.LI_RULE1: lambda s: rule_li(s, 1),
    RuleId.LI_RULE2: lambda s: rule_li(s, 2),
    RuleId.LI_RULE12: lambda s: rule_li(s, "both"),
    RuleId.EFRON: rule_efron,
}


def apply_rule(rule: RuleId, s: LabeledSentence) -> bool:
    return _PREDICATES[rule](s)


def extract_candidates(ds: Dataset, rules: Iterable[RuleId]) -> list[str]:
    """Ids of sentences flagged by ANY selected rule, in dataset order."""
    rules = list(rules)
    if not rules:
        raise ConfigError("extract_candidates needs a non-empty rule set")
    return [
        s.id for s in ds.sentences
        if any(apply_rule(r, s) for r in rules)
    ]


def candidate_provenance(
    ds: Dataset, rules: Iterable[RuleId]
) -> list[tuple[str, list[str]]]:
    """(id, [names of rules that flagged it]) for every flagged sentence."""
    rules = list(rules)
    if not rules:
        raise ConfigError("candidate_provenance needs a non-empty rule set")
    out = []
    for s in ds.sentences:
        hits = [r.value for r in rules if apply_rule(r, s)]
        if hits:
            out.append((s.id, hits))
    return out


@dataclass(frozen=True)
class RuleScore:
    precision: float
    recall: float
    f1: float
    false_positive_ids: tuple[str, ...]
    false_negative_ids: tuple[str, ...]


@dataclass(frozen=True)
class RuleReport:
    per_rule: dict[RuleId, RuleScore]


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def is_positive(s: LabeledSentence) -> bool:
    return s.label in ("question", "c_question")


def evaluate_rules(ds: Dataset,
                   rules: Iterable[RuleId] = tuple(RuleId)) -> RuleReport:
    """Precision/recall/F1 per rule over a fully labeled dataset."""
    unlabeled = [s.id for s in ds.sentences if s.label is None]
    if unlabeled:
        raise DataError(
            f"evaluate_rules needs gold labels; missing on {unlabeled[:5]}"
        )
    per_rule = {}
    for rule in rules:
        tp = fp = fn = 0
        fp_ids: list[str] = []
        fn_ids: list[str] = []
        for s in ds.sentences:
            flagged = apply_rule(rule, s)
            gold = is_positive(s)
            if flagged and gold:
                tp += 1
            elif flagged and not gold:
                fp += 1
                fp_ids.append(s.id)
            elif not flagged and gold:
                fn += 1
                fn_ids.append(s.id)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_rule[rule] = RuleScore(
            precision=precision,
            recall=recall,
            f1=f1_score(precision, recall),
            false_positive_ids=tuple(fp_ids),
            false_negative_ids=tuple(fn_ids),
        )
    return RuleReport(per_rule=per_rule)


def rule_indicator_vector(s: LabeledSentence) -> list[int]:
    """0/1 flags in RuleId enum order, for the classifier's indicator input."""
    return [int(apply_rule(r, s)) for r in RuleId]
