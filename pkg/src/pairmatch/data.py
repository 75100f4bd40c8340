"""Tokenization, synthetic corpus generation, triplet/group sampling, persistence.

The synthetic corpus is a closed-vocabulary template grammar: a base
sentence is ``det subject verb object``; the relation label decides how the
second sentence is derived (negation insertion, specific-to-general word
substitution, appended unrelated clause, synonym swap).  Word lists live in
``resources/`` as plain-text files.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources as _ilr
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractError, DatasetParseError, DegenerateInputError, SamplingError

PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<cls>", "<sep>")

TASK_LABELS: dict[str, tuple[str, ...]] = {
    "nli": ("entailment", "contradiction", "neutral"),
    "pi": ("yes", "no"),
}


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens; empty input is a contract violation."""
    tokens = text.lower().split()
    if not tokens:
        raise DegenerateInputError("cannot tokenize empty or whitespace-only text")
    return tokens


@dataclass(frozen=True)
class SentencePair:
    s_a: str
    s_b: str
    label: str


@dataclass(frozen=True)
class TripletExample:
    """Anchor/positive share a label; negative carries a different one."""

    anchor: SentencePair
    positive: SentencePair
    negative: SentencePair

    def __post_init__(self):
        if self.positive.label != self.anchor.label:
            raise ContractError(
                f"positive label {self.positive.label!r} != anchor label {self.anchor.label!r}"
            )
        if self.negative.label == self.anchor.label:
            raise ContractError(f"negative shares the anchor label {self.anchor.label!r}")


@dataclass(frozen=True)
class PairGroup:
    """Two sentence pairs plus the same-relation indicator (1 iff labels match)."""

    pair_1: SentencePair
    pair_2: SentencePair
    same: int

    def __post_init__(self):
        expected = int(self.pair_1.label == self.pair_2.label)
        if self.same != expected:
            raise ContractError(
                f"same={self.same} inconsistent with labels "
                f"{self.pair_1.label!r}/{self.pair_2.label!r}"
            )


class Vocabulary:
    """Injective token -> id map with fixed reserved ids."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens: list[str] = list(RESERVED_TOKENS) + [
            t for t in tokens if t not in RESERVED_TOKENS
        ]
        self.id_of: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        if len(self.id_of) != len(self.tokens):
            raise ContractError("vocabulary tokens must be unique")

    @classmethod
    def build(cls, dataset: Sequence[SentencePair]) -> "Vocabulary":
        seen: set[str] = set()
        for pair in dataset:
            seen.update(tokenize(pair.s_a))
            seen.update(tokenize(pair.s_b))
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id_of.get(t, UNK_ID) for t in tokens]


# ---------------------------------------------------------------------------
# word-list resources

def _read_words(name: str) -> list[str]:
    text = _ilr.files("pairmatch.resources").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def negation_words() -> list[str]:
    return _read_words("negations.txt")


def _read_pairs(name: str) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for line in _read_words(name):
        specific, general = line.split()
        mapping[specific] = general
    return mapping


def hypernym_map() -> dict[str, str]:
    return _read_pairs("hypernyms.txt")


def synonym_map() -> dict[str, str]:
    return _read_pairs("synonyms.txt")


def approximate_map() -> dict[str, str]:
    return _read_pairs("approximates.txt")


# ---------------------------------------------------------------------------
# synthetic corpus
#
# Premises mix specific nouns, general nouns (hypernyms), exact numerals,
# approximates, and optional trailing clauses across ALL labels, so no single
# token identifies a class: entailment requires noticing that s_b generalizes
# s_a, neutral that s_b appends a clause absent from s_a.

_SUBJECTS = ["dog", "cat", "bird", "horse", "man", "woman", "boy", "girl", "doctor", "farmer"]
_SUBJECT_GENERALS = ["animal", "person"]
_OBJECTS_SING = ["apple", "banana", "bread", "fish", "ball", "doll", "hammer", "shovel"]
_OBJECT_GENERALS_SING = ["fruit", "food", "toy", "tool"]
_OBJECT_PLURAL = {
    "apple": "apples",
    "banana": "bananas",
    "ball": "balls",
    "doll": "dolls",
    "hammer": "hammers",
    "shovel": "shovels",
}
_OBJECT_GENERALS_PLURAL = ["fruits", "toys", "tools"]
_VERBS = [
    ("eats", "eat"),
    ("sees", "see"),
    ("chases", "chase"),
    ("likes", "like"),
    ("finds", "find"),
    ("holds", "hold"),
    ("watches", "watch"),
    ("carries", "carry"),
]
_NUMERALS = ["two", "three", "four", "five"]
_APPROXIMATES = ["some", "several", "many"]
_CLAUSES = [
    ["near", "the", "old", "tree"],
    ["in", "the", "small", "park"],
    ["on", "a", "sunny", "day"],
    ["beside", "the", "quiet", "river"],
    ["after", "the", "long", "morning"],
    ["under", "the", "bright", "sky"],
]


@dataclass
class _Premise:
    subject: str
    verb_sing: str
    verb_base: str
    numeral: str | None  # None -> "the <object form>"
    obj: str  # form already agreeing with the numeral
    clause: tuple[str, ...] | None

    def tokens(self) -> list[str]:
        head = ["the", self.subject, self.verb_sing]
        tail = ["the", self.obj] if self.numeral is None else [self.numeral, self.obj]
        out = head + tail
        if self.clause is not None:
            out += list(self.clause)
        return out

    def generalizable_slots(self, hyper: dict, approx: dict) -> list[int]:
        slots = []
        if self.subject in hyper:
            slots.append(0)
        if self.obj in hyper:
            slots.append(1)
        if self.numeral in approx:
            slots.append(2)
        return slots


def _draw_premise(rng: random.Random) -> _Premise:
    if rng.random() < 0.25:
        subject = rng.choice(_SUBJECT_GENERALS)
    else:
        subject = rng.choice(_SUBJECTS)
    verb_sing, verb_base = rng.choice(_VERBS)
    if rng.random() < 0.4:
        numeral = rng.choice(_APPROXIMATES) if rng.random() < 0.25 else rng.choice(_NUMERALS)
        if rng.random() < 0.25:
            obj = rng.choice(_OBJECT_GENERALS_PLURAL)
        else:
            obj = _OBJECT_PLURAL[rng.choice(sorted(_OBJECT_PLURAL))]
    else:
        numeral = None
        if rng.random() < 0.25:
            obj = rng.choice(_OBJECT_GENERALS_SING)
        else:
            obj = rng.choice(_OBJECTS_SING)
    clause = tuple(rng.choice(_CLAUSES)) if rng.random() < 0.35 else None
    return _Premise(subject, verb_sing, verb_base, numeral, obj, clause)


def _entailment_hypothesis(p: _Premise, rng: random.Random, hyper: dict, approx: dict) -> list[str]:
    # generalize a random non-empty subset of the generalizable slots
    slots = p.generalizable_slots(hyper, approx)
    picked = [s for s in slots if rng.random() < 0.5]
    if not picked:
        picked = [rng.choice(slots)]
    subject = hyper[p.subject] if 0 in picked else p.subject
    obj = hyper[p.obj] if 1 in picked else p.obj
    numeral = approx[p.numeral] if 2 in picked else p.numeral
    out = ["the", subject, p.verb_sing]
    out += ["the", obj] if numeral is None else [numeral, obj]
    if p.clause is not None:
        out += list(p.clause)
    return out


def _contradiction_hypothesis(p: _Premise, rng: random.Random) -> list[str]:
    tail = [p.numeral, p.obj] if p.numeral is not None else ["the", p.obj]
    if p.clause is not None:
        tail = tail + list(p.clause)
    style = rng.randrange(3)
    if style == 0:
        return ["the", p.subject, "never", p.verb_sing] + tail
    if style == 1:
        return ["nobody", p.verb_sing] + tail
    return ["the", p.subject, "does", "not", p.verb_base] + tail


def _neutral_hypothesis(p: _Premise, rng: random.Random) -> list[str]:
    # append a clause the premise does not already carry
    options = [c for c in _CLAUSES if p.clause is None or tuple(c) != p.clause]
    return p.tokens() + rng.choice(options)


def _paraphrase_hypothesis(p: _Premise, rng: random.Random, syn: dict) -> list[str]:
    tokens = p.tokens()
    tokens[2] = syn[p.verb_sing]
    if rng.random() < 0.5:
        tokens[0] = "a"
    return tokens


def _non_paraphrase_hypothesis(p: _Premise, rng: random.Random) -> list[str]:
    tokens = p.tokens()
    slot = rng.randrange(3)
    if slot == 0:
        pool = _SUBJECTS + _SUBJECT_GENERALS
        tokens[1] = rng.choice([s for s in pool if s != p.subject])
    elif slot == 1:
        tokens[2] = rng.choice([v for v, _ in _VERBS if v != p.verb_sing])
    else:
        if p.numeral is None:
            pool = _OBJECTS_SING + _OBJECT_GENERALS_SING
        else:
            pool = sorted(_OBJECT_PLURAL.values()) + _OBJECT_GENERALS_PLURAL
        tokens[4] = rng.choice([o for o in pool if o != p.obj])
    return tokens


def generate_synthetic(n: int, task: str, seed: int) -> list[SentencePair]:
    """Balanced synthetic dataset of ``n`` pairs for ``task`` in {nli, pi}."""
    if task not in TASK_LABELS:
        raise ContractError(f"unknown task {task!r}; expected one of {sorted(TASK_LABELS)}")
    labels = TASK_LABELS[task]
    if n < len(labels):
        raise ContractError(f"need at least {len(labels)} pairs to cover every label, got {n}")
    rng = random.Random(seed)
    hyper = hypernym_map()
    approx = approximate_map()
    syn = synonym_map()

    assigned = [labels[i % len(labels)] for i in range(n)]
    rng.shuffle(assigned)

    pairs: list[SentencePair] = []
    for label in assigned:
        p = _draw_premise(rng)
        if label == "entailment":
            while not p.generalizable_slots(hyper, approx):
                p = _draw_premise(rng)
            hyp = _entailment_hypothesis(p, rng, hyper, approx)
        elif label == "contradiction":
            hyp = _contradiction_hypothesis(p, rng)
        elif label == "neutral":
            hyp = _neutral_hypothesis(p, rng)
        elif label == "yes":
            hyp = _paraphrase_hypothesis(p, rng, syn)
        else:  # "no"
            hyp = _non_paraphrase_hypothesis(p, rng)
        pairs.append(SentencePair(" ".join(p.tokens()), " ".join(hyp), label))
    return pairs


# ---------------------------------------------------------------------------
# sampling

def _label_indices(dataset: Sequence[SentencePair]) -> dict[str, list[int]]:
    by_label: dict[str, list[int]] = {}
    for i, pair in enumerate(dataset):
        by_label.setdefault(pair.label, []).append(i)
    return by_label


def check_sampling_preconditions(dataset: Sequence[SentencePair]) -> dict[str, list[int]]:
    by_label = _label_indices(dataset)
    if len(by_label) < 2:
        raise SamplingError(f"triplet sampling needs >= 2 distinct labels, got {len(by_label)}")
    for label in sorted(by_label):
        if len(by_label[label]) < 2:
            raise SamplingError(f"label {label!r} has a single example; cannot sample a positive")
    return by_label


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_triplets(
    dataset: Sequence[SentencePair],
    batch_size: int,
    seed,
) -> Iterator[list[TripletExample]]:
    """Endless stream of triplet batches.

    Anchor uniform over the dataset; positive uniform over same-label
    examples excluding the anchor index; negative uniform over
    different-label examples.
    """
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    by_label = check_sampling_preconditions(dataset)
    rng = _as_rng(seed)
    n = len(dataset)
    other_indices = {
        label: [i for i in range(n) if dataset[i].label != label] for label in by_label
    }
    while True:
        batch = []
        for _ in range(batch_size):
            a = int(rng.integers(n))
            anchor = dataset[a]
            same = by_label[anchor.label]
            p = a
            while p == a:
                p = same[int(rng.integers(len(same)))]
            diff = other_indices[anchor.label]
            m = diff[int(rng.integers(len(diff)))]
            batch.append(TripletExample(anchor, dataset[p], dataset[m]))
        yield batch


_GROUP_COMBOS = (("anchor", "positive"), ("anchor", "negative"), ("positive", "negative"))


def draw_group_combos(rng: np.random.Generator) -> tuple[int, int]:
    """Indices of two of the three pair combinations, uniform, no replacement."""
    picked = rng.choice(3, size=2, replace=False)
    return int(picked[0]), int(picked[1])


def sample_pair_groups(triplet: TripletExample, seed) -> tuple[PairGroup, PairGroup]:
    """Draw two of the three unordered pair combinations, uniformly, no replacement."""
    rng = _as_rng(seed)
    groups = []
    for c in draw_group_combos(rng):
        first = getattr(triplet, _GROUP_COMBOS[c][0])
        second = getattr(triplet, _GROUP_COMBOS[c][1])
        groups.append(PairGroup(first, second, int(first.label == second.label)))
    return groups[0], groups[1]


# ---------------------------------------------------------------------------
# persistence: one pair per line, tab-separated "s_a<TAB>s_b<TAB>label"

def save_dataset(dataset: Sequence[SentencePair], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair in dataset:
            fh.write(f"{pair.s_a}\t{pair.s_b}\t{pair.label}\n")


def load_dataset(path, task: str) -> list[SentencePair]:
    if task not in TASK_LABELS:
        raise ContractError(f"unknown task {task!r}; expected one of {sorted(TASK_LABELS)}")
    valid = set(TASK_LABELS[task])
    pairs: list[SentencePair] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DatasetParseError(
                f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        s_a, s_b, label = (f.strip() for f in fields)
        if label not in valid:
            raise DatasetParseError(f"{path}:{lineno}: unknown label {label!r}")
        if not s_a or not s_b:
            raise DatasetParseError(f"{path}:{lineno}: empty sentence field")
        pairs.append(SentencePair(s_a, s_b, label))
    return pairs
