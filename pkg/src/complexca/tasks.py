"""Generators for the ten sequence tasks.

Every task has a fixed vocabulary so one-hot widths do not depend on the
sample. A sample is a token sequence plus a mask marking the positions a
model is scored on (answers, or the predictable tail of a periodic
sequence).

Tasks:
    1 periodic binary pattern          6 yes/no QA, larger vocabulary
    2 periodic pattern, growing period  7 yes/no QA over several statements
    3 symbol counting                  8 as 7 with counting questions
    4 pattern counting                 9 QA with colors and sizes
    5 yes/no QA                       10 as 9 with counting questions
"""
from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Vocab",
    "TaskSample",
    "TaskParams",
    "LEXICON",
    "TASK_NAMES",
    "task_vocab",
    "generate",
    "generate_dataset",
    "encode",
    "decode",
    "sample_from_words",
    "periodic_sample",
    "incremental_sample",
    "symbol_count_sample",
    "pattern_count_sample",
    "qa_sample",
    "to_jsonl",
    "from_jsonl",
    "text_dump",
    "obfuscation_map",
]

LEXICON: dict[str, list[str]] = json.loads(
    resources.files("complexca").joinpath("data/lexicon.json").read_text()
)

TASK_NAMES = {
    1: "periodic",
    2: "incremental-periodic",
    3: "symbol-counting",
    4: "pattern-counting",
    5: "basic-qa",
    6: "harder-qa",
    7: "qa-world",
    8: "qa-world-counting",
    9: "adjective-qa",
    10: "adjective-qa-counting",
}


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be distinct")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, words: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self.index[w] for w in words], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"token {exc.args[0]!r} not in vocabulary") from None

    def words(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[int(i)] for i in ids]


@dataclass(frozen=True, eq=False)
class TaskSample:
    task_id: int
    tokens: np.ndarray  # token ids
    mask: np.ndarray  # bool, True where scored

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.int64)
        mask = np.asarray(self.mask, dtype=bool)
        if tokens.ndim != 1 or tokens.shape != mask.shape:
            raise ValueError("tokens and mask must be 1D of equal length")
        if not mask.any():
            raise ValueError("a sample needs at least one masked position")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "mask", mask)

    def __len__(self) -> int:
        return self.tokens.size

    def __eq__(self, other):
        if not isinstance(other, TaskSample):
            return NotImplemented
        return (
            self.task_id == other.task_id
            and np.array_equal(self.tokens, other.tokens)
            and np.array_equal(self.mask, other.mask)
        )

    def words(self) -> list[str]:
        return task_vocab(self.task_id).words(self.tokens)


@dataclass(frozen=True)
class TaskParams:
    """Generation ranges; defaults are the benchmark settings."""

    max_pattern: int = 10  # tasks 1, 2
    length: int = 36  # tasks 1, 2
    max_prompt: int = 10  # task 3
    max_symbols: int = 45  # task 4
    max_group: int = 3  # task 4 pattern length
    max_names: int = 5  # tasks 5, 6
    max_statements: int = 4  # tasks 7, 8
    max_questions: int = 4  # tasks 7, 8
    max_adj_statements: int = 6  # tasks 9, 10
    max_adj_questions: int = 8  # tasks 9, 10


SYMBOLS = ("A", "B", "C")
QA_WORDS = ("I", "DO", "NOT", "AND", "BUT", ".", "?", "YES", "NO")
ADJ_WORDS = ("A", "WHAT", "IS", "THE", "OF", "COLOR", "SIZE")
COUNT_WORDS = ("HOW", "MANY", "THINGS")

_QA_SIZES = {5: (5, 2), 6: (11, 5), 7: (13, 7), 8: (13, 7)}


def _qa_lexicon(task_id: int) -> tuple[list[str], list[str]]:
    n_names, n_verbs = _QA_SIZES[task_id]
    return LEXICON["names"][:n_names], LEXICON["verbs"][:n_verbs]


def _max_count_word(task_id: int) -> int:
    return 13 if task_id == 8 else len(LEXICON["nouns"])


_VOCABS: dict[int, Vocab] = {}


def task_vocab(task_id: int) -> Vocab:
    if task_id not in TASK_NAMES:
        raise ValueError(f"unknown task id {task_id}")
    if task_id in _VOCABS:
        return _VOCABS[task_id]
    if task_id in (1, 2):
        tokens = ["0", "1"]
    elif task_id == 3:
        tokens = [*SYMBOLS, "x", *(str(i) for i in range(11))]
    elif task_id == 4:
        tokens = [*SYMBOLS, "x", "y", *(str(i) for i in range(1, 46))]
    elif task_id in (5, 6, 7, 8):
        names, verbs = _qa_lexicon(task_id)
        tokens = [*names, *verbs, *QA_WORDS]
        if task_id == 8:
            tokens += [*COUNT_WORDS, *LEXICON["count_words"][:14]]
    else:
        tokens = [*LEXICON["nouns"], *LEXICON["object_verbs"], *LEXICON["colors"], *LEXICON["sizes"],
                  *QA_WORDS, *ADJ_WORDS]
        if task_id == 10:
            tokens += [*COUNT_WORDS, *LEXICON["count_words"][:_max_count_word(10) + 1]]
    _VOCABS[task_id] = Vocab(tuple(tokens))
    return _VOCABS[task_id]


def sample_from_words(task_id: int, words: Sequence[str], mask: Sequence[bool]) -> TaskSample:
    return TaskSample(task_id, task_vocab(task_id).ids(words), mask)


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


# --- binary tasks -------------------------------------------------------------------


def periodic_sample(pattern: Sequence[int], length: int = 36) -> TaskSample:
    n = len(pattern)
    if n < 1 or length <= n:
        raise ValueError("need a nonempty pattern shorter than the sequence")
    words = [str(pattern[i % n]) for i in range(length)]
    return sample_from_words(1, words, [i >= n for i in range(length)])


def incremental_sample(pattern: Sequence[int], length: int = 36) -> TaskSample:
    n = len(pattern)
    if n < 1 or length <= n:
        raise ValueError("need a nonempty pattern shorter than the sequence")
    words: list[str] = []
    reps = 1
    while len(words) < length:
        for s in pattern:
            words += [str(s)] * reps
        reps += 1
    words = words[:length]
    return sample_from_words(2, words, [i >= n for i in range(length)])


# --- counting tasks -----------------------------------------------------------------


def symbol_count_sample(prompt: str | Sequence[str], queries: Sequence[str]) -> TaskSample:
    prompt = list(prompt)
    words = prompt + ["x"]
    mask = [False] * len(words)
    for q in queries:
        words += [q, str(prompt.count(q))]
        mask += [False, True]
    return sample_from_words(3, words, mask)


def pattern_count_sample(groups: Sequence[str], queries: Sequence[str]) -> TaskSample:
    words: list[str] = []
    for g in groups:
        words += [*g, "y"]
    words.append("x")
    mask = [False] * len(words)
    for q in queries:
        count = sum(1 for g in groups if g == q)
        if count < 1:
            raise ValueError(f"queried pattern {q!r} does not occur in the prompt")
        words += [*q, "y", str(count)]
        mask += [False] * (len(q) + 1) + [True]
    return sample_from_words(4, words, mask)


def _gen_symbol_count(rng, p: TaskParams) -> TaskSample:
    n = int(rng.integers(1, p.max_prompt + 1))
    prompt = [_pick(rng, SYMBOLS) for _ in range(n)]
    q = int(rng.integers(1, len(SYMBOLS) + 1))
    queries = [SYMBOLS[i] for i in rng.permutation(len(SYMBOLS))[:q]]
    return symbol_count_sample(prompt, queries)


def _gen_pattern_count(rng, p: TaskParams) -> TaskSample:
    remaining = int(rng.integers(1, p.max_symbols + 1))
    groups = []
    while remaining:
        size = min(int(rng.integers(1, p.max_group + 1)), remaining)
        groups.append("".join(_pick(rng, SYMBOLS) for _ in range(size)))
        remaining -= size
    distinct = sorted(set(groups))
    q = int(rng.integers(1, len(distinct) + 1))
    queries = [distinct[i] for i in rng.permutation(len(distinct))[:q]]
    return pattern_count_sample(groups, queries)


# --- question answering -------------------------------------------------------------


def _join(items: Sequence[str]) -> list[str]:
    out: list[str] = []
    for i, w in enumerate(items):
        if i:
            out.append("AND")
        out += w if isinstance(w, list) else [w]
    return out


def _statement(verb: str, positives: Sequence, negatives: Sequence) -> list[str]:
    """I V P1 AND P2 BUT I DO NOT V N1 AND N2 . (either clause may be absent)"""
    if not positives and not negatives:
        raise ValueError("a statement needs at least one object")
    words: list[str] = []
    if positives:
        words += ["I", verb, *_join(positives)]
    if negatives:
        if positives:
            words.append("BUT")
        words += ["I", "DO", "NOT", verb, *_join(negatives)]
    return words + ["."]


def qa_sample(task_id: int, statements: Sequence[tuple[str, Sequence[str], Sequence[str]]],
              questions: Sequence[tuple[list[str], str]]) -> TaskSample:
    """Assemble statements (verb, positives, negatives) and (question words, answer) pairs."""
    words: list[str] = []
    for verb, pos, neg in statements:
        words += _statement(verb, list(pos), list(neg))
    mask = [False] * len(words)
    for q, answer in questions:
        words += [*q, answer]
        mask += [False] * len(q) + [True]
    return sample_from_words(task_id, words, mask)


def _gen_basic_qa(task_id: int, rng, p: TaskParams) -> TaskSample:
    names, verbs = _qa_lexicon(task_id)
    verb = _pick(rng, verbs)
    n = int(rng.integers(1, min(p.max_names, len(names)) + 1))
    chosen = [names[i] for i in rng.permutation(len(names))[:n]]
    answer = bool(rng.random() < 0.5)
    polarity = rng.random(n) < 0.5
    target = int(rng.integers(n))
    polarity[target] = answer
    pos = [w for w, s in zip(chosen, polarity) if s]
    neg = [w for w, s in zip(chosen, polarity) if not s]
    question = ["DO", "I", verb, chosen[target], "?"]
    return qa_sample(task_id, [(verb, pos, neg)], [(question, "YES" if answer else "NO")])


def _gen_world_qa(task_id: int, rng, p: TaskParams) -> TaskSample:
    names, verbs = _qa_lexicon(task_id)
    facts: dict[tuple[str, str], bool] = {}
    statements = []
    for _ in range(int(rng.integers(1, p.max_statements + 1))):
        verb = _pick(rng, verbs)
        free = [n for n in names if (verb, n) not in facts]
        if not free:
            continue
        k = int(rng.integers(1, min(3, len(free)) + 1))
        chosen = [free[i] for i in rng.permutation(len(free))[:k]]
        pos, neg = [], []
        for name in chosen:
            s = bool(rng.random() < 0.5)
            facts[(verb, name)] = s
            (pos if s else neg).append(name)
        statements.append((verb, pos, neg))
    used_verbs = sorted({v for v, _ in facts}, key=verbs.index)
    yes_pairs = [vn for vn, s in facts.items() if s]
    questions = []
    for _ in range(int(rng.integers(1, p.max_questions + 1))):
        if task_id == 8 and rng.random() < 0.5:
            verb = _pick(rng, used_verbs)
            count = sum(1 for (v, _), s in facts.items() if s and v == verb)
            questions.append((["HOW", "MANY", "THINGS", "DO", "I", verb, "?"], LEXICON["count_words"][count]))
            continue
        if yes_pairs and rng.random() < 0.5:
            verb, name = _pick(rng, yes_pairs)
        else:
            no_pairs = [(v, n) for v in verbs for n in names if not facts.get((v, n), False)]
            verb, name = _pick(rng, no_pairs)
        answer = "YES" if facts.get((verb, name), False) else "NO"
        questions.append((["DO", "I", verb, name, "?"], answer))
    return qa_sample(task_id, statements, questions)


@dataclass
class _Thing:
    verb: str
    positive: bool
    color: str | None = None
    size: str | None = None


def _object_words(noun: str, thing: _Thing | None = None) -> list[str]:
    words = ["A"]
    if thing is not None and thing.positive:
        words += [a for a in (thing.size, thing.color) if a]
    return words + [noun]


def _gen_adjective_qa(task_id: int, rng, p: TaskParams) -> TaskSample:
    nouns, verbs = LEXICON["nouns"], LEXICON["object_verbs"]
    colors, sizes = LEXICON["colors"], LEXICON["sizes"]
    world: dict[str, _Thing] = {}
    statements = []
    for _ in range(int(rng.integers(1, p.max_adj_statements + 1))):
        free = [n for n in nouns if n not in world]
        if not free:
            break
        verb = _pick(rng, verbs)
        k = int(rng.integers(1, min(2, len(free)) + 1))
        pos, neg = [], []
        for i in rng.permutation(len(free))[:k]:
            noun = free[i]
            thing = _Thing(verb, bool(rng.random() < 0.5))
            if thing.positive:
                thing.color = _pick(rng, colors) if rng.random() < 0.5 else None
                thing.size = _pick(rng, sizes) if rng.random() < 0.5 else None
            world[noun] = thing
            (pos if thing.positive else neg).append(_object_words(noun, thing))
        statements.append((verb, pos, neg))
    questions = []
    for _ in range(int(rng.integers(1, p.max_adj_questions + 1))):
        kinds = ["yesno"]
        if any(t.positive and t.color for t in world.values()):
            kinds.append("color")
        if any(t.positive and t.size for t in world.values()):
            kinds.append("size")
        if task_id == 10:
            kinds.append("count")
        kind = _pick(rng, kinds)
        if kind == "count":
            verb = _pick(rng, verbs)
            count = sum(1 for t in world.values() if t.positive and t.verb == verb)
            questions.append((["HOW", "MANY", "THINGS", "DO", "I", verb, "?"], LEXICON["count_words"][count]))
        elif kind in ("color", "size"):
            noun = _pick(rng, sorted(n for n, t in world.items() if t.positive and getattr(t, kind)))
            thing = world[noun]
            q = ["WHAT", "IS", "THE", kind.upper(), "OF", "THE", noun, "I", thing.verb, "?"]
            questions.append((q, getattr(thing, kind)))
        else:
            questions.append(_adjective_yesno(rng, world, nouns, verbs, colors, sizes))
    return qa_sample(task_id, statements, questions)


def _adjective_yesno(rng, world, nouns, verbs, colors, sizes) -> tuple[list[str], str]:
    noun = _pick(rng, nouns)
    thing = world.get(noun)
    verb = thing.verb if thing is not None and rng.random() < 0.75 else _pick(rng, verbs)
    attr = None
    if thing is not None and thing.positive:
        options = [a for a in ("color", "size") if getattr(thing, a)]
        if options and rng.random() < 0.5:
            which = _pick(rng, options)
            pool = colors if which == "color" else sizes
            attr = getattr(thing, which) if rng.random() < 0.5 else _pick(rng, pool)
    yes = thing is not None and thing.positive and thing.verb == verb
    if attr is not None:
        yes = yes and attr in (thing.color, thing.size)
    q = ["DO", "I", verb, "A", *([attr] if attr else []), noun, "?"]
    return q, "YES" if yes else "NO"


# --- dispatch -----------------------------------------------------------------------


def generate(task_id: int, rng: np.random.Generator, params: TaskParams | None = None) -> TaskSample:
    p = params or TaskParams()
    if task_id in (1, 2):
        n = int(rng.integers(1, p.max_pattern + 1))
        pattern = rng.integers(0, 2, size=n).tolist()
        make = periodic_sample if task_id == 1 else incremental_sample
        return make(pattern, p.length)
    if task_id == 3:
        return _gen_symbol_count(rng, p)
    if task_id == 4:
        return _gen_pattern_count(rng, p)
    if task_id in (5, 6):
        return _gen_basic_qa(task_id, rng, p)
    if task_id in (7, 8):
        return _gen_world_qa(task_id, rng, p)
    if task_id in (9, 10):
        return _gen_adjective_qa(task_id, rng, p)
    raise ValueError(f"unknown task id {task_id}")


def generate_dataset(task_id: int, n: int, seed: int, params: TaskParams | None = None) -> list[TaskSample]:
    rng = np.random.Generator(np.random.Philox(seed))
    return [generate(task_id, rng, params) for _ in range(n)]


def encode(sample: TaskSample, vocab: Vocab | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(one-hot matrix (T, |vocab|), mask)."""
    vocab = vocab or task_vocab(sample.task_id)
    if sample.tokens.size and sample.tokens.max() >= len(vocab):
        raise ValueError("sample uses ids outside the vocabulary")
    return np.eye(len(vocab), dtype=np.uint8)[sample.tokens], sample.mask.copy()


def decode(onehot: np.ndarray, vocab: Vocab) -> list[str]:
    return vocab.words(np.argmax(np.asarray(onehot), axis=1))


# --- export -------------------------------------------------------------------------


def to_jsonl(samples: Iterable[TaskSample], transform: dict[str, str] | None = None) -> str:
    lines = []
    for s in samples:
        words = s.words()
        if transform:
            words = [transform[w] for w in words]
        lines.append(json.dumps({"task_id": s.task_id, "tokens": words, "mask": s.mask.tolist()}))
    return "\n".join(lines) + ("\n" if lines else "")


def from_jsonl(text: str) -> list[TaskSample]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            out.append(sample_from_words(int(doc["task_id"]), doc["tokens"], doc["mask"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


def text_dump(samples: Iterable[TaskSample], transform: dict[str, str] | None = None) -> str:
    """One sample per line, masked tokens in brackets."""
    lines = []
    for s in samples:
        words = s.words()
        if transform:
            words = [transform[w] for w in words]
        lines.append(" ".join(f"[{w}]" if m else w for w, m in zip(words, s.mask)))
    return "\n".join(lines) + ("\n" if lines else "")


def obfuscation_map(vocab: Vocab, rng: np.random.Generator) -> dict[str, str]:
    """Random injective remap of tokens to letters (two letters once 52 run out)."""
    letters = list(string.ascii_letters)
    if len(vocab) > len(letters):
        letters = [a + b for a in string.ascii_lowercase for b in string.ascii_lowercase]
    picks = rng.permutation(len(letters))[: len(vocab)]
    return {t: letters[i] for t, i in zip(vocab.tokens, picks)}
