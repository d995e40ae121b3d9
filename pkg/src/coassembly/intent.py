"""Deterministic utterance matching: catalogs, slots, templates, intents.

Utterance templates are token sequences mixing literal words and slot
holes.  Matching is anchored at both ends: every literal token must match
in order and every hole absorbs one or more input tokens.  Among all
matching templates the winner has the greatest count of matched literal
tokens, with ties broken by fewest holes, then lexicographically smallest
intent id, then template declaration order.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

from .errors import ScriptError

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)

_HOLE_RE = re.compile(r"\{([^{}]*)\}")


def normalize(text: str) -> list[str]:
    """Lowercase, strip ASCII punctuation, split on whitespace runs.

    Non-ASCII characters pass through untouched.  Total function: any
    string yields a (possibly empty) token list.
    """
    return text.lower().translate(_PUNCT_TABLE).split()


@dataclass(frozen=True)
class CatalogEntry:
    canonical: str
    synonyms: tuple[str, ...] = ()


@dataclass(frozen=True)
class Catalog:
    """A named value set with synonyms constraining a slot's fillers."""

    name: str
    entries: tuple[CatalogEntry, ...]

    def validate(self) -> list[str]:
        problems = []
        seen = set()
        for entry in self.entries:
            if not entry.canonical.strip():
                problems.append(f"catalog {self.name!r}: empty canonical value")
            if entry.canonical in seen:
                problems.append(
                    f"catalog {self.name!r}: duplicate canonical {entry.canonical!r}"
                )
            seen.add(entry.canonical)
            for syn in entry.synonyms:
                if not syn.strip():
                    problems.append(
                        f"catalog {self.name!r}: entry {entry.canonical!r} has an empty synonym"
                    )
        return problems

    def surfaces(self, entry: CatalogEntry) -> list[tuple[str, ...]]:
        """Token sequences under which an entry can be referred to."""
        out = [tuple(normalize(entry.canonical))]
        out.extend(tuple(normalize(s)) for s in entry.synonyms)
        return [s for s in out if s]


FREE_TEXT = "free-text"


@dataclass(frozen=True)
class SlotSpec:
    """A typed gap in an utterance template.

    ``kind`` is either ``FREE_TEXT`` or the name of a catalog in the
    enclosing script.
    """

    name: str
    kind: str = FREE_TEXT
    required: bool = True

    @property
    def is_catalog(self) -> bool:
        return self.kind != FREE_TEXT


@dataclass(frozen=True)
class Literal:
    token: str


@dataclass(frozen=True)
class SlotHole:
    slot: str


TemplateToken = Literal | SlotHole


@dataclass(frozen=True)
class UtteranceTemplate:
    """One example phrase; holes are written ``{slot}`` in source text."""

    tokens: tuple[TemplateToken, ...]
    source: str = ""

    @classmethod
    def parse(cls, text: str) -> "UtteranceTemplate":
        tokens: list[TemplateToken] = []
        pos = 0
        for m in _HOLE_RE.finditer(text):
            tokens.extend(Literal(t) for t in normalize(text[pos : m.start()]))
            tokens.append(SlotHole(m.group(1).strip()))
            pos = m.end()
        tokens.extend(Literal(t) for t in normalize(text[pos:]))
        return cls(tokens=tuple(tokens), source=text)

    @property
    def literal_count(self) -> int:
        return sum(1 for t in self.tokens if isinstance(t, Literal))

    @property
    def hole_count(self) -> int:
        return sum(1 for t in self.tokens if isinstance(t, SlotHole))

    def hole_slots(self) -> list[str]:
        return [t.slot for t in self.tokens if isinstance(t, SlotHole)]

    def render(self, values: dict[str, str]) -> str:
        words = []
        for tok in self.tokens:
            if isinstance(tok, Literal):
                words.append(tok.token)
            else:
                words.append(values[tok.slot])
        return " ".join(words)


@dataclass(frozen=True)
class IntentDef:
    id: str
    utterances: tuple[UtteranceTemplate, ...]
    slots: tuple[SlotSpec, ...] = ()

    def slot(self, name: str) -> SlotSpec | None:
        for s in self.slots:
            if s.name == name:
                return s
        return None

    def validate(self, catalogs: dict[str, Catalog]) -> list[str]:
        problems = []
        if not self.utterances:
            problems.append(f"intent {self.id!r}: no utterance templates")
        declared = {s.name for s in self.slots}
        if len(declared) != len(self.slots):
            problems.append(f"intent {self.id!r}: duplicate slot names")
        for s in self.slots:
            if s.is_catalog and s.kind not in catalogs:
                problems.append(
                    f"intent {self.id!r}: slot {s.name!r} references unknown catalog {s.kind!r}"
                )
        for tpl in self.utterances:
            if tpl.literal_count == 0:
                problems.append(
                    f"intent {self.id!r}: template {tpl.source!r} has no literal token"
                )
            prev_hole = False
            for tok in tpl.tokens:
                if isinstance(tok, SlotHole):
                    if prev_hole:
                        problems.append(
                            f"intent {self.id!r}: template {tpl.source!r} has adjacent slot holes"
                        )
                    if tok.slot not in declared:
                        problems.append(
                            f"intent {self.id!r}: template {tpl.source!r} names undeclared slot {tok.slot!r}"
                        )
                    prev_hole = True
                else:
                    prev_hole = False
            holes = tpl.hole_slots()
            if len(holes) != len(set(holes)):
                problems.append(
                    f"intent {self.id!r}: template {tpl.source!r} repeats a slot hole"
                )
        return problems


# --- catalog resolution -----------------------------------------------------


@dataclass(frozen=True)
class Unique:
    canonical: str


@dataclass(frozen=True)
class Ambiguous:
    candidates: frozenset[str]


@dataclass(frozen=True)
class NoEntry:
    pass


Resolution = Unique | Ambiguous | NoEntry


def _contains(surface: tuple[str, ...], phrase: tuple[str, ...]) -> bool:
    n = len(phrase)
    if n == 0 or n > len(surface):
        return False
    return any(surface[i : i + n] == phrase for i in range(len(surface) - n + 1))


def resolve_catalog(catalog: Catalog, phrase: list[str]) -> Resolution:
    """Resolve a token phrase against a catalog.

    An entry matches when the phrase occurs as a contiguous subsequence of
    the entry's canonical or any synonym token sequence.
    """
    key = tuple(phrase)
    hits = []
    for entry in catalog.entries:
        if any(_contains(surface, key) for surface in catalog.surfaces(entry)):
            hits.append(entry.canonical)
    if len(hits) == 1:
        return Unique(hits[0])
    if hits:
        return Ambiguous(frozenset(hits))
    return NoEntry()


def resolve_answer(catalog: Catalog, phrase: list[str]) -> Resolution:
    """Resolve a slot-prompt answer, more forgiving than `resolve_catalog`.

    First tries the plain containment rule; if that yields NoEntry the
    scan is reversed so an answer like "the ring gear please" that wraps
    an entry phrase still resolves.
    """
    direct = resolve_catalog(catalog, phrase)
    if not isinstance(direct, NoEntry):
        return direct
    key = tuple(phrase)
    hits = []
    for entry in catalog.entries:
        if any(_contains(key, surface) for surface in catalog.surfaces(entry)):
            hits.append(entry.canonical)
    if len(hits) == 1:
        return Unique(hits[0])
    if hits:
        return Ambiguous(frozenset(hits))
    return NoEntry()


# --- matching ----------------------------------------------------------------


@dataclass(frozen=True)
class Matched:
    intent: str
    filled: dict[str, str]
    missing_required: frozenset[str]
    literal_score: int


@dataclass(frozen=True)
class NoMatch:
    pass


MatchResult = Matched | NoMatch


def _align(tokens: tuple[TemplateToken, ...], words: tuple[str, ...]):
    """Anchored alignment of template tokens against input words.

    Returns {slot: word span} or None.  Holes absorb at least one word;
    when several alignments exist the one giving each hole the shortest
    span (leftmost-first) wins, which keeps matching deterministic.
    """

    def rec(ti: int, wi: int):
        if ti == len(tokens):
            return {} if wi == len(words) else None
        tok = tokens[ti]
        if isinstance(tok, Literal):
            if wi < len(words) and words[wi] == tok.token:
                return rec(ti + 1, wi + 1)
            return None
        # hole: try spans of increasing length
        for end in range(wi + 1, len(words) + 1):
            rest = rec(ti + 1, end)
            if rest is not None:
                return {tok.slot: words[wi:end], **rest}
        return None

    return rec(0, 0)


class CompiledMatcher:
    """Immutable matcher over a validated set of intents and catalogs.

    Safe to share across threads; matching allocates no shared state.
    """

    def __init__(self, intents: dict[str, IntentDef], catalogs: dict[str, Catalog]):
        self.intents = dict(intents)
        self.catalogs = dict(catalogs)
        # Candidate order realizes the tie-break: score desc, holes asc,
        # intent id asc, declaration index asc.
        self._candidates = sorted(
            (
                (-tpl.literal_count, tpl.hole_count, intent.id, idx, intent, tpl)
                for intent in self.intents.values()
                for idx, tpl in enumerate(intent.utterances)
            ),
            key=lambda c: c[:4],
        )

    def match(self, text: str) -> MatchResult:
        words = tuple(normalize(text))
        if not words:
            return NoMatch()
        for _, _, _, _, intent, tpl in self._candidates:
            if tpl.literal_count + tpl.hole_count > len(words):
                continue
            spans = _align(tpl.tokens, words)
            if spans is None:
                continue
            return self._fill(intent, tpl, spans)
        return NoMatch()

    def _fill(self, intent: IntentDef, tpl: UtteranceTemplate, spans) -> Matched:
        filled: dict[str, str] = {}
        for slot_name, span in spans.items():
            spec = intent.slot(slot_name)
            if spec is None:
                continue
            if spec.is_catalog:
                res = resolve_catalog(self.catalogs[spec.kind], list(span))
                if isinstance(res, Unique):
                    filled[slot_name] = res.canonical
            else:
                filled[slot_name] = " ".join(span)
        missing = frozenset(
            s.name for s in intent.slots if s.required and s.name not in filled
        )
        return Matched(
            intent=intent.id,
            filled=filled,
            missing_required=missing,
            literal_score=tpl.literal_count,
        )


def validate_intents(
    intents: dict[str, IntentDef], catalogs: dict[str, Catalog]
) -> list[str]:
    problems = []
    for catalog in catalogs.values():
        problems.extend(catalog.validate())
    for intent in intents.values():
        problems.extend(intent.validate(catalogs))
    return problems


def compile_matcher(
    intents: dict[str, IntentDef], catalogs: dict[str, Catalog]
) -> CompiledMatcher:
    problems = validate_intents(intents, catalogs)
    if problems:
        raise ScriptError("; ".join(problems))
    return CompiledMatcher(intents, catalogs)
