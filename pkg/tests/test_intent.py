import random
import string

import pytest
from hypothesis import given, strategies as st

from coassembly.intent import (
    Ambiguous,
    Catalog,
    CatalogEntry,
    CompiledMatcher,
    IntentDef,
    Matched,
    NoEntry,
    NoMatch,
    SlotSpec,
    Unique,
    UtteranceTemplate,
    compile_matcher,
    normalize,
    resolve_catalog,
)


class TestNormalize:
    def test_lowercase_and_punctuation(self):
        assert normalize("Give me the Screwdriver!") == ["give", "me", "the", "screwdriver"]

    def test_empty(self):
        assert normalize("") == []

    def test_whitespace_collapse(self):
        assert normalize("  sun   gear ") == ["sun", "gear"]

    def test_non_ascii_passes_through(self):
        assert normalize("héllo wörld") == ["héllo", "wörld"]

    @given(st.text())
    def test_total_and_clean(self, text):
        tokens = normalize(text)
        for token in tokens:
            assert token == token.lower()
            assert not any(ch in string.punctuation for ch in token)
            assert " " not in token

    @given(st.text())
    def test_idempotent_on_rejoin(self, text):
        tokens = normalize(text)
        assert normalize(" ".join(tokens)) == tokens


def brute_force_resolve(catalog: Catalog, phrase: list[str]):
    """Independent oracle: scan every window of every surface."""
    wanted = list(phrase)
    hits = []
    for entry in catalog.entries:
        surfaces = [normalize(entry.canonical)] + [normalize(s) for s in entry.synonyms]
        found = False
        for surface in surfaces:
            for i in range(len(surface)):
                if surface[i : i + len(wanted)] == wanted and wanted:
                    found = True
        if found:
            hits.append(entry.canonical)
    return hits


GEAR_CATALOG = Catalog(
    name="components",
    entries=(
        CatalogEntry("sun gear"),
        CatalogEntry("ring gear"),
        CatalogEntry("carrier"),
    ),
)

TOOL_CATALOG = Catalog(
    name="tools",
    entries=(
        CatalogEntry("screwdriver", ("screw driver",)),
        CatalogEntry("torque wrench", ("wrench",)),
    ),
)


class TestResolveCatalog:
    def test_exact_entry(self):
        assert resolve_catalog(TOOL_CATALOG, ["screwdriver"]) == Unique("screwdriver")

    def test_ambiguous_gear(self):
        result = resolve_catalog(GEAR_CATALOG, ["gear"])
        assert result == Ambiguous(frozenset({"sun gear", "ring gear"}))

    def test_no_entry(self):
        assert isinstance(resolve_catalog(TOOL_CATALOG, ["banana"]), NoEntry)

    def test_synonym_resolution(self):
        assert resolve_catalog(TOOL_CATALOG, ["wrench"]) == Unique("torque wrench")

    def test_matches_brute_force_oracle(self):
        rng = random.Random(7)
        vocabulary = ["sun", "ring", "gear", "carrier", "screw", "driver", "x"]
        for _ in range(500):
            phrase = [rng.choice(vocabulary) for _ in range(rng.randint(1, 3))]
            for catalog in (GEAR_CATALOG, TOOL_CATALOG):
                expected = brute_force_resolve(catalog, phrase)
                got = resolve_catalog(catalog, phrase)
                if len(expected) == 1:
                    assert got == Unique(expected[0])
                elif expected:
                    assert got == Ambiguous(frozenset(expected))
                else:
                    assert isinstance(got, NoEntry)


def small_script():
    catalogs = {
        "tools": TOOL_CATALOG,
        "components": GEAR_CATALOG,
    }
    intents = {
        "request_tool": IntentDef(
            id="request_tool",
            utterances=(UtteranceTemplate.parse("give me the {tool}"),),
            slots=(SlotSpec("tool", kind="tools"),),
        ),
        "request_component": IntentDef(
            id="request_component",
            utterances=(UtteranceTemplate.parse("bring the {component}"),),
            slots=(SlotSpec("component", kind="components"),),
        ),
    }
    return compile_matcher(intents, catalogs)


class TestMatchUtterance:
    def test_direct_template_instantiation(self):
        result = small_script().match("give me the screwdriver")
        assert result == Matched(
            intent="request_tool",
            filled={"tool": "screwdriver"},
            missing_required=frozenset(),
            literal_score=3,
        )

    def test_ambiguous_slot_left_missing(self):
        result = small_script().match("bring the gear")
        assert isinstance(result, Matched)
        assert result.intent == "request_component"
        assert result.filled == {}
        assert result.missing_required == {"component"}

    def test_out_of_domain(self):
        assert isinstance(small_script().match("hello how are you"), NoMatch)

    def test_multiword_slot_value(self):
        result = small_script().match("give me the torque wrench")
        assert result.filled == {"tool": "torque wrench"}

    def test_extra_words_do_not_match(self):
        # anchored matching: no slack around the template
        assert isinstance(small_script().match("please give me the screwdriver"), NoMatch)

    def test_free_text_slot_absorbs_span(self):
        matcher = compile_matcher(
            {
                "note": IntentDef(
                    id="note",
                    utterances=(UtteranceTemplate.parse("note that {text}"),),
                    slots=(SlotSpec("text", kind="free-text"),),
                )
            },
            {},
        )
        result = matcher.match("note that the bench is wobbly")
        assert result.filled == {"text": "the bench is wobbly"}


class TestTieBreaking:
    def test_higher_literal_score_wins(self):
        matcher = compile_matcher(
            {
                "generic": IntentDef(
                    id="generic",
                    utterances=(UtteranceTemplate.parse("run the {what}"),),
                    slots=(SlotSpec("what", kind="free-text"),),
                ),
                "specific": IntentDef(
                    id="specific",
                    utterances=(UtteranceTemplate.parse("run the full diagnostics"),),
                ),
            },
            {},
        )
        assert matcher.match("run the full diagnostics").intent == "specific"

    def test_fewer_holes_wins_on_equal_score(self):
        matcher = compile_matcher(
            {
                "two_holes": IntentDef(
                    id="two_holes",
                    utterances=(UtteranceTemplate.parse("move {a} to {b}"),),
                    slots=(SlotSpec("a", kind="free-text"), SlotSpec("b", kind="free-text")),
                ),
                "one_hole": IntentDef(
                    id="one_hole",
                    utterances=(UtteranceTemplate.parse("move to the {a}"),),
                    slots=(SlotSpec("a", kind="free-text"),),
                ),
            },
            {},
        )
        # both align on "move to the left"; scores: 3 vs 2 -> one_hole
        assert matcher.match("move to the left").intent == "one_hole"

    def test_lexicographic_intent_id_breaks_remaining_ties(self):
        matcher = compile_matcher(
            {
                "b_intent": IntentDef(
                    id="b_intent", utterances=(UtteranceTemplate.parse("do it"),)
                ),
                "a_intent": IntentDef(
                    id="a_intent", utterances=(UtteranceTemplate.parse("do it"),)
                ),
            },
            {},
        )
        assert matcher.match("do it").intent == "a_intent"


class TestInvariants:
    def test_determinism_over_generated_strings(self):
        matcher = small_script()
        rng = random.Random(99)
        words = ["give", "me", "the", "bring", "gear", "sun", "screwdriver", "zz"]
        for _ in range(2000):
            text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 6)))
            assert matcher.match(text) == matcher.match(text)

    def test_monotone_specificity(self):
        base = small_script()
        texts = ["give me the screwdriver", "bring the sun gear"]
        before = {t: base.match(t) for t in texts}
        intents = dict(base.intents)
        intents["noise"] = IntentDef(
            id="noise", utterances=(UtteranceTemplate.parse("gear"),)
        )
        extended = CompiledMatcher(intents, base.catalogs)
        for text in texts:
            # previous matches scored 3 literals; the new intent tops out at 1
            assert extended.match(text) == before[text]

    def test_catalog_closure(self, reference_script):
        script = reference_script.script
        canonicals = {
            entry.canonical
            for catalog in script.catalogs.values()
            for entry in catalog.entries
        }
        rng = random.Random(3)
        words = ["give", "me", "the", "bring", "sun", "gear", "wrench", "kit", "ring"]
        for _ in range(500):
            text = " ".join(rng.choice(words) for _ in range(rng.randint(1, 6)))
            result = script.matcher.match(text)
            if isinstance(result, Matched):
                intent = script.intents[result.intent]
                for slot_name, value in result.filled.items():
                    spec = intent.slot(slot_name)
                    if spec.is_catalog:
                        assert value in canonicals

    def test_round_trip(self, reference_script):
        script = reference_script.script
        for intent in script.intents.values():
            catalog_slots = [s for s in intent.slots if s.is_catalog]
            for template in intent.utterances:
                holes = template.hole_slots()
                if not holes:
                    continue
                if not all(intent.slot(h).is_catalog for h in holes):
                    continue
                catalog = script.catalogs[intent.slot(holes[0]).kind]
                for entry in catalog.entries:
                    values = {holes[0]: entry.canonical}
                    rendered = template.render(values)
                    result = script.matcher.match(rendered)
                    assert isinstance(result, Matched), rendered
                    assert result.intent == intent.id, rendered
                    assert result.filled[holes[0]] == entry.canonical


class TestValidation:
    def test_adjacent_holes_rejected(self):
        with pytest.raises(Exception):
            compile_matcher(
                {
                    "bad": IntentDef(
                        id="bad",
                        utterances=(UtteranceTemplate.parse("move {a} {b} now"),),
                        slots=(SlotSpec("a", kind="free-text"), SlotSpec("b", kind="free-text")),
                    )
                },
                {},
            )

    def test_all_hole_template_rejected(self):
        with pytest.raises(Exception):
            compile_matcher(
                {
                    "bad": IntentDef(
                        id="bad",
                        utterances=(UtteranceTemplate.parse("{a}"),),
                        slots=(SlotSpec("a", kind="free-text"),),
                    )
                },
                {},
            )

    def test_unknown_catalog_rejected(self):
        with pytest.raises(Exception):
            compile_matcher(
                {
                    "bad": IntentDef(
                        id="bad",
                        utterances=(UtteranceTemplate.parse("get the {x}"),),
                        slots=(SlotSpec("x", kind="no_such_catalog"),),
                    )
                },
                {},
            )

    def test_duplicate_canonical_rejected(self):
        catalog = Catalog("c", (CatalogEntry("a"), CatalogEntry("a")))
        assert catalog.validate()
