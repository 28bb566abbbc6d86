"""Segmentation, tokenization, and phrase counting tests."""

import json
from datetime import date, time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newslens.corpus import (
    Episode,
    PhraseVector,
    SnapshotError,
    canonical_text,
    ingest_episodes,
    load_snapshot,
    parse_episode_record,
    phrase_counts,
    save_snapshot,
    segment_episode,
    segment_text,
    split_sentences,
    strip_ads,
    tokenize,
)


def make_episode(text, ad_spans=(), **overrides):
    base = dict(
        id="ep001",
        station="CNN",
        program_title="Newsroom",
        category="hard news",
        air_date=date(2017, 3, 14),
        air_time=time(21, 0),
        duration_min=60,
        text=text,
        ad_spans=tuple(ad_spans),
    )
    base.update(overrides)
    return Episode(**base)


def words(n, prefix="w"):
    return " ".join(f"{prefix}{i}" for i in range(n))


class TestTokenize:
    def test_lowercases_and_splits_punctuation(self):
        assert tokenize("The U.S.-Mexico border!") == ["the", "u", "s", "mexico", "border"]

    def test_internal_apostrophe_kept(self):
        assert tokenize("Don't stop O'Brien's show") == ["don't", "stop", "o'brien's", "show"]

    def test_underscore_separates(self):
        assert tokenize("foo_bar") == ["foo", "bar"]

    def test_digits_kept(self):
        assert tokenize("covid-19 in 2020") == ["covid", "19", "in", "2020"]

    def test_empty(self):
        assert tokenize("   ") == []


class TestSegmentation:
    def test_ten_forty_word_sentences(self):
        # 400 words in 40-word sentences packs as 120/120/120/40.
        text = ". ".join(words(40, f"s{k}") for k in range(10)) + "."
        segs = segment_text(text, max_words=150)
        assert [len(s.split()) for s in segs] == [120, 120, 120, 40]

    def test_oversized_sentence_hard_split(self):
        text = words(151) + "."
        segs = segment_text(text, max_words=150)
        assert [len(s.split()) for s in segs] == [150, 1]

    def test_oversized_tail_keeps_accumulating(self):
        # 160-word sentence leaves a 10-word tail that the next sentence joins.
        text = words(160, "a") + ". " + words(20, "b") + "."
        segs = segment_text(text, max_words=150)
        assert [len(s.split()) for s in segs] == [150, 30]

    def test_unpunctuated_text_hard_splits(self):
        segs = segment_text(words(310), max_words=150)
        assert [len(s.split()) for s in segs] == [150, 150, 10]

    def test_round_trip(self):
        text = "First point.  Second   point!\nThird one? Done."
        segs = segment_text(text, max_words=5)
        assert " ".join(segs) == canonical_text(text)

    def test_empty_text(self):
        assert segment_text("   \n ") == []

    def test_split_sentences_boundaries(self):
        assert split_sentences("One. Two! Three? Four") == ["One.", "Two!", "Three?", "Four"]


class TestStripAds:
    def test_spans_removed_in_order(self):
        text = "news AD1 more news AD2 end"
        ep = make_episode(text, ad_spans=[(5, 9), (19, 23)])
        assert strip_ads(ep) == "news more news end"

    def test_no_spans(self):
        ep = make_episode("just news")
        assert strip_ads(ep) == "just news"

    def test_segment_episode_ids(self):
        ep = make_episode(". ".join(words(40, f"s{k}") for k in range(10)) + ".")
        segs = segment_episode(ep, max_words=150)
        assert [s.id for s in segs] == ["ep001:0000", "ep001:0001", "ep001:0002", "ep001:0003"]
        assert all(s.station == "CNN" and s.air_date == date(2017, 3, 14) for s in segs)


class TestPhraseCounts:
    def test_unfiltered_total_is_2n_minus_1(self):
        pv = phrase_counts("the border patrol agent")
        assert pv.total == 7
        assert pv.counts["border patrol"] == 1

    def test_all_stopword_phrases_dropped_mixed_bigrams_kept(self):
        pv = phrase_counts("the border patrol", stoplist=frozenset({"the"}))
        assert pv.counts == {"border": 1, "patrol": 1, "the border": 1, "border patrol": 1}
        assert pv.total == 4

    def test_stopword_bigram_dropped(self):
        pv = phrase_counts("of the border", stoplist=frozenset({"of", "the"}))
        assert "of the" not in pv.counts
        assert pv.counts["the border"] == 1

    def test_confounder_positions_excised(self):
        pv = phrase_counts("good morning breaking news today", confounders=["breaking news"])
        assert pv.counts == {"good": 1, "morning": 1, "today": 1, "good morning": 1}
        assert pv.total == 4

    def test_no_bigram_bridges_excision(self):
        # Tokens flanking a removed confounder must not form a new bigram.
        pv = phrase_counts("alpha breaking news beta", confounders=["breaking news"])
        assert "alpha beta" not in pv.counts

    def test_repeated_phrase_counted(self):
        pv = phrase_counts("tax cuts tax cuts")
        assert pv.counts["tax cuts"] == 2
        assert pv.counts["tax"] == 2

    def test_empty_segment(self):
        assert phrase_counts("").is_empty()

    def test_accepts_pretokenized(self):
        assert phrase_counts(["a", "b"]).counts == {"a": 1, "b": 1, "a b": 1}


class TestIngest:
    def record(self, **overrides):
        base = dict(
            id="ep1",
            station="ABC",
            program_title="World News",
            category="hard news",
            air_date="2016-05-01",
            air_time="18:30",
            duration_min=30,
            text="Some news text here.",
            ad_spans=[],
        )
        base.update(overrides)
        return base

    def test_valid_and_invalid_records_partitioned(self, tmp_path):
        lines = [
            json.dumps(self.record()),
            "not json at all {",
            json.dumps(self.record(id="ep2", station="BBC")),
            json.dumps(self.record(id="ep3", duration_min=-5)),
            json.dumps(self.record(id="ep4", air_date="2016-13-40")),
            json.dumps(self.record(id="ep1")),
            json.dumps(self.record(id="ep5", ad_spans=[[10, 5]])),
            json.dumps(self.record(id="ep6", ad_spans=[[0, 4], [2, 8]])),
            json.dumps(self.record(id="ep7", category="infomercial")),
            json.dumps(self.record(id="ep0")),
        ]
        path = tmp_path / "episodes.jsonl"
        path.write_text("\n".join(lines) + "\n")
        result = ingest_episodes(path)
        assert [e.id for e in result.episodes] == ["ep0", "ep1"]
        assert len(result.issues) == 8
        by_line = {i.line_no: i for i in result.issues}
        assert "malformed" in by_line[2].message
        assert "station" in by_line[3].message
        assert "duration" in by_line[4].message
        assert by_line[6].message == "duplicate episode id"
        assert "overlap" in by_line[8].message
        assert "category" in by_line[9].message

    def test_missing_and_unknown_fields(self):
        rec = self.record()
        del rec["text"]
        with pytest.raises(ValueError, match="missing fields: text"):
            parse_episode_record(rec)
        with pytest.raises(ValueError, match="unknown fields"):
            parse_episode_record(self.record(extra=1))

    def test_ad_span_beyond_text(self):
        with pytest.raises(ValueError, match="out of bounds"):
            parse_episode_record(self.record(ad_spans=[[0, 10_000]]))


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "corpus.pkl"
        save_snapshot(path, {"segments": [1, 2, 3]}, config_hash="abc")
        assert load_snapshot(path, config_hash="abc") == {"segments": [1, 2, 3]}

    def test_hash_mismatch_refused(self, tmp_path):
        path = tmp_path / "corpus.pkl"
        save_snapshot(path, {}, config_hash="abc")
        with pytest.raises(SnapshotError, match="config hash"):
            load_snapshot(path, config_hash="other")

    def test_version_mismatch_refused(self, tmp_path):
        import pickle

        path = tmp_path / "corpus.pkl"
        with open(path, "wb") as fh:
            pickle.dump({"format_version": 999, "config_hash": "abc", "payload": {}}, fh)
        with pytest.raises(SnapshotError, match="format version"):
            load_snapshot(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SnapshotError, match="not found"):
            load_snapshot(tmp_path / "nope.pkl")


# --- property tests --------------------------------------------------------

word_st = st.text(alphabet="abcdefg", min_size=1, max_size=8)
text_st = st.lists(word_st, min_size=0, max_size=400).map(" ".join)


@given(text_st, st.integers(min_value=1, max_value=60))
@settings(max_examples=200)
def test_segments_round_trip_and_respect_limit(text, max_words):
    segs = segment_text(text, max_words=max_words)
    assert " ".join(segs) == canonical_text(text)
    assert all(1 <= len(s.split()) <= max_words for s in segs)


@given(st.lists(word_st, min_size=1, max_size=50))
def test_unfiltered_phrase_total(tokens):
    pv = phrase_counts(list(tokens))
    assert pv.total == 2 * len(tokens) - 1


@given(st.lists(word_st, min_size=1, max_size=30), st.integers(min_value=1, max_value=4))
def test_appended_confounder_leaves_counts_unchanged(tokens, reps):
    confounder = "sponsored content"
    base = phrase_counts(list(tokens))
    padded = phrase_counts(list(tokens) + confounder.split() * reps, confounders=[confounder])
    assert dict(padded.counts) == dict(base.counts)
    assert padded.total == base.total


@given(st.lists(word_st, min_size=1, max_size=30))
def test_phrase_vector_counts_positive(tokens):
    pv = PhraseVector.from_counts(phrase_counts(list(tokens)).counts)
    assert all(c > 0 for c in pv.counts.values())
    assert pv.total == sum(pv.counts.values())
