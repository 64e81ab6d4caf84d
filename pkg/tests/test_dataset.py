"""Ingestion, persistence round-trips, manifests, statistics, splits."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from costar.core import Annotation, AnnotatorDemographics, Conceptualisation, Post, StereotypeTuple
from costar.dataset import (
    CorpusFormatError,
    CorpusManifest,
    ManifestRow,
    export,
    ingest,
    load_corpus,
    split,
    stats,
    write_corpus,
)
from costar.serializer import SerializerConfig, build_corpus


def annotation_key(a: Annotation):
    return (
        a.post_id,
        a.stereotype.targeted_group,
        a.stereotype.relation_symbol,
        a.stereotype.implied_statement,
        a.conceptualisation.text,
        a.annotator,
    )


class TestIngest:
    def test_clean_fixture_loads_fully(self, synthetic):
        posts, annotations = synthetic
        assert len(posts) == 50
        assert len(annotations) == 50

    def test_all_error_paths_reported_by_row(self, fixtures_dir):
        posts, annotations, errors = ingest(fixtures_dir / "bad_records.jsonl")
        assert len(posts) == 2
        assert len(annotations) == 2
        by_row = {e.row: e.code for e in errors}
        assert by_row == {
            2: "BAD_JSON",
            3: "BAD_JSON",
            4: "MISSING_FIELD",
            5: "BAD_FIELD",
            6: "BAD_RELATION",
            7: "CONCEPT_TOO_LONG",
            8: "EMPTY_GROUP",
            9: "EMPTY_STATEMENT",
            10: "CONCEPT_REPEATS_TUPLE",
            11: "BAD_FIELD",
            12: "BAD_FIELD",
            13: "DUPLICATE_POST",
        }

    def test_csv_ingest_with_flattened_annotator(self, fixtures_dir):
        posts, annotations, errors = ingest(fixtures_dir / "small.csv")
        assert [p.id for p in posts] == ["c001", "c002", "c003"]
        assert annotations[0].annotator == AnnotatorDemographics("woman", "lunar", "18-24")
        assert annotations[1].annotator == AnnotatorDemographics("man", None, "35-44")
        assert annotations[2].annotator is None
        assert [e.code for e in errors] == ["BAD_RELATION"]
        # the header is row 1, so the bad record sits on row 5
        assert errors[0].row == 5

    def test_format_detection_rejects_unknown_suffix(self, tmp_path):
        path = tmp_path / "records.txt"
        path.write_text("{}", encoding="utf-8")
        with pytest.raises(ValueError):
            ingest(path)

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            ingest(tmp_path / "absent.jsonl")


class TestPersistenceRoundTrips:
    def test_export_then_ingest_preserves_annotations(self, synthetic, tmp_path):
        posts, annotations = synthetic
        out = tmp_path / "out.jsonl"
        count = export(posts, annotations, out)
        assert count == 50
        posts2, annotations2, errors = ingest(out)
        assert not errors
        assert sorted(map(annotation_key, annotations)) == sorted(
            map(annotation_key, annotations2)
        )
        assert {p.id for p in posts} == {p.id for p in posts2}

    def test_corpus_write_then_load(self, synthetic, tmp_path):
        posts, annotations = synthetic
        instances, _ = build_corpus(posts, annotations, SerializerConfig(scheme="cs"))
        path = tmp_path / "corpus.jsonl"
        assert write_corpus(instances, path) == 50
        loaded = load_corpus(path)
        assert [(i.post_id, i.scheme, i.text) for i in loaded] == [
            (i.post_id, i.scheme, i.text) for i in instances
        ]
        # line order carries the shuffle
        assert [i.shuffled_index for i in loaded] == list(range(50))

    def test_load_corpus_rejects_malformed_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"post_id": "p1"}\n', encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="line 1"):
            load_corpus(path)


class TestManifest:
    def test_buckets_and_total(self, synthetic):
        posts, _ = synthetic
        manifest = CorpusManifest.from_posts(posts)
        assert manifest.total == 50
        assert manifest.total == sum(r.n_posts for r in manifest.rows)
        assert [r.source for r in manifest.rows] == sorted(r.source for r in manifest.rows)
        by_source = manifest.by_source()
        assert by_source["reddit"] == 26
        assert by_source["twitter"] == 12
        assert by_source["hate_site"] == 12

    def test_duplicate_posts_counted_once(self):
        posts = [Post("p1", "a", "reddit"), Post("p1", "a", "reddit"), Post("p2", "b", "twitter")]
        assert CorpusManifest.from_posts(posts).total == 2

    def test_total_invariant_enforced(self):
        with pytest.raises(ValueError):
            CorpusManifest(rows=(ManifestRow("reddit", "r/x", 3),), total=4)


def make_annotation(group, statement="generic statement", concept="fiy", annotator=None):
    return Annotation(
        post_id="p1",
        stereotype=StereotypeTuple(group, "are", statement),
        conceptualisation=Conceptualisation(concept),
        annotator=annotator,
    )


class TestStats:
    def test_single_bucket(self):
        annotations = [make_annotation("men") for _ in range(3)]
        result = stats(annotations, k=5)
        assert result.top_targeted_groups == (("men", 3),)

    def test_lowercasing_merges_and_ties_break_lexicographically(self):
        annotations = [
            make_annotation("Women"),
            make_annotation("women"),
            make_annotation("men"),
            make_annotation("folks"),
            make_annotation("men"),
        ]
        result = stats(annotations, k=2)
        assert result.top_targeted_groups == (("men", 2), ("women", 2))

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            stats([], k=0)

    def test_demographic_percentages_cover_reporters_only(self):
        annotations = [
            make_annotation("men", annotator=AnnotatorDemographics("woman", None, "18-24")),
            make_annotation("men", annotator=AnnotatorDemographics("woman", "lunar", None)),
            make_annotation("men", annotator=AnnotatorDemographics("man", None, None)),
            make_annotation("men", annotator=None),
        ]
        result = stats(annotations, k=3)
        assert result.reported == {"gender": 3, "race": 1, "age_band": 1}
        gender = dict((v, (c, p)) for v, c, p in result.demographics["gender"])
        assert gender["woman"] == (2, 66.7)
        assert gender["man"] == (1, 33.3)
        total_pct = sum(p for _, _, p in result.demographics["gender"])
        assert total_pct == pytest.approx(100.0, abs=0.5)

    def test_fixture_demographics_each_axis_sums_to_100(self, synthetic):
        _, annotations = synthetic
        result = stats(annotations)
        for axis, table in result.demographics.items():
            assert sum(p for _, _, p in table) == pytest.approx(100.0, abs=0.5), axis


class TestSplit:
    def test_sizes_follow_rounding(self):
        ids = [f"p{i}" for i in range(10)]
        train, dev = split(ids, 0.2, seed=1)
        assert len(train) == 8 and len(dev) == 2

    def test_partition_is_disjoint_and_covering(self):
        ids = [f"p{i}" for i in range(57)]
        train, dev = split(ids, 0.3, seed=9)
        assert set(train) | set(dev) == set(ids)
        assert set(train) & set(dev) == set()

    def test_same_seed_same_split(self):
        ids = [f"p{i}" for i in range(40)]
        assert split(ids, 0.25, seed=4) == split(ids, 0.25, seed=4)

    def test_input_order_does_not_matter(self):
        ids = [f"p{i}" for i in range(40)]
        assert split(ids, 0.25, seed=4) == split(list(reversed(ids)), 0.25, seed=4)

    def test_accepts_posts(self):
        posts = [Post(f"p{i}", "t") for i in range(10)]
        train, dev = split(posts, 0.5, seed=0)
        assert len(train) == 5 and len(dev) == 5

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
    def test_degenerate_fraction_rejected(self, fraction):
        with pytest.raises(ValueError):
            split(["a", "b"], fraction, seed=0)

    @given(
        ids=st.sets(st.text(alphabet="abcdef", min_size=1, max_size=6), min_size=2, max_size=60),
        fraction=st.floats(min_value=0.05, max_value=0.95),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_partition_property(self, ids, fraction, seed):
        train, dev = split(sorted(ids), fraction, seed)
        assert set(train) | set(dev) == ids
        assert set(train) & set(dev) == set()
        assert len(dev) == round(fraction * len(ids))
