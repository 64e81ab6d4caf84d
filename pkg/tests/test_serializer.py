"""Training-instance serialization and corpus building."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from costar.core import (
    EOS,
    SEP,
    Annotation,
    Conceptualisation,
    Post,
    RuleCode,
    Scheme,
    StereotypeTuple,
)
from costar.grammar import parse_scheme_output
from costar.serializer import (
    InvalidAnnotationError,
    SerializationError,
    SerializerConfig,
    build_corpus,
    eval_prefix,
    serialize,
)

TUPLE_WORD = st.text(alphabet="bgjkmqxz", min_size=1, max_size=8)
CONCEPT_WORD = st.text(alphabet="fiy", min_size=1, max_size=6)


def phrase(word, min_words=1, max_words=4):
    return st.lists(word, min_size=min_words, max_size=max_words).map(" ".join)


POST = Post(id="p1", text="saw the robot chefs polishing again", source="reddit")
ANN = Annotation(
    post_id="p1",
    stereotype=StereotypeTuple("robot chefs", "are", "obsessed with shine"),
    conceptualisation=Conceptualisation("mirror pride"),
)


class TestSerialize:
    def test_cs_layout(self):
        inst = serialize(POST, ANN, "cs")
        assert inst.text == (
            "saw the robot chefs polishing again [SEP] mirror pride [SEP] "
            "robot chefs are obsessed with shine [EOS]"
        )

    def test_sc_layout(self):
        inst = serialize(POST, ANN, "sc")
        assert inst.text == (
            "saw the robot chefs polishing again [SEP] "
            "robot chefs are obsessed with shine [SEP] mirror pride [EOS]"
        )

    def test_s_layout_has_no_concept(self):
        inst = serialize(POST, ANN, Scheme.S)
        assert inst.text == (
            "saw the robot chefs polishing again [SEP] "
            "robot chefs are obsessed with shine [EOS]"
        )
        assert "mirror pride" not in inst.text

    def test_segments_are_whitespace_normalized(self):
        post = Post(id="p1", text="  saw   the	chefs ")
        ann = Annotation(
            post_id="p1",
            stereotype=StereotypeTuple(" robot  chefs ", "are", " too  shiny "),
            conceptualisation=Conceptualisation(" mirror  pride "),
        )
        inst = serialize(post, ann, "cs")
        assert inst.text == (
            "saw the chefs [SEP] mirror pride [SEP] robot chefs are too shiny [EOS]"
        )

    def test_invalid_annotation_carries_report(self):
        bad = Annotation(
            post_id="p1",
            stereotype=StereotypeTuple("", "is", "x"),
            conceptualisation=Conceptualisation("fiy"),
        )
        with pytest.raises(InvalidAnnotationError) as exc:
            serialize(POST, bad, "cs")
        assert RuleCode.EMPTY_GROUP in exc.value.report
        assert RuleCode.BAD_RELATION in exc.value.report

    def test_empty_post_text_rejected(self):
        with pytest.raises(SerializationError):
            serialize(Post(id="p1", text="  "), ANN, "cs")

    @given(
        group=phrase(TUPLE_WORD, max_words=3),
        relation=st.sampled_from(["are", "have", "can", "cause", "prevent", "want", "should", "do"]),
        statement=phrase(TUPLE_WORD, max_words=6),
        concept=phrase(CONCEPT_WORD, max_words=3),
        scheme=st.sampled_from(list(Scheme)),
    )
    def test_target_segment_parses_back(self, group, relation, statement, concept, scheme):
        post = Post(id="p1", text="bqk gxz jmb")
        ann = Annotation(
            post_id="p1",
            stereotype=StereotypeTuple(group, relation, statement),
            conceptualisation=Conceptualisation(concept),
        )
        inst = serialize(post, ann, scheme)
        # structure: the right number of markers in the right places
        assert inst.text.count(EOS) == 1 and inst.text.endswith(EOS)
        expected_seps = 1 if scheme is Scheme.S else 2
        assert inst.text.count(SEP) == expected_seps
        # the part after the first separator is what a backend should
        # produce from the eval prefix, and it parses well-formed
        target = inst.text.split(f" {SEP} ", 1)[1]
        out = parse_scheme_output(target, scheme)
        assert out.well_formed, (target, out.failure_reason)


def test_eval_prefix_is_post_plus_separator():
    assert eval_prefix(POST) == "saw the robot chefs polishing again [SEP]"


def test_eval_prefix_rejects_empty_post():
    with pytest.raises(SerializationError):
        eval_prefix(Post(id="p", text="   "))


class TestSerializerConfig:
    def test_scheme_coerced_from_string(self):
        assert SerializerConfig(scheme="sc").scheme is Scheme.SC

    def test_minimum_length_enforced(self):
        with pytest.raises(ValueError):
            SerializerConfig(scheme="cs", max_length_tokens=8)


def make_records(n):
    posts, annotations = [], []
    for i in range(n):
        posts.append(Post(id=f"p{i:03d}", text=f"post number {i} about the chefs"))
        annotations.append(
            Annotation(
                post_id=f"p{i:03d}",
                stereotype=StereotypeTuple("robot chefs", "are", f"variant {i}"),
                conceptualisation=Conceptualisation("mirror pride"),
            )
        )
    return posts, annotations


class TestBuildCorpus:
    def test_counts_and_index_permutation(self):
        posts, annotations = make_records(20)
        instances, errors = build_corpus(posts, annotations, SerializerConfig(scheme="cs"))
        assert not errors
        assert len(instances) == 20
        assert sorted(i.shuffled_index for i in instances) == list(range(20))
        assert [i.shuffled_index for i in instances] == list(range(20))

    def test_same_seed_reproduces_order(self):
        posts, annotations = make_records(30)
        config = SerializerConfig(scheme="sc", shuffle_seed=11)
        first, _ = build_corpus(posts, annotations, config)
        second, _ = build_corpus(posts, annotations, config)
        assert [i.post_id for i in first] == [i.post_id for i in second]

    def test_different_seeds_change_order(self):
        posts, annotations = make_records(30)
        a, _ = build_corpus(posts, annotations, SerializerConfig(scheme="s", shuffle_seed=1))
        b, _ = build_corpus(posts, annotations, SerializerConfig(scheme="s", shuffle_seed=2))
        assert [i.post_id for i in a] != [i.post_id for i in b]

    def test_shuffle_actually_permutes(self):
        posts, annotations = make_records(30)
        instances, _ = build_corpus(posts, annotations, SerializerConfig(scheme="s", shuffle_seed=3))
        assert [i.post_id for i in instances] != [f"p{i:03d}" for i in range(30)]

    def test_invalid_records_collected_not_fatal(self):
        posts, annotations = make_records(3)
        annotations.append(
            Annotation(
                post_id="p000",
                stereotype=StereotypeTuple("robot chefs", "is", "broken"),
                conceptualisation=Conceptualisation("fiy"),
            )
        )
        annotations.append(
            Annotation(
                post_id="missing",
                stereotype=StereotypeTuple("robot chefs", "are", "fine"),
                conceptualisation=Conceptualisation("fiy"),
            )
        )
        instances, errors = build_corpus(posts, annotations, SerializerConfig(scheme="cs"))
        assert len(instances) == 3
        assert len(errors) == 2
        codes = {e.post_id: e for e in errors}
        assert RuleCode.BAD_RELATION in codes["p000"].codes
        assert "no post" in codes["missing"].message

    def test_long_post_is_pre_truncated_but_markers_survive(self):
        long_post = Post(id="p1", text="word " * 3000)
        ann = Annotation(
            post_id="p1",
            stereotype=StereotypeTuple("robot chefs", "are", "patient"),
            conceptualisation=Conceptualisation("fiy"),
        )
        config = SerializerConfig(scheme="cs", max_length_tokens=32)
        instances, errors = build_corpus([long_post], [ann], config)
        assert not errors
        text = instances[0].text
        # character budget plus a small joining allowance
        assert len(text) <= 32 * 6 + 10
        assert text.endswith(f"robot chefs are patient {EOS}")
        assert text.count(SEP) == 2
        # no marker was split by the cut
        assert "[SE " not in text and " EP]" not in text
