import pytest

from questkit import corpus, features, synthetic
from questkit.postag import default_tagger


class TestSeparable:
    def test_labels_follow_the_keyword_rule(self):
        ds = synthetic.make_separable(60, seed=5)
        for s in ds.sentences:
            tokens = {t.lower() for t in features.tokenize(s.text)}
            if s.label == "question":
                assert "what" in tokens
            elif s.label == "c_question":
                assert "clarify" in tokens
            else:
                assert not tokens & {"what", "clarify"}

    def test_min_token_count(self):
        ds = synthetic.make_separable(50, seed=1)
        assert min(len(features.tokenize(s.text)) for s in ds.sentences) >= 6

    def test_deterministic(self):
        a = synthetic.make_separable(30, seed=9)
        b = synthetic.make_separable(30, seed=9)
        assert a == b

    def test_balanced_classes(self):
        ds = synthetic.make_separable(60, seed=2)
        counts = {}
        for s in ds.sentences:
            counts[s.label] = counts.get(s.label, 0) + 1
        assert set(counts.values()) == {20}


class TestOrderPosCorpus:
    def test_markers_get_the_expected_tags(self):
        ds, lex = synthetic.make_order_pos_corpus(60, seed=3, pool_size=30)
        for s in ds.sentences:
            tokens = features.tokenize(s.text)
            tags = default_tagger(tokens)
            for tok, tag in zip(tokens, tags):
                group = lex.group_of(tok)
                if group == "Procedures":
                    assert tag == "VBG"
                elif group == "Anatomy":
                    assert tag == "NN"

    def test_label_depends_on_marker_order(self):
        ds, lex = synthetic.make_order_pos_corpus(90, seed=7, pool_size=30)
        for s in ds.sentences:
            tokens = features.tokenize(s.text)
            groups = [lex.group_of(t) for t in tokens]
            pairs = list(zip(groups, groups[1:]))
            if s.label == "question":
                assert ("Procedures", "Anatomy") in pairs
            elif s.label == "c_question":
                assert ("Anatomy", "Procedures") in pairs
            else:
                hits = [g for g in groups if g]
                assert len(hits) == 1

    def test_bag_of_words_cannot_split_question_classes(self):
        # question and c_question sentences have identical construction up
        # to marker order, so their token multisets follow one distribution
        ds, lex = synthetic.make_order_pos_corpus(300, seed=11)
        q_marks = cq_marks = 0
        for s in ds.sentences:
            n_marked = sum(
                1 for t in features.tokenize(s.text) if lex.group_of(t)
            )
            if s.label == "question":
                q_marks += n_marked
            elif s.label == "c_question":
                cq_marks += n_marked
        assert q_marks == cq_marks  # both exactly two markers per sentence

    def test_deterministic(self):
        a, _ = synthetic.make_order_pos_corpus(40, seed=13)
        b, _ = synthetic.make_order_pos_corpus(40, seed=13)
        assert a == b


@pytest.fixture(scope="module")
def table():
    ds = synthetic.make_calibrated(2500, seed=0)
    return corpus.corpus_stats(ds)


class TestCalibrated:
    def test_overall_words_and_length(self, table):
        targets = synthetic.CALIBRATION_TARGETS
        assert table["all"]["avg_words"] == pytest.approx(
            targets["avg_words"], abs=0.8)
        assert table["all"]["avg_length"] == pytest.approx(
            targets["avg_length"], abs=6.0)
        assert table["all"]["avg_capitalized"] == pytest.approx(
            targets["avg_capitalized"], abs=0.5)

    def test_question_class_profile(self, table):
        t = synthetic.CALIBRATION_TARGETS["question"]
        assert table["question"]["avg_words"] == pytest.approx(
            t["avg_words"], abs=0.8)
        assert table["question"]["avg_length"] == pytest.approx(
            t["avg_length"], abs=6.0)

    def test_c_question_class_profile(self, table):
        t = synthetic.CALIBRATION_TARGETS["c_question"]
        assert table["c_question"]["avg_words"] == pytest.approx(
            t["avg_words"], abs=0.8)
        assert table["c_question"]["avg_length"] == pytest.approx(
            t["avg_length"], abs=4.0)

    def test_c_questions_always_end_with_mark(self):
        ds = synthetic.make_calibrated(800, seed=4)
        for s in ds.sentences:
            if s.label == "c_question":
                assert s.text.rstrip().endswith("?")

    def test_label_mix_tracks_recorded_proportions(self):
        ds = synthetic.make_calibrated(3000, seed=2)
        frac_q = sum(
            1 for s in ds.sentences if s.label == "question") / len(ds)
        assert frac_q == pytest.approx(0.116, abs=0.03)

    def test_dialogue_metadata_present(self):
        ds = synthetic.make_calibrated(100, seed=1)
        assert all(s.dialogue_id is not None for s in ds.sentences)
        assert all(s.position is not None for s in ds.sentences)
