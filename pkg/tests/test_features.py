import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from questkit import features
from questkit.corpus import LabeledSentence
from questkit.errors import ConfigError, DataError
from questkit.postag import POS_TAGS, default_tagger


def sent(text, **kw):
    return LabeledSentence(id=kw.pop("id", "t1"), text=text, **kw)


class TestTokenize:
    @pytest.mark.parametrize("text,expected", [
        ("please see comments?", ["please", "see", "comments", "?"]),
        ("Can you clarify this?", ["Can", "you", "clarify", "this", "?"]),
        ("?", ["?"]),
        ("I'm trying", ["I'm", "trying"]),
        ("(see note)?", ["(", "see", "note", ")", "?"]),
        ("the Kt/V values", ["the", "Kt/V", "values"]),
        ("well...", ["well", ".", ".", "."]),
    ])
    def test_cases(self, text, expected):
        assert features.tokenize(text) == expected

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            features.tokenize("   ")


class TestStatisticalFeatures:
    def test_hand_counted_example(self):
        out = features.statistical_features(
            sent("Can you clarify this?"), vocab_size=10000
        )
        npt.assert_allclose(out, [21, 4, 1, 4 / 10000])

    def test_single_lowercase_word(self):
        out = features.statistical_features(sent("hello"), vocab_size=1)
        npt.assert_allclose(out, [5, 1, 0, 1.0])

    def test_zero_vocab_rejected(self):
        with pytest.raises(DataError):
            features.statistical_features(sent("hello"), vocab_size=0)

    def test_repeated_words_counted_once_in_coverage(self):
        out = features.statistical_features(
            sent("the the the value"), vocab_size=100
        )
        assert out[1] == 4  # word count keeps repeats
        assert out[3] == 2 / 100  # coverage holds unique words

    @settings(max_examples=50)
    @given(st.text(
        alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Po", "Zs")),
        min_size=1, max_size=60,
    ))
    def test_coverage_bounded_by_wordcount_over_vocab(self, text):
        if not text.strip():
            return
        out = features.statistical_features(sent(text), vocab_size=50)
        assert out[3] <= out[1] / 50 + 1e-12
        assert 0.0 <= out[3] <= max(out[1], 1.0)


class TestPosTag:
    def test_punctuation_tag(self):
        assert features.pos_tag(["?"]) == ["."]

    def test_ing_suffix(self):
        assert features.pos_tag(["running"]) == ["VBG"]

    def test_suffix_table_cases(self):
        # documented suffix heuristics, one word per rule
        assert default_tagger(["confirmed"]) == ["VBD"]
        assert default_tagger(["quickly"]) == ["RB"]
        assert default_tagger(["reports"]) == ["NNS"]
        assert default_tagger(["careful"]) == ["JJ"]
        # short stems fall through to other rules
        assert default_tagger(["thing"]) == ["NN"]

    def test_closed_class_and_fallbacks(self):
        tags = default_tagger(["what", "is", "the", "dose", "42", "Alvarez"])
        assert tags == ["WP", "VBZ", "DT", "NN", "CD", "NNP"]

    def test_pretagged_passthrough(self):
        s = sent("why?", pos_tags=("WRB", "."))
        assert features.pos_tag(["why", "?"], sentence=s) == ["WRB", "."]

    def test_plugin_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            features.pos_tag(["a", "b"], tagger=lambda toks: ["NN"])

    def test_all_default_tags_in_inventory(self, minicorpus):
        for s in minicorpus.sentences:
            for tag in features.pos_tag(features.tokenize(s.text)):
                assert tag in POS_TAGS


class TestEmbeddingTable:
    def test_oov_bound_formula(self):
        assert math.sqrt(3 / 300) == 0.1
        table = features.EmbeddingTable(dim=300)
        vec = table.lookup("xyzq")
        assert vec.shape == (300,)
        assert np.all(np.abs(vec) <= 0.1)

    def test_oov_repeatable_within_and_across_tables(self):
        t1 = features.EmbeddingTable(dim=8, oov_seed=5)
        t2 = features.EmbeddingTable(dim=8, oov_seed=5)
        npt.assert_array_equal(t1.lookup("novel"), t1.lookup("novel"))
        npt.assert_array_equal(t1.lookup("novel"), t2.lookup("novel"))

    def test_different_seeds_differ(self):
        t1 = features.EmbeddingTable(dim=8, oov_seed=1)
        t2 = features.EmbeddingTable(dim=8, oov_seed=2)
        assert not np.array_equal(t1.lookup("novel"), t2.lookup("novel"))

    def test_oov_bound_many_samples(self):
        table = features.EmbeddingTable(dim=300, oov_seed=3)
        bound = math.sqrt(3 / 300)
        samples = np.concatenate(
            [table.lookup(f"w{i}") for i in range(10_000 // 300 + 1)]
        )
        assert np.abs(samples).max() <= bound

    def test_wrong_vector_shape_rejected(self):
        with pytest.raises(DataError):
            features.EmbeddingTable(dim=3, vectors={"a": np.zeros(4)})


class TestLoadWord2vec:
    def test_two_word_file(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 3\nalpha 0.1 0.2 0.3\nbeta -1 0 1\n")
        table = features.load_word2vec(path, dim=3)
        assert len(table) == 2
        npt.assert_allclose(table.lookup("beta"), [-1.0, 0.0, 1.0])

    def test_dim_mismatch(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 3\na 0.1 0.2 0.3\n")
        with pytest.raises(DataError, match="dim mismatch"):
            features.load_word2vec(path, dim=5)

    def test_malformed_line_names_number(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 2\na 0.1 0.2\nb 0.1\n")
        with pytest.raises(DataError, match="line 3"):
            features.load_word2vec(path, dim=2)

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("3 2\na 0.1 0.2\nb 0.1 0.2\n")
        with pytest.raises(DataError, match="declares 3"):
            features.load_word2vec(path, dim=2)

    def test_non_numeric_component(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 2\na 0.1 oops\n")
        with pytest.raises(DataError, match="line 2"):
            features.load_word2vec(path, dim=2)

    def test_bundled_demo_table(self, demo_table_path):
        table = features.load_word2vec(demo_table_path, dim=50)
        assert "disorders" in table


def word_table(dim=6, seed=0):
    return features.EmbeddingTable(dim=dim, oov_seed=seed)


class TestEncode:
    def test_padding_rows_zero(self):
        enc = features.encode(
            sent("one two three four"), word_table(), None, None,
            max_len=10, vocab_size=50,
        )
        for mat in enc.channels:
            npt.assert_array_equal(mat[4:], 0.0)
        assert enc.n_tokens == 4
        assert list(enc.token_ids[4:]) == [features.PAD_ID] * 6

    def test_word_count_consistent_with_stats(self):
        enc = features.encode(
            sent("Can you clarify this?"), word_table(), None, None,
            max_len=8, vocab_size=100,
        )
        # stats word count excludes the detached '?', channels include it
        assert enc.stats[1] == 4
        assert enc.n_tokens == 5

    def test_too_long_rejected(self):
        with pytest.raises(DataError):
            features.encode(sent("a b c"), word_table(), None, None,
                            max_len=2, vocab_size=10)

    def test_all_channels_same_shape(self):
        lex = features.SemanticLexicon(word_to_group={"hernia": "Disorders"})
        enc = features.encode(
            sent("the hernia was noted"), word_table(dim=50), "one_hot",
            lex, max_len=6, vocab_size=10,
        )
        assert enc.channel_names == ("word", "pos", "semantic")
        assert len({m.shape for m in enc.channels}) == 1

    def test_semantic_channel_zero_without_hits(self):
        lex = features.SemanticLexicon(word_to_group={"hernia": "Disorders"})
        enc = features.encode(
            sent("no medical words here"), word_table(), None, lex,
            max_len=6, vocab_size=10,
        )
        npt.assert_array_equal(enc.channels[-1], 0.0)

    def test_replace_words_substitutes_group_vector(self):
        table = word_table()
        lex = features.SemanticLexicon(
            word_to_group={"hernia": "Disorders"}, strategy="replace_words",
        )
        enc = features.encode(
            sent("why the hernia was considered absolute contraindications?"),
            table, None, lex, max_len=10, vocab_size=10,
        )
        assert enc.channel_names == ("word",)
        npt.assert_array_equal(enc.channels[0][2], table.lookup("disorders"))

    def test_replace_and_separate_agree_off_hits(self):
        table = word_table()
        base = {"word_to_group": {"hernia": "Disorders"}}
        lex_sep = features.SemanticLexicon(**base)
        lex_rep = features.SemanticLexicon(**base, strategy="replace_words")
        text = "the hernia value was high"
        enc_sep = features.encode(sent(text), table, None, lex_sep,
                                  max_len=8, vocab_size=10)
        enc_rep = features.encode(sent(text), table, None, lex_rep,
                                  max_len=8, vocab_size=10)
        toks = features.tokenize(text)
        for i, tok in enumerate(toks):
            if lex_sep.group_of(tok) is None:
                npt.assert_array_equal(enc_sep.channels[0][i],
                                       enc_rep.channels[0][i])

    def test_one_hot_needs_enough_dims(self):
        with pytest.raises(ConfigError):
            features.encode(sent("hi"), word_table(dim=5), "one_hot",
                            None, max_len=4, vocab_size=10)

    def test_deterministic(self):
        t1, t2 = word_table(seed=4), word_table(seed=4)
        e1 = features.encode(sent("some words here"), t1, None, None,
                             max_len=5, vocab_size=10)
        e2 = features.encode(sent("some words here"), t2, None, None,
                             max_len=5, vocab_size=10)
        npt.assert_array_equal(e1.channels[0], e2.channels[0])

    def test_pos_embedding_channel_uses_tag_vectors(self):
        wt = word_table()
        pt = features.EmbeddingTable(dim=6, oov_seed=9)
        enc = features.encode(sent("running fast"), wt, pt, None,
                              max_len=4, vocab_size=10)
        npt.assert_array_equal(enc.channels[1][0], pt.lookup("VBG"))

    def test_pos_table_dim_must_match_word_dim(self):
        with pytest.raises(ConfigError):
            features.encode(sent("hi there"), word_table(dim=6),
                            features.EmbeddingTable(dim=4), None,
                            max_len=4, vocab_size=10)

    def test_vocab_argument_fills_real_ids(self):
        vocab = {"<unk>": 0, "the": 1, "value": 2}
        enc = features.encode(sent("the value xyz"), word_table(), None,
                              None, max_len=5, vocab_size=3, vocab=vocab)
        assert list(enc.token_ids[:3]) == [1, 2, 0]
