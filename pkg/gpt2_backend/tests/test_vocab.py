import pytest

from gpt2_backend import EOS, PAD, SEP, SPECIALS, UNK, Vocab


def test_specials_occupy_fixed_low_ids():
    vocab = Vocab.from_texts(["alpha beta"])
    assert vocab.tokens[:4] == [PAD, UNK, SEP, EOS]
    assert (vocab.pad_id, vocab.unk_id, vocab.sep_id, vocab.eos_id) == (0, 1, 2, 3)


def test_encode_decode_round_trip():
    vocab = Vocab.from_texts(["the crabs hum [SEP] crabs are loud [EOS]"])
    text = "crabs are loud [EOS]"
    assert vocab.decode(vocab.encode(text)) == text


def test_unknown_words_map_to_unk():
    vocab = Vocab.from_texts(["alpha beta"])
    assert vocab.encode("alpha gamma") == [vocab.index["alpha"], vocab.unk_id]


def test_decode_skips_padding():
    vocab = Vocab.from_texts(["alpha"])
    ids = [vocab.pad_id, vocab.index["alpha"], vocab.pad_id]
    assert vocab.decode(ids) == "alpha"


def test_markers_in_corpus_do_not_duplicate():
    vocab = Vocab.from_texts(["a [SEP] b [EOS]", "c [SEP] d [EOS]"])
    assert vocab.tokens.count(SEP) == 1
    assert vocab.tokens.count(EOS) == 1


def test_word_order_is_deterministic():
    a = Vocab.from_texts(["zeta alpha", "mid"])
    b = Vocab.from_texts(["mid", "alpha zeta"])
    assert a.tokens == b.tokens


def test_save_load_round_trip(tmp_path):
    vocab = Vocab.from_texts(["some words here [SEP] tail [EOS]"])
    path = tmp_path / "vocab.json"
    vocab.save(path)
    loaded = Vocab.load(path)
    assert loaded.tokens == vocab.tokens
    assert loaded.index == vocab.index


def test_load_rejects_file_without_reserved_prefix(tmp_path):
    path = tmp_path / "vocab.json"
    path.write_text('{"tokens": ["alpha", "beta"]}', encoding="utf-8")
    with pytest.raises(ValueError):
        Vocab.load(path)


def test_specials_tuple_is_stable():
    assert SPECIALS == (PAD, UNK, SEP, EOS)
