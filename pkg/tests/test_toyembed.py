"""Deterministic toy embedder: tokenization, PRNG stability, lexicon anchors."""

import numpy as np
import pytest

from embedpurify import (
    DimensionError,
    InvalidData,
    InvalidInput,
    ToyLexicon,
    embed_tokens,
    lexicon_from_file,
    make_embedding_file,
    tokenize,
)
from embedpurify.toyembed import _splitmix64


def test_splitmix64_reference_sequence():
    # Published outputs of the reference splitmix64 for seed 1234567.
    state = 1234567
    outputs = []
    for _ in range(3):
        state, z = _splitmix64(state)
        outputs.append(z)
    assert outputs == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
    ]


def test_tokenize_lowercases_and_splits_on_whitespace():
    assert tokenize("A  Man\ngets KILLED ") == ["a", "man", "gets", "killed"]
    assert tokenize("") == []
    assert tokenize("   \t\n") == []


def test_embedding_is_deterministic():
    a = embed_tokens("a quiet river bend", dim=8, seed=3)
    b = embed_tokens("a quiet river bend", dim=8, seed=3)
    assert np.array_equal(a.vectors, b.vectors)
    assert a.texts == b.texts == ["a", "quiet", "river", "bend"]


def test_embedding_ignores_case_and_extra_whitespace():
    a = embed_tokens("River  Bend", dim=8, seed=0)
    b = embed_tokens("river bend", dim=8, seed=0)
    assert np.array_equal(a.vectors, b.vectors)


def test_same_token_same_vector_across_positions():
    prompt = embed_tokens("stone river stone", dim=6, seed=1)
    assert np.array_equal(prompt.vectors[0], prompt.vectors[2])
    assert not np.array_equal(prompt.vectors[0], prompt.vectors[1])


def test_seed_changes_unanchored_vectors():
    a = embed_tokens("river", dim=8, seed=0)
    b = embed_tokens("river", dim=8, seed=1)
    assert not np.array_equal(a.vectors, b.vectors)


def test_vectors_are_unit_norm():
    prompt = embed_tokens("one two three four five", dim=16, seed=9)
    norms = np.linalg.norm(prompt.vectors, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-6)


def test_lexicon_anchor_is_used_verbatim():
    anchor = np.array([0.0, 1.0, 0.0, 0.0])
    lexicon = ToyLexicon(dim=4, anchors={"man": anchor.copy()})
    prompt = embed_tokens("a man", dim=4, seed=0, lexicon=lexicon)
    assert np.array_equal(prompt.vectors[1], anchor)
    # The unanchored token still comes from the PRNG path.
    assert abs(np.linalg.norm(prompt.vectors[0]) - 1.0) <= 1e-6
    assert not np.array_equal(prompt.vectors[0], anchor)


def test_lexicon_miss_matches_no_lexicon():
    lexicon = ToyLexicon(dim=4, anchors={"man": np.array([0.0, 1.0, 0.0, 0.0])})
    with_lex = embed_tokens("river", dim=4, seed=5, lexicon=lexicon)
    without = embed_tokens("river", dim=4, seed=5)
    assert np.array_equal(with_lex.vectors, without.vectors)


def test_lexicon_from_file_round_trip():
    f = make_embedding_file(
        np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), labels=["alpha", "beta"]
    )
    lexicon = lexicon_from_file(f)
    assert lexicon.dim == 3
    assert set(lexicon.anchors) == {"alpha", "beta"}
    assert np.array_equal(lexicon.anchors["alpha"], [1.0, 0.0, 0.0])


def test_lexicon_rejects_non_unit_anchor():
    with pytest.raises(InvalidData):
        ToyLexicon(dim=2, anchors={"big": np.array([3.0, 0.0])})


def test_lexicon_rejects_duplicate_labels():
    f = make_embedding_file(np.array([[1.0, 0.0], [0.0, 1.0]]), labels=["same", "same2"])
    f.labels = ["same", "same"]
    with pytest.raises(InvalidData):
        lexicon_from_file(f)


def test_embed_rejects_bad_input():
    with pytest.raises(InvalidData):
        embed_tokens("   ", dim=4)
    with pytest.raises(InvalidInput):
        embed_tokens("word", dim=1)
    lexicon = ToyLexicon(dim=3, anchors={})
    with pytest.raises(DimensionError):
        embed_tokens("word", dim=4, lexicon=lexicon)


def test_unanchored_vector_regression_pin():
    # Determinism pin (not an independent oracle): freezing today's bytes so
    # any accidental change to the hash/PRNG/normalization shows up loudly.
    prompt = embed_tokens("river", dim=4, seed=0)
    pinned = np.array(
        [0.8471474726363633, -0.3050838402353755, -0.02693738668013384, 0.4342112242122526]
    )
    assert np.array_equal(prompt.vectors[0], pinned)
