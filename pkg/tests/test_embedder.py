"""Built-in embedder, exchange format, and provider protocol tests."""

import json
import math
import re
import sys
from pathlib import Path

import numpy as np
import pytest

from afindex.embedder import (
    BuiltinEmbedder,
    EmbeddingMatrix,
    SubprocessEmbedder,
    builtin_embed,
    embed_texts,
    read_embeddings,
    write_embeddings,
)
from afindex.errors import ProviderError, ValidationError

GOLDEN = Path(__file__).parent / "golden" / "builtin_embed_golden.json"

_M = (1 << 64) - 1


def oracle_embed(text, dim):
    """Independent re-implementation of the token-hash rule (the oracle)."""
    vecs = []
    for tok in re.findall(r"[a-z0-9]+", text.lower()):
        h = 0xCBF29CE484222325
        for b in tok.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & _M
        s = h
        vals = []
        for _ in range(dim):
            s = (s + 0x9E3779B97F4A7C15) & _M
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M
            z ^= z >> 31
            vals.append(2.0 * ((z >> 11) / 2.0 ** 53) - 1.0)
        vecs.append(vals)
    avg = [sum(col) / len(vecs) for col in zip(*vecs)]
    norm = math.sqrt(sum(v * v for v in avg))
    return [v / norm for v in avg]


class TestBuiltinEmbed:
    def test_matches_oracle_alpha_beta(self):
        ours = builtin_embed("alpha beta", 8)
        ref = oracle_embed("alpha beta", 8)
        assert np.allclose(ours, ref, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("text,dim", [
        ("work", 8),
        ("heavy lifting outdoors", 16),
        ("Flexible schedule, part-time hours!", 16),
    ])
    def test_matches_oracle(self, text, dim):
        assert np.allclose(builtin_embed(text, dim), oracle_embed(text, dim),
                           rtol=0, atol=1e-15)

    def test_golden_vectors_byte_exact(self):
        with open(GOLDEN) as fh:
            golden = json.load(fh)
        assert len(golden) == 5
        for case in golden:
            ours = builtin_embed(case["text"], case["dim"])
            assert list(ours) == case["vector"]

    def test_identical_text_identical_vector(self):
        a = builtin_embed("work", 8)
        b = builtin_embed("work", 8)
        assert np.array_equal(a, b)
        assert float((a * b).sum()) == pytest.approx(1.0, abs=1e-12)

    def test_token_overlap_orders_cosines(self):
        base = builtin_embed("heavy lifting outdoors", 64)
        unrelated = builtin_embed("office scheduling flexibility", 64)
        overlapping = builtin_embed("heavy lifting work", 64)
        assert float((base * unrelated).sum()) < float((base * overlapping).sum())

    def test_zero_tokens_error(self):
        with pytest.raises(ValidationError, match="no tokens"):
            builtin_embed("", 8)
        with pytest.raises(ValidationError, match="no tokens"):
            builtin_embed("!!! --- ???", 8)

    def test_dim_too_small(self):
        with pytest.raises(ValidationError, match="dim"):
            builtin_embed("work", 1)

    def test_unit_norm_random_token_strings(self):
        rng = np.random.default_rng(42)
        alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
        for _ in range(200):
            n_tokens = int(rng.integers(1, 6))
            tokens = [
                "".join(rng.choice(list(alphabet), size=int(rng.integers(1, 9))))
                for _ in range(n_tokens)
            ]
            vec = builtin_embed(" ".join(tokens), int(rng.integers(2, 33)))
            assert abs(float(np.sqrt((vec * vec).sum())) - 1.0) <= 1e-9

    def test_case_and_punctuation_normalization(self):
        assert np.array_equal(builtin_embed("Heavy-Lifting", 8),
                              builtin_embed("heavy lifting", 8))


class TestEmbedTexts:
    def test_order_follows_input(self):
        texts = {"b": "second text", "a": "first text"}
        matrix = embed_texts(texts, BuiltinEmbedder(8))
        assert matrix.ids == ("b", "a")
        assert np.array_equal(matrix.row("a"), builtin_embed("first text", 8))

    def test_identical_texts_identical_rows(self):
        matrix = embed_texts({"x": "same words", "y": "same words"}, BuiltinEmbedder(8))
        assert np.array_equal(matrix.row("x"), matrix.row("y"))
        cos = float((matrix.row("x") * matrix.row("y")).sum())
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_rows_unit_norm(self):
        matrix = embed_texts({"a": "alpha", "b": "beta gamma"}, BuiltinEmbedder(16))
        norms = np.sqrt((matrix.vectors ** 2).sum(axis=1))
        assert np.all(np.abs(norms - 1.0) <= 1e-9)

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            embed_texts({"a": "  "}, BuiltinEmbedder(8))

    def test_workers_do_not_change_output(self):
        texts = {f"t{i}": f"token{i} filler words" for i in range(20)}
        one = embed_texts(texts, BuiltinEmbedder(16), max_workers=1)
        four = embed_texts(texts, BuiltinEmbedder(16), max_workers=4)
        assert one.ids == four.ids
        assert np.array_equal(one.vectors, four.vectors)

    def test_dimension_mismatch_from_provider(self):
        class BadProvider:
            def embed(self, ids, texts, max_workers=1):
                return [np.ones(8), np.ones(5)], "bad"

        with pytest.raises(ProviderError, match="dimension mismatch"):
            embed_texts({"a": "x", "b": "y"}, BadProvider())

    def test_zero_vector_from_provider(self):
        class ZeroProvider:
            def embed(self, ids, texts, max_workers=1):
                return [np.zeros(4)], "zero"

        with pytest.raises(ProviderError, match="zero vector"):
            embed_texts({"a": "x"}, ZeroProvider())


class TestExchangeFormat:
    def test_round_trip_exact(self, tmp_path):
        matrix = embed_texts(
            {"a": "alpha beta", "b": "gamma delta", "c": "epsilon"},
            BuiltinEmbedder(4),
        )
        path = tmp_path / "emb.jsonl"
        write_embeddings(matrix, path)
        back = read_embeddings(path)
        assert back.ids == matrix.ids
        assert np.array_equal(back.vectors, matrix.vectors)
        assert back.provider == matrix.provider

    def test_round_trip_awkward_floats(self, tmp_path):
        # denormals and values needing all 17 digits survive the trip
        row = np.array([5e-324, 1 / 3, -0.1, 0.1 + 0.2])
        row = row / np.sqrt((row * row).sum())
        matrix = EmbeddingMatrix(ids=("x",), vectors=row[None, :], provider="t")
        path = tmp_path / "emb.jsonl"
        write_embeddings(matrix, path)
        assert np.array_equal(read_embeddings(path).vectors, matrix.vectors)

    def test_wrong_length_row_reports_line(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            '{"dim": 4, "provider": "t", "normalized": false}\n'
            '{"id": "a", "v": [1.0, 0.0, 0.0]}\n'
        )
        with pytest.raises(ValidationError, match=":2"):
            read_embeddings(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            '{"dim": 2, "provider": "t", "normalized": false}\n'
            '{"id": "a", "v": [1.0, 0.0]}\n'
            '{"id": "a", "v": [0.0, 1.0]}\n'
        )
        with pytest.raises(ValidationError, match="duplicate id"):
            read_embeddings(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            '{"dim": 2, "provider": "t", "normalized": false}\n'
            'not json\n'
        )
        with pytest.raises(ValidationError, match="malformed"):
            read_embeddings(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text('{"id": "a", "v": [1.0, 0.0]}\n')
        with pytest.raises(ValidationError, match="dim"):
            read_embeddings(path)

    def test_unnormalized_file_is_normalized_on_read(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            '{"dim": 2, "provider": "t", "normalized": false}\n'
            '{"id": "a", "v": [3.0, 4.0]}\n'
        )
        matrix = read_embeddings(path)
        assert np.allclose(matrix.row("a"), [0.6, 0.8])

    def test_normalized_claim_is_validated(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            '{"dim": 2, "provider": "t", "normalized": true}\n'
            '{"id": "a", "v": [3.0, 4.0]}\n'
        )
        with pytest.raises(ValidationError, match="norm"):
            read_embeddings(path)


class TestSubprocessProvider:
    def test_round_trip_through_subprocess(self):
        # a minimal well-behaved provider implemented inline
        script = (
            "import sys, json\n"
            "items = [json.loads(l) for l in sys.stdin if l.strip()]\n"
            "print(json.dumps({'dim': 3, 'provider': 'echo3', 'normalized': True}))\n"
            "for it in items:\n"
            "    n = (len(it['text']) % 3) + 1\n"
            "    v = [0.0, 0.0, 0.0]\n"
            "    v[n - 1] = 1.0\n"
            "    print(json.dumps({'id': it['id'], 'v': v}))\n"
        )
        provider = SubprocessEmbedder([sys.executable, "-c", script])
        matrix = embed_texts({"a": "xy", "b": "xyz"}, provider)
        assert matrix.ids == ("a", "b")
        assert matrix.provider == "echo3"
        assert np.allclose(np.sqrt((matrix.vectors ** 2).sum(axis=1)), 1.0)

    def test_nonzero_exit_is_provider_failure(self):
        provider = SubprocessEmbedder([sys.executable, "-c", "import sys; sys.exit(3)"])
        with pytest.raises(ProviderError, match="status 3"):
            embed_texts({"a": "x"}, provider)

    def test_out_of_order_ids_rejected(self):
        script = (
            "import sys, json\n"
            "items = [json.loads(l) for l in sys.stdin if l.strip()]\n"
            "print(json.dumps({'dim': 2, 'provider': 'rev', 'normalized': True}))\n"
            "for it in reversed(items):\n"
            "    print(json.dumps({'id': it['id'], 'v': [1.0, 0.0]}))\n"
        )
        provider = SubprocessEmbedder([sys.executable, "-c", script])
        with pytest.raises(ProviderError, match="out of order"):
            embed_texts({"a": "x", "b": "y"}, provider)
