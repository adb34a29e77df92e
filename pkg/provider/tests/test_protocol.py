"""Protocol conformance of the adapter, validated with the core's reader."""

import io
import json
import os
import random
import subprocess
import sys

import numpy as np
import pytest

from afindex.embedder import read_embeddings
from afindex_provider.serve import serve


def run_adapter(lines, *args):
    proc = subprocess.run(
        [sys.executable, "-m", "afindex_provider", *args],
        input="".join(lines), capture_output=True, text=True,
    )
    return proc


def payload(pairs):
    return [json.dumps({"id": i, "text": t}) + "\n" for i, t in pairs]


class TestExchangeConformance:
    def test_output_parses_under_core_reader(self, tmp_path):
        proc = run_adapter(
            payload([("a", "first sentence"), ("b", "second sentence")]),
            "--model", "hash:16",
        )
        assert proc.returncode == 0, proc.stderr
        out_path = tmp_path / "out.jsonl"
        out_path.write_text(proc.stdout)
        matrix = read_embeddings(out_path)
        assert matrix.ids == ("a", "b")
        assert matrix.dim == 16
        assert matrix.provider == "hash:16"
        norms = np.sqrt((matrix.vectors ** 2).sum(axis=1))
        assert np.all(np.abs(norms - 1.0) <= 1e-9)

    def test_identical_sentences_cosine_one(self, tmp_path):
        proc = run_adapter(
            payload([("x", "the very same sentence"),
                     ("y", "the very same sentence")]),
            "--model", "hash:24",
        )
        assert proc.returncode == 0
        out_path = tmp_path / "out.jsonl"
        out_path.write_text(proc.stdout)
        matrix = read_embeddings(out_path)
        cos = float((matrix.row("x") * matrix.row("y")).sum())
        assert abs(cos - 1.0) <= 1e-6

    def test_order_preserved_for_1000_shuffled_inputs(self, tmp_path):
        rng = random.Random(1000)
        ids = [f"item-{i:04d}" for i in range(1000)]
        rng.shuffle(ids)
        pairs = [(i, f"text body for {i}") for i in ids]
        proc = run_adapter(payload(pairs), "--model", "hash:8",
                           "--batch-size", "37")
        assert proc.returncode == 0
        out_path = tmp_path / "out.jsonl"
        out_path.write_text(proc.stdout)
        matrix = read_embeddings(out_path)
        assert list(matrix.ids) == ids

    def test_empty_stdin_header_only(self):
        proc = run_adapter([], "--model", "hash:8")
        assert proc.returncode == 0
        lines = [l for l in proc.stdout.splitlines() if l.strip()]
        assert len(lines) == 1
        header = json.loads(lines[0])
        assert header == {"dim": 8, "provider": "hash:8", "normalized": True}


class TestFailureModes:
    def test_unloadable_model_exits_nonzero_with_diagnostic(self):
        proc = run_adapter(payload([("a", "x")]), "--model", "hash:not-a-number")
        assert proc.returncode != 0
        assert "hash" in proc.stderr

    def test_malformed_line_aborts_by_default(self):
        lines = payload([("a", "fine")]) + ["{broken json\n"]
        proc = run_adapter(lines, "--model", "hash:8")
        assert proc.returncode != 0
        assert "line 2" in proc.stderr

    def test_malformed_line_skippable_by_flag(self, tmp_path):
        lines = (payload([("a", "fine")]) + ["{broken json\n"]
                 + payload([("b", "also fine")]))
        proc = run_adapter(lines, "--model", "hash:8", "--on-bad-line", "skip")
        assert proc.returncode == 0
        assert "line 2" in proc.stderr
        out_path = tmp_path / "out.jsonl"
        out_path.write_text(proc.stdout)
        assert read_embeddings(out_path).ids == ("a", "b")

    def test_empty_text_is_malformed(self):
        proc = run_adapter(payload([("a", "   ")]), "--model", "hash:8")
        assert proc.returncode != 0
        assert "empty text" in proc.stderr


class TestBatching:
    def serve_to_string(self, pairs, batch_size):
        stdout = io.StringIO()
        rc = serve(
            "hash:12",
            stdin=io.StringIO("".join(payload(pairs))),
            stdout=stdout,
            stderr=io.StringIO(),
            batch_size=batch_size,
        )
        assert rc == 0
        return stdout.getvalue()

    def test_output_independent_of_batch_size(self):
        pairs = [(f"i{k}", f"sentence number {k} with words") for k in range(85)]
        outputs = {self.serve_to_string(pairs, bs) for bs in (1, 7, 32, 1000)}
        assert len(outputs) == 1

    def test_batch_size_must_be_positive(self):
        stderr = io.StringIO()
        rc = serve("hash:8", stdin=io.StringIO(""), stdout=io.StringIO(),
                   stderr=stderr, batch_size=0)
        assert rc != 0
        assert "batch size" in stderr.getvalue()


REAL_MODEL = os.environ.get("AFINDEX_SBERT_TEST_MODEL")


@pytest.mark.skipif(not REAL_MODEL, reason="set AFINDEX_SBERT_TEST_MODEL to "
                                           "run real-checkpoint tests")
class TestRealModel:
    def test_identical_sentences(self, tmp_path):
        proc = run_adapter(
            payload([("x", "Older workers value flexible schedules."),
                     ("y", "Older workers value flexible schedules.")]),
            "--model", REAL_MODEL,
        )
        assert proc.returncode == 0, proc.stderr
        out_path = tmp_path / "out.jsonl"
        out_path.write_text(proc.stdout)
        matrix = read_embeddings(out_path)
        cos = float((matrix.row("x") * matrix.row("y")).sum())
        assert abs(cos - 1.0) <= 1e-6

    def test_paraphrase_beats_unrelated(self, tmp_path):
        proc = run_adapter(
            payload([
                ("base", "Employees can choose when to start and end work."),
                ("para", "Workers are free to set their own daily hours."),
                ("other", "The recipe calls for two cups of flour."),
            ]),
            "--model", REAL_MODEL,
        )
        assert proc.returncode == 0, proc.stderr
        out_path = tmp_path / "out.jsonl"
        out_path.write_text(proc.stdout)
        matrix = read_embeddings(out_path)
        base = matrix.row("base")
        cos_para = float((base * matrix.row("para")).sum())
        cos_other = float((base * matrix.row("other")).sum())
        assert cos_para > cos_other
