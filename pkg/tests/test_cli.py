"""CLI contract: exit codes, file artifacts, reports, and atomicity.

Commands run in-process through `cli.main`, which returns the exit code the
console script would hand to the shell. The purified-output check re-reads
the bundle file with a local struct-based parser so the expected vectors come
from a second, independent implementation.
"""

import json
import struct

import numpy as np
import pytest

from embedpurify import content_fingerprint, load_embeddings, make_embedding_file, save_embeddings
from embedpurify.cli import load_bundle, main, save_bundle
from helpers import axis_concepts


# ---------------------------------------------------------------------------
# independent bundle parser (struct-level, no shared code with cli.load_bundle)
# ---------------------------------------------------------------------------


def parse_bundle_raw(path):
    raw = path.read_bytes()
    assert raw[:4] == b"PGB1"
    dim, toxic_rank, clean_rank, rel_tol = struct.unpack_from("<IIId", raw, 4)
    (fp_len,) = struct.unpack_from("<I", raw, 24)
    offset = 28
    fingerprint = raw[offset : offset + fp_len].decode("utf-8")
    offset += fp_len
    block = dim * dim * 4
    toxic = np.frombuffer(raw[offset : offset + block], dtype="<f4").reshape(dim, dim)
    offset += block
    clean = np.frombuffer(raw[offset : offset + block], dtype="<f4").reshape(dim, dim)
    offset += block
    (has_centroid,) = struct.unpack_from("<B", raw, offset)
    offset += 1
    centroid = None
    if has_centroid:
        centroid = np.frombuffer(raw[offset : offset + dim * 4], dtype="<f4")
        offset += dim * 4
    assert offset == len(raw)
    return {
        "dim": dim,
        "toxic_rank": toxic_rank,
        "clean_rank": clean_rank,
        "rel_tol": rel_tol,
        "fingerprint": fingerprint,
        "toxic": toxic.astype(np.float64),
        "clean": clean.astype(np.float64),
        "centroid": centroid,
    }


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def workspace(tmp_path):
    """Concept files on disjoint axes in R^3 plus a compiled bundle."""
    toxic, clean = axis_concepts(3, (0,), (1,))
    save_embeddings(
        make_embedding_file(toxic.vectors, labels=["weapon"]),
        tmp_path / "toxic.embjson",
        variant="json",
    )
    save_embeddings(
        make_embedding_file(clean.vectors, labels=["calm"]),
        tmp_path / "clean.embjson",
        variant="json",
    )
    code = main(
        [
            "build",
            "--toxic",
            str(tmp_path / "toxic.embjson"),
            "--clean",
            str(tmp_path / "clean.embjson"),
            "--out",
            str(tmp_path / "bundle.pgb1"),
        ]
    )
    assert code == 0
    return tmp_path


def write_prompt(tmp_path, rows, labels=None, name="prompt.embjson"):
    save_embeddings(
        make_embedding_file(rows, labels=labels, format_tag="EMB1-JSON"),
        tmp_path / name,
        variant="json",
    )
    return tmp_path / name


SAFE_ROWS = [[0.0, 1.0, 0.0], [0.0, 0.5, 0.8]]
RISKY_ROWS = [[0.0, 1.0, 0.0], [0.0, 0.5, 0.8], [0.0, 0.9, 0.1], [1.0, 0.1, 0.0]]
UNSAFE_ROWS = [[1.0, 0.0, 0.0], [0.9, 0.1, 0.0]]


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def test_build_writes_valid_bundle(workspace):
    bundle = load_bundle(workspace / "bundle.pgb1")
    assert bundle.dim == 3
    assert bundle.toxic_rank == 1 and bundle.clean_rank == 1
    parsed = parse_bundle_raw(workspace / "bundle.pgb1")
    assert parsed["rel_tol"] == 1e-6
    assert np.allclose(parsed["toxic"], np.diag([1.0, 0.0, 0.0]), atol=1e-7)
    assert np.allclose(parsed["clean"], np.diag([0.0, 1.0, 0.0]), atol=1e-7)
    assert np.allclose(parsed["centroid"], [0.0, 1.0, 0.0], atol=1e-7)


def test_build_embeds_content_fingerprint(workspace):
    toxic, clean = axis_concepts(3, (0,), (1,))
    toxic.labels[:] = ["weapon"]
    clean.labels[:] = ["calm"]
    parsed = parse_bundle_raw(workspace / "bundle.pgb1")
    assert parsed["fingerprint"] == content_fingerprint(toxic, clean)


def test_rebuild_is_byte_identical(workspace):
    first = (workspace / "bundle.pgb1").read_bytes()
    code = main(
        [
            "build",
            "--toxic",
            str(workspace / "toxic.embjson"),
            "--clean",
            str(workspace / "clean.embjson"),
            "--out",
            str(workspace / "bundle2.pgb1"),
        ]
    )
    assert code == 0
    assert (workspace / "bundle2.pgb1").read_bytes() == first


def test_build_dimension_mismatch_exits_2(tmp_path):
    save_embeddings(
        make_embedding_file(np.eye(3)[:1], labels=["weapon"]),
        tmp_path / "toxic.embjson",
        variant="json",
    )
    save_embeddings(
        make_embedding_file(np.eye(4)[1:2], labels=["calm"]),
        tmp_path / "clean.embjson",
        variant="json",
    )
    code = main(
        [
            "build",
            "--toxic",
            str(tmp_path / "toxic.embjson"),
            "--clean",
            str(tmp_path / "clean.embjson"),
            "--out",
            str(tmp_path / "bundle.pgb1"),
        ]
    )
    assert code == 2
    assert not (tmp_path / "bundle.pgb1").exists()


def test_build_missing_input_exits_1(tmp_path):
    code = main(
        [
            "build",
            "--toxic",
            str(tmp_path / "nope.embjson"),
            "--clean",
            str(tmp_path / "also-nope.embjson"),
            "--out",
            str(tmp_path / "bundle.pgb1"),
        ]
    )
    assert code == 1
    assert not (tmp_path / "bundle.pgb1").exists()


# ---------------------------------------------------------------------------
# bundle file round trip and error handling
# ---------------------------------------------------------------------------


def test_bundle_round_trip(workspace):
    bundle = load_bundle(workspace / "bundle.pgb1")
    save_bundle(bundle, workspace / "copy.pgb1")
    assert (workspace / "copy.pgb1").read_bytes() == (workspace / "bundle.pgb1").read_bytes()


def test_bundle_bad_magic(tmp_path):
    from embedpurify import FormatError

    path = tmp_path / "bad.pgb1"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(FormatError):
        load_bundle(path)


def test_bundle_truncated(workspace):
    raw = (workspace / "bundle.pgb1").read_bytes()
    from embedpurify import FormatError

    clipped = workspace / "clipped.pgb1"
    clipped.write_bytes(raw[:-5])
    with pytest.raises(FormatError):
        load_bundle(clipped)
    padded = workspace / "padded.pgb1"
    padded.write_bytes(raw + b"\x00")
    with pytest.raises(FormatError):
        load_bundle(padded)


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------


def run_classify(workspace, rows, report_name="report.json", extra=()):
    prompt = write_prompt(workspace, rows)
    return main(
        [
            "classify",
            "--bundle",
            str(workspace / "bundle.pgb1"),
            "--prompt",
            str(prompt),
            "--report",
            str(workspace / report_name),
            *extra,
        ]
    )


def test_classify_safe_exits_0(workspace):
    assert run_classify(workspace, SAFE_ROWS) == 0
    report = json.loads((workspace / "report.json").read_text())
    assert report["verdict"]["verdict"] == "safe"
    assert report["verdict"]["risky_fraction"] == 0.0


def test_classify_risky_exits_3(workspace):
    assert run_classify(workspace, RISKY_ROWS) == 3
    report = json.loads((workspace / "report.json").read_text())
    assert report["verdict"]["verdict"] == "risky"
    assert report["verdict"]["risky_fraction"] == 0.25


def test_classify_unsafe_exits_4(workspace):
    assert run_classify(workspace, UNSAFE_ROWS) == 4
    report = json.loads((workspace / "report.json").read_text())
    assert report["verdict"]["verdict"] == "unsafe"


def test_classify_missing_bundle_exits_1(workspace):
    prompt = write_prompt(workspace, SAFE_ROWS)
    code = main(
        [
            "classify",
            "--bundle",
            str(workspace / "missing.pgb1"),
            "--prompt",
            str(prompt),
            "--report",
            str(workspace / "report.json"),
        ]
    )
    assert code == 1
    assert not (workspace / "report.json").exists()


def test_classify_dimension_mismatch_exits_2(workspace):
    prompt = write_prompt(workspace, [[1.0, 0.0, 0.0, 0.0]])
    code = main(
        [
            "classify",
            "--bundle",
            str(workspace / "bundle.pgb1"),
            "--prompt",
            str(prompt),
            "--report",
            str(workspace / "report.json"),
        ]
    )
    assert code == 2


def test_report_structure_and_config_echo(workspace):
    assert run_classify(workspace, RISKY_ROWS, extra=("--block-threshold", "0.6")) == 3
    text = (workspace / "report.json").read_text(encoding="utf-8")
    report = json.loads(text)
    assert report["schema_version"] == "1"
    assert report["config"]["rel_tol"] == 1e-6
    assert report["config"]["tie_policy"] == "risky-on-tie"
    assert report["config"]["block_threshold"] == 0.6
    assert report["config"]["purify"] == {
        "mode": "sum",
        "preserve_norm": False,
        "zero_fallback": "keep",
    }
    assert report["config"]["seed"] == 0
    assert report["bundle_fingerprint"] == parse_bundle_raw(workspace / "bundle.pgb1")["fingerprint"]
    assert [t["index"] for t in report["tokens"]] == [0, 1, 2, 3]
    assert all(set(t) == {"index", "token_text", "d_toxic", "d_clean", "label"} for t in report["tokens"])
    # Canonical form: sorted keys, compact, newline-terminated.
    assert text == json.dumps(report, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def test_classify_report_is_deterministic(workspace):
    assert run_classify(workspace, RISKY_ROWS, report_name="r1.json") == 3
    assert run_classify(workspace, RISKY_ROWS, report_name="r2.json") == 3
    assert (workspace / "r1.json").read_bytes() == (workspace / "r2.json").read_bytes()


def test_classify_tie_policy_flag(workspace):
    tie_rows = [[1.0, 1.0, 0.0]]  # equidistant from both axes
    assert run_classify(workspace, tie_rows) == 4  # risky-on-tie -> 1/1 risky -> blocked
    assert run_classify(workspace, tie_rows, extra=("--tie-policy", "safe-on-tie")) == 0


def test_fingerprintless_bundle_warns(workspace, capsys):
    bundle = load_bundle(workspace / "bundle.pgb1")
    bundle.fingerprint = ""
    save_bundle(bundle, workspace / "anon.pgb1")
    prompt = write_prompt(workspace, SAFE_ROWS)
    code = main(
        [
            "classify",
            "--bundle",
            str(workspace / "anon.pgb1"),
            "--prompt",
            str(prompt),
            "--report",
            str(workspace / "report.json"),
        ]
    )
    assert code == 0
    assert "warning" in capsys.readouterr().err.lower()
    report = json.loads((workspace / "report.json").read_text())
    assert report["bundle_fingerprint"] == ""


def test_classify_unwritable_report_exits_1_without_partial_output(workspace):
    prompt = write_prompt(workspace, SAFE_ROWS)
    report = workspace / "no_such_dir" / "report.json"
    code = main(
        [
            "classify",
            "--bundle",
            str(workspace / "bundle.pgb1"),
            "--prompt",
            str(prompt),
            "--report",
            str(report),
        ]
    )
    assert code == 1
    assert not report.parent.exists()


# ---------------------------------------------------------------------------
# purify
# ---------------------------------------------------------------------------


def run_purify(workspace, rows, labels=None, out_name="purified.emb", extra=()):
    prompt = write_prompt(workspace, rows, labels=labels)
    return main(
        [
            "purify",
            "--bundle",
            str(workspace / "bundle.pgb1"),
            "--prompt",
            str(prompt),
            "--out",
            str(workspace / out_name),
            "--report",
            str(workspace / "purify_report.json"),
            *extra,
        ]
    )


def test_purify_safe_prompt_copies_bit_identically(workspace):
    assert run_purify(workspace, SAFE_ROWS) == 0
    original = load_embeddings(workspace / "prompt.embjson")
    copied = load_embeddings(workspace / "purified.emb")
    assert copied.vectors.tobytes() == original.vectors.tobytes()
    assert (workspace / "purify_report.json").exists()


def test_purify_risky_prompt_rewrites_only_risky_rows(workspace):
    labels = ["t0", "t1", "t2", "t3"]
    assert run_purify(workspace, RISKY_ROWS, labels=labels) == 3
    original = load_embeddings(workspace / "prompt.embjson")
    purified = load_embeddings(workspace / "purified.emb")
    report = json.loads((workspace / "purify_report.json").read_text())
    risky_indices = {t["index"] for t in report["tokens"] if t["label"] == "risky"}
    assert risky_indices == {3}

    # Independent oracle: rebuild the transform from the raw bundle bytes.
    parsed = parse_bundle_raw(workspace / "bundle.pgb1")
    transform = np.eye(parsed["dim"]) - parsed["toxic"] + parsed["clean"]
    for i in range(original.count):
        if i in risky_indices:
            expected = (transform @ original.vectors[i].astype(np.float64)).astype(np.float32)
            assert np.array_equal(purified.vectors[i], expected)
        else:
            assert purified.vectors[i].tobytes() == original.vectors[i].tobytes()
    assert purified.labels == labels


def test_purify_unsafe_prompt_blocks_output(workspace):
    assert run_purify(workspace, UNSAFE_ROWS, out_name="blocked.emb") == 4
    assert not (workspace / "blocked.emb").exists()
    assert not (workspace / "blocked.emb.json").exists()
    report = json.loads((workspace / "purify_report.json").read_text())
    assert report["verdict"]["verdict"] == "unsafe"


def test_purify_json_output_variant(workspace):
    assert run_purify(workspace, RISKY_ROWS, out_name="purified.embjson") == 3
    purified = load_embeddings(workspace / "purified.embjson")
    assert purified.count == len(RISKY_ROWS)


def test_purify_flags_are_echoed(workspace):
    assert (
        run_purify(
            workspace,
            RISKY_ROWS,
            extra=("--mode", "averaged", "--preserve-norm", "--zero-fallback", "clean_centroid"),
        )
        == 3
    )
    report = json.loads((workspace / "purify_report.json").read_text())
    assert report["config"]["purify"] == {
        "mode": "averaged",
        "preserve_norm": True,
        "zero_fallback": "clean_centroid",
    }


def test_purify_zero_fallback_centroid_uses_bundle_centroid(workspace):
    # A token exactly on the toxic axis collapses to zero under the default
    # config; with the centroid fallback it lands on the clean centroid.
    rows = [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]
    assert run_purify(workspace, rows, extra=("--zero-fallback", "clean_centroid")) == 3
    purified = load_embeddings(workspace / "purified.emb")
    assert np.allclose(purified.vectors[3], [0.0, 1.0, 0.0], atol=1e-7)


def test_purify_output_into_missing_dir_exits_1(workspace):
    code = run_purify(workspace, RISKY_ROWS, out_name="no_such_dir/purified.emb")
    assert code == 1
    assert not (workspace / "no_such_dir").exists()
    # The report was written before the output failure, as documented.
    assert (workspace / "purify_report.json").exists()


def test_no_temp_files_left_behind(workspace):
    run_classify(workspace, RISKY_ROWS)
    run_purify(workspace, RISKY_ROWS)
    leftovers = [p.name for p in workspace.iterdir() if p.name.endswith(".tmp")]
    assert leftovers == []


# ---------------------------------------------------------------------------
# embed-toy
# ---------------------------------------------------------------------------


def test_embed_toy_writes_labeled_prompt(tmp_path):
    out = tmp_path / "prompt.embjson"
    code = main(["embed-toy", "--text", "A quiet river", "--dim", "8", "--out", str(out)])
    assert code == 0
    loaded = load_embeddings(out)
    assert loaded.labels == ["a", "quiet", "river"]
    assert (loaded.count, loaded.dim) == (3, 8)
    norms = np.linalg.norm(loaded.vectors.astype(np.float64), axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-5)


def test_embed_toy_is_deterministic(tmp_path):
    argv = ["embed-toy", "--text", "a quiet river", "--dim", "8", "--seed", "4"]
    assert main(argv + ["--out", str(tmp_path / "one.embjson")]) == 0
    assert main(argv + ["--out", str(tmp_path / "two.embjson")]) == 0
    assert (tmp_path / "one.embjson").read_bytes() == (tmp_path / "two.embjson").read_bytes()


def test_embed_toy_with_lexicon(tmp_path):
    save_embeddings(
        make_embedding_file(np.eye(4)[:1], labels=["river"], format_tag="EMB1-JSON"),
        tmp_path / "lexicon.embjson",
        variant="json",
    )
    code = main(
        [
            "embed-toy",
            "--text",
            "river stone",
            "--dim",
            "4",
            "--out",
            str(tmp_path / "prompt.embjson"),
            "--lexicon",
            str(tmp_path / "lexicon.embjson"),
        ]
    )
    assert code == 0
    loaded = load_embeddings(tmp_path / "prompt.embjson")
    assert np.array_equal(loaded.vectors[0], np.eye(4, dtype=np.float32)[0])


def test_embed_toy_empty_text_exits_1(tmp_path):
    code = main(["embed-toy", "--text", "   ", "--dim", "4", "--out", str(tmp_path / "p.embjson")])
    assert code == 1
    assert not (tmp_path / "p.embjson").exists()
