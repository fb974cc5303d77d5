"""Command-line entry points: ingest, index build, eval, chat, parser behavior."""

import json
import subprocess
import sys

import pytest

from convrec import cli
from tests.conftest import FIXTURE_DIR, SAMPLE_DIR

U1 = "Can you help me find somewhere to eat in downtown Edmonton?"


def _run(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --------------------------------------------------------------------------
# ingest


def test_ingest_happy_path(tmp_path, capsys):
    out = tmp_path / "corpus"
    code, stdout, stderr = _run(
        [
            "ingest",
            "--items", str(SAMPLE_DIR / "items.jsonl"),
            "--reviews", str(SAMPLE_DIR / "reviews.jsonl"),
            "--out", str(out),
        ],
        capsys,
    )
    assert code == 0, stderr
    assert "12 items, 60 reviews, 0 skipped" in stdout
    assert (out / "items.jsonl").exists() and (out / "reviews.jsonl").exists()
    # normalized output is itself valid ingest input
    code, stdout, _ = _run(
        [
            "ingest",
            "--items", str(out / "items.jsonl"),
            "--reviews", str(out / "reviews.jsonl"),
            "--out", str(tmp_path / "again"),
        ],
        capsys,
    )
    assert code == 0
    assert "12 items, 60 reviews, 0 skipped" in stdout


def _write_orphan_corpus(tmp_path):
    items = tmp_path / "items.jsonl"
    reviews = tmp_path / "reviews.jsonl"
    items.write_text(
        json.dumps({"item_id": "a", "name": "Alpha", "metadata": {}}) + "\n",
        encoding="utf-8",
    )
    reviews.write_text(
        json.dumps({"review_id": "r1", "item_id": "a", "text": "fine spot"})
        + "\n"
        + json.dumps({"review_id": "r2", "item_id": "ghost", "text": "who?"})
        + "\n",
        encoding="utf-8",
    )
    return items, reviews


def test_ingest_strict_rejects_orphan_reviews(tmp_path, capsys):
    items, reviews = _write_orphan_corpus(tmp_path)
    code, _, stderr = _run(
        ["ingest", "--items", str(items), "--reviews", str(reviews), "--out", str(tmp_path / "o")],
        capsys,
    )
    assert code == 1
    assert "ingest failed:" in stderr and "ghost" in stderr


def test_ingest_lenient_skips_orphan_reviews(tmp_path, capsys):
    items, reviews = _write_orphan_corpus(tmp_path)
    out = tmp_path / "o"
    code, stdout, _ = _run(
        [
            "ingest",
            "--items", str(items),
            "--reviews", str(reviews),
            "--out", str(out),
            "--lenient",
        ],
        capsys,
    )
    assert code == 0
    assert "1 items, 1 reviews, 1 skipped" in stdout
    assert "skipped r2:" in stdout
    kept = (out / "reviews.jsonl").read_text(encoding="utf-8").strip().splitlines()
    assert len(kept) == 1 and json.loads(kept[0])["review_id"] == "r1"


def test_ingest_missing_input_file(tmp_path, capsys):
    code, _, stderr = _run(
        [
            "ingest",
            "--items", str(tmp_path / "absent.jsonl"),
            "--reviews", str(SAMPLE_DIR / "reviews.jsonl"),
            "--out", str(tmp_path / "o"),
        ],
        capsys,
    )
    assert code == 1
    assert "ingest failed:" in stderr


# --------------------------------------------------------------------------
# index build


def test_index_build_happy_path(tmp_path, capsys):
    out = tmp_path / "index"
    code, stdout, stderr = _run(
        ["index", "build", "--corpus", str(SAMPLE_DIR), "--out", str(out)],
        capsys,
    )
    assert code == 0, stderr
    assert "indexed 72 documents (dim 64, provider local-hash-64-0)" in stdout
    for name in ("manifest.json", "docs.jsonl", "vectors.bin", "items.jsonl"):
        assert (out / name).exists()


def test_index_build_is_reproducible(tmp_path, capsys):
    first = tmp_path / "one"
    second = tmp_path / "two"
    for out in (first, second):
        code, _, _ = _run(
            ["index", "build", "--corpus", str(SAMPLE_DIR), "--out", str(out)],
            capsys,
        )
        assert code == 0
    for name in ("manifest.json", "docs.jsonl", "vectors.bin", "items.jsonl"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_index_build_missing_corpus(tmp_path, capsys):
    code, _, stderr = _run(
        ["index", "build", "--corpus", str(tmp_path), "--out", str(tmp_path / "o")],
        capsys,
    )
    assert code == 1
    assert "needs items.jsonl and reviews.jsonl" in stderr


def test_index_build_remote_requires_base_url(capsys):
    code, _, stderr = _run(
        [
            "index", "build",
            "--corpus", str(SAMPLE_DIR),
            "--out", "/tmp/never-created",
            "--encoder", "remote",
        ],
        capsys,
    )
    assert code == 1
    assert "--encoder remote requires --base-url" in stderr


def test_index_build_custom_dim_and_seed(tmp_path, capsys):
    out = tmp_path / "index"
    code, stdout, _ = _run(
        [
            "index", "build",
            "--corpus", str(SAMPLE_DIR),
            "--out", str(out),
            "--dim", "16",
            "--seed", "3",
        ],
        capsys,
    )
    assert code == 0
    assert "provider local-hash-16-3" in stdout


# --------------------------------------------------------------------------
# eval


def test_eval_shipped_fixture_passes(scripted_config, capsys):
    code, stdout, stderr = _run(
        [
            "eval",
            "--config", str(scripted_config),
            "--script", str(FIXTURE_DIR / "eval_conversation.json"),
        ],
        capsys,
    )
    assert code == 0, stderr
    lines = stdout.strip().splitlines()
    assert lines[0] == "greeting: PASS"
    assert lines[1:6] == [f"turn {n}: PASS" for n in range(1, 6)]
    assert lines[6] == "6/6 checks passed"


def test_eval_reports_failed_expectations(scripted_config, tmp_path, capsys):
    script = json.loads((FIXTURE_DIR / "eval_conversation.json").read_text(encoding="utf-8"))
    script["turns"][0]["expect"]["action"] = "clarify"  # wrong on purpose
    bad = tmp_path / "script.json"
    bad.write_text(json.dumps(script), encoding="utf-8")
    code, stdout, _ = _run(
        ["eval", "--config", str(scripted_config), "--script", str(bad)], capsys
    )
    assert code == 1
    assert "turn 1: FAIL — action: expected 'clarify', got 'request_information'" in stdout
    assert "5/6 checks passed" in stdout


def test_eval_turn_errors_do_not_stop_the_run(sample_index_dir, tmp_path, capsys):
    # A backend that can greet and classify but produces unusable constraint
    # updates: every turn errors, later turns still run.
    rules = [
        {"pattern": "opening voice of a conversational item recommender", "response": "Hello!"},
        {"pattern": "*expresses the intent \"provide_preference\"*", "response": "YES", "priority": 5},
        {"pattern": "expresses the intent", "response": "NO", "priority": -5},
        {"pattern": "Update the user's preference constraints", "response": "not json", "priority": 5},
    ]
    script_file = tmp_path / "llm.json"
    script_file.write_text(json.dumps(rules), encoding="utf-8")
    config_file = tmp_path / "config.json"
    config_file.write_text(
        json.dumps(
            {
                "index_dir": str(sample_index_dir),
                "llm": {"backend": "scripted", "script_file": "llm.json"},
                "encoder": {"provider": "local", "dim": 64, "seed": 0},
            }
        ),
        encoding="utf-8",
    )
    eval_script = tmp_path / "eval.json"
    eval_script.write_text(
        json.dumps(
            {
                "greeting_expect": {"response_contains": "Hello"},
                "turns": [{"utterance": "first"}, {"utterance": "second"}],
            }
        ),
        encoding="utf-8",
    )
    code, stdout, _ = _run(
        ["eval", "--config", str(config_file), "--script", str(eval_script)], capsys
    )
    assert code == 1
    lines = stdout.strip().splitlines()
    assert lines[0] == "greeting: PASS"
    assert lines[1].startswith("turn 1: FAIL — turn error:")
    assert lines[2].startswith("turn 2: FAIL — turn error:")
    assert lines[3] == "1/3 checks passed"


def test_eval_rejects_malformed_script(scripted_config, tmp_path, capsys):
    bad = tmp_path / "script.json"
    bad.write_text(
        json.dumps({"turns": [{"utterance": "x", "expect": {"wrong_key": 1}}]}),
        encoding="utf-8",
    )
    code, _, stderr = _run(
        ["eval", "--config", str(scripted_config), "--script", str(bad)], capsys
    )
    assert code == 1
    assert "eval startup failed:" in stderr and "wrong_key" in stderr


def test_eval_missing_config(tmp_path, capsys):
    code, _, stderr = _run(
        [
            "eval",
            "--config", str(tmp_path / "absent.json"),
            "--script", str(FIXTURE_DIR / "eval_conversation.json"),
        ],
        capsys,
    )
    assert code == 1
    assert "eval startup failed:" in stderr


# --------------------------------------------------------------------------
# chat (subprocess: exercises stdin loop and process exit codes)


def _run_chat(scripted_config, stdin_text):
    return subprocess.run(
        [sys.executable, "-m", "convrec.cli", "chat", "--config", str(scripted_config)],
        input=stdin_text,
        capture_output=True,
        text=True,
        timeout=60,
    )


def test_chat_session_roundtrip(scripted_config):
    proc = _run_chat(scripted_config, f"{U1}\n/state\n/quit\n")
    assert proc.returncode == 0, proc.stderr
    assert "Hello there! I am an Edmonton restaurant recommender." in proc.stdout
    assert "What kind of cuisine are you looking for?" in proc.stdout
    assert '"hard_constraints"' in proc.stdout
    assert '"downtown Edmonton"' in proc.stdout


def test_chat_unrecognized_message_asks_to_clarify(scripted_config):
    # Once the mandatory preferences are set, gibberish classifies to no
    # intents and the reply is a clarification, not an error.
    proc = _run_chat(
        scripted_config,
        f"{U1}\nJapanese, something like sushi.\nxyzzy plugh\n/quit\n",
    )
    assert proc.returncode == 0
    assert "could you clarify" in proc.stdout
    assert "turn failed" not in proc.stderr


def test_chat_eof_exits_cleanly(scripted_config):
    proc = _run_chat(scripted_config, U1 + "\n")
    assert proc.returncode == 0


def test_chat_blank_lines_are_ignored(scripted_config):
    proc = _run_chat(scripted_config, "\n\n/quit\n")
    assert proc.returncode == 0
    assert "turn failed" not in proc.stderr


def test_chat_bad_config_fails_fast(tmp_path):
    config = tmp_path / "config.json"
    config.write_text("{}", encoding="utf-8")
    proc = _run_chat(config, "/quit\n")
    assert proc.returncode == 1
    assert "chat startup failed:" in proc.stderr


# --------------------------------------------------------------------------
# parser


def test_parser_requires_a_command(capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main([])
    assert excinfo.value.code == 2


def test_parser_rejects_missing_required_arguments(capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["ingest"])
    assert excinfo.value.code == 2


def test_parser_rejects_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["frobnicate"])
    assert excinfo.value.code == 2
