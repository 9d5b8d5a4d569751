import json
import os
import subprocess
import sys
import time

import pytest

from lexrec import cli
from lexrec.corpus import write_conllulex
from lexrec.synthetic import random_corpus


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_record(err):
    lines = err.strip().splitlines()
    rec = json.loads(lines[-1])
    assert set(rec) >= {"error", "exit", "message"}
    return rec


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    sents = random_corpus(120, seed=5, max_len=12)
    paths = {}
    for name, part in (("train", sents[:100]), ("dev", sents[100:110]), ("test", sents[110:])):
        p = d / f"{name}.conllulex"
        p.write_text("".join(write_conllulex(part)), encoding="utf-8")
        paths[name] = p
    return paths


def test_usage_errors(capsys, tmp_path):
    code, _, err = run(capsys, "frobnicate")
    assert code == cli.EXIT_USAGE and error_record(err)["error"] == "usage"
    code, _, err = run(capsys, "validate", tmp_path / "missing.conllulex")
    assert code == cli.EXIT_USAGE
    code, _, _ = run(capsys)
    assert code == cli.EXIT_USAGE


def test_validate(capsys, fig2_path, tmp_path):
    assert run(capsys, "validate", fig2_path)[0] == 0
    bad = tmp_path / "bad.conllulex"
    text = open(fig2_path).read().replace("O-N-n.ACT", "O-N-v.Communication").replace("\tn.ACT\t", "\tv.Communication\t")
    bad.write_text(text)
    code, out, err = run(capsys, "validate", bad)
    assert code == cli.EXIT_DATA
    assert "lexcat-supersense" in out + err


def test_malformed_file_json_error(capsys, tmp_path):
    bad = tmp_path / "x.conllulex"
    bad.write_text("1\tonly\tthree\n\n")
    code, _, err = run(capsys, "encode", bad)
    rec = error_record(err)
    assert code == cli.EXIT_DATA and rec["exit"] == 2 and rec.get("rule") == "column-count"
    assert len(err.strip().splitlines()) == 1


def test_encode_decode_round_trip(capsys, fig2_path, tmp_path):
    tags = tmp_path / "t.tags"
    assert run(capsys, "encode", fig2_path, "-o", tags)[0] == 0
    assert "took\tB-V.VPC.full-v.Motion" in tags.read_text()
    out = tmp_path / "back.conllulex"
    assert run(capsys, "decode", tags, "--tokens", fig2_path, "-o", out)[0] == 0
    assert out.read_text() == open(fig2_path).read()


def test_decode_invalid_tags_no_partial_output(capsys, fig2_path, tmp_path):
    tags = tmp_path / "t.tags"
    run(capsys, "encode", fig2_path, "-o", tags)
    tags.write_text(tags.read_text().replace("O-PRON", "I_", 1))
    out = tmp_path / "out.conllulex"
    code, _, err = run(capsys, "decode", tags, "--tokens", fig2_path, "-o", out)
    assert code == cli.EXIT_DATA and not out.exists()
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".lexrec-")]


def test_convert(capsys, fig2_path):
    code, out, _ = run(capsys, "convert", fig2_path, "--to", "cupt")
    assert code == 0 and "1:VPC.full" in out
    code, out, _ = run(capsys, "convert", fig2_path, "--to", "dimsum")
    assert code == 0 and "v.motion" in out


@pytest.mark.parametrize("task,fmt", [("streusle", None), ("parseme", "cupt"), ("dimsum", "dimsum")])
def test_eval_self_perfect(capsys, fig2_path, tmp_path, task, fmt):
    gold = fig2_path
    if fmt:
        gold = tmp_path / f"g.{fmt}"
        run(capsys, "convert", fig2_path, "--to", fmt, "-o", gold)
    code, out, _ = run(capsys, "eval", "--task", task, gold, gold, "--records")
    assert code == 0
    rows = [l.split("\t") for l in out.strip().splitlines()[1:]]
    assert rows and all(float(r[6]) == 1.0 for r in rows)


def test_derive_constraints(capsys, corpus_files, tmp_path):
    out = tmp_path / "table.txt"
    assert run(capsys, "derive-constraints", corpus_files["train"], "-o", out)[0] == 0
    assert out.read_text().strip()


def test_pipeline(capsys, corpus_files, tmp_path):
    t0 = time.time()
    model = tmp_path / "m.npz"
    logf = tmp_path / "train.log"
    code, _, err = run(capsys, "train", corpus_files["train"], "--dev", corpus_files["dev"], "-o", model,
                       "--log", logf, "--epochs", 3, "--batch-size", 8, "--lr", 0.05, "--hash-bits", 16)
    assert code == 0, err
    recs = [json.loads(l) for l in logf.read_text().splitlines()]
    assert [r["epoch"] for r in recs] == [1, 2, 3] and all("dev_accuracy" in r for r in recs)
    pred = tmp_path / "pred.conllulex"
    assert run(capsys, "tag", model, corpus_files["test"], "-o", pred)[0] == 0
    assert run(capsys, "validate", pred)[0] == 0
    code, out, _ = run(capsys, "eval", "--task", "streusle", corpus_files["test"], pred)
    assert code == 0 and "tags.full" in out
    # parallel tagging gives byte-identical output
    pred2 = tmp_path / "pred2.conllulex"
    assert run(capsys, "tag", model, corpus_files["test"], "-o", pred2, "--jobs", 2)[0] == 0
    assert pred.read_bytes() == pred2.read_bytes()
    for fmt in ("tags", "cupt", "dimsum"):
        src = tmp_path / f"test.{fmt}"
        assert run(capsys, "convert", corpus_files["test"], "--to", fmt, "-o", src)[0] == 0
        code, out, _ = run(capsys, "tag", model, src, "--format", fmt)
        assert code == 0 and out
    # retraining with the same seed gives a byte-identical model
    model2 = tmp_path / "m2.npz"
    run(capsys, "train", corpus_files["train"], "--dev", corpus_files["dev"], "-o", model2,
        "--epochs", 3, "--batch-size", 8, "--lr", 0.05, "--hash-bits", 16)
    assert model.read_bytes() == model2.read_bytes()
    assert time.time() - t0 < 60


def test_tag_missing_model(capsys, fig2_path, tmp_path):
    code, _, err = run(capsys, "tag", tmp_path / "nope.npz", fig2_path)
    assert code == cli.EXIT_USAGE and error_record(err)["exit"] == 1


def test_verbose_flag_positions(capsys, fig2_path):
    assert run(capsys, "-v", "validate", fig2_path)[0] == 0
    assert run(capsys, "validate", "-v", fig2_path)[0] == 0


def test_console_entry_point(fig2_path):
    r = subprocess.run([sys.executable, "-m", "lexrec.cli", "validate", fig2_path],
                       capture_output=True, text=True)
    assert r.returncode == 0
