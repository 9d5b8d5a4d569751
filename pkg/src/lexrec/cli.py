"""Command-line interface: ``lexrec <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal failure.
Failures print one JSON object on stderr. Output files are written to a
temporary file and renamed, so a failed run never leaves partial output.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Optional, Sequence

from . import convert, crf, metrics
from .constraints import ConstraintTableError, LexcatConstraintTable, build_masks
from .corpus import (
    ConllulexError,
    Token,
    parse_conllulex,
    parse_conllulex_tokens,
    validate_sentence,
    write_conllulex,
)
from .decoder import InfeasibleLattice
from .tagcodec import DecodeError, LexTag, decode_sentence, encode, format_tag, parse_tag

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
FORMATS = ("conllulex", "cupt", "dimsum", "tags")

log = logging.getLogger("lexrec")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# I/O helpers


def _read_lines(path: str) -> list[str]:
    if path == "-":
        return sys.stdin.read().splitlines(keepends=True)
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as f:
        return f.readlines()


def write_atomic(path: Optional[str], lines: Iterable[str]) -> None:
    text = "".join(lines)
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".lexrec-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_binary(path: str, writer) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".lexrec-", dir=d)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_tags_file(lines: Iterable[str]) -> list[list[tuple[str, LexTag]]]:
    """Two-column ``token TAB tag`` file, blank line between sentences."""
    out, cur = [], []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if cur:
                out.append(cur)
                cur = []
            continue
        form, sep, tag = line.rpartition("\t")
        if not sep:
            raise DataError(f"line {lineno}: expected 'token<TAB>tag'")
        try:
            cur.append((form, parse_tag(tag)))
        except ValueError as e:
            raise DataError(f"line {lineno}: {e}") from None
    if cur:
        out.append(cur)
    return out


def write_tags_file(rows: Iterable[tuple[Sequence[Token], Sequence[LexTag]]]) -> list[str]:
    out = []
    for tokens, tags in rows:
        for t, g in zip(tokens, tags):
            out.append(f"{t.form}\t{format_tag(g)}\n")
        out.append("\n")
    return out


def select_column(tok: Token, selector: str) -> str:
    """Value of a token column: a CoNLL-U field name or ``misc:KEY``."""
    if selector.startswith("misc:"):
        key = selector[5:]
        for item in tok.misc.split("|"):
            k, _, v = item.partition("=")
            if k == key:
                return v
        raise DataError(f"token {tok.index} ({tok.form}): MISC has no {key}")
    if selector not in ("upos", "xpos", "lemma", "form"):
        raise UsageError(f"unknown column selector {selector!r}")
    return getattr(tok, selector)


def load_table(spec: Optional[str]) -> Optional[LexcatConstraintTable]:
    if spec is None or spec == "none":
        return None
    if spec == "default":
        return LexcatConstraintTable.default()
    if not os.path.exists(spec):
        raise UsageError(f"constraint table not found: {spec}")
    return LexcatConstraintTable.from_file(spec)


def _read_input(path: str, fmt: str):
    """(templates for output, sentences carrying the tokens to tag)."""
    lines = _read_lines(path)
    if fmt == "conllulex":
        sents = parse_conllulex_tokens(lines)
        return sents, sents
    if fmt == "cupt":
        ps = convert.parse_cupt(lines)
        return ps, [convert.sentence_from_tokens(p.tokens, p.sent_id) for p in ps]
    if fmt == "dimsum":
        ds = convert.parse_dimsum(lines)
        return ds, [convert.sentence_from_tokens(d.tokens, d.sent_id) for d in ds]
    if fmt == "tags":
        rows = parse_tags_file(lines)
        sents = [convert.sentence_from_tokens([Token(i, f) for i, (f, _) in enumerate(r, 1)],
                                              f"s{k}") for k, r in enumerate(rows, 1)]
        return sents, sents
    raise UsageError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# tagging (optionally in worker processes)

_WORKER: dict = {}


def _init_worker(model_path, table_spec, pos_sel, lemma_sel, scope):
    _WORKER["model"] = crf.load_model(model_path)
    _WORKER["table"] = load_table(table_spec)
    _WORKER["cfg"] = (pos_sel, lemma_sel, scope)


def _tag_one(item):
    tokens, vectors = item
    model, table = _WORKER["model"], _WORKER["table"]
    pos_sel, lemma_sel, scope = _WORKER["cfg"]
    masks = None
    if table is not None:
        pairs = [(select_column(t, pos_sel), select_column(t, lemma_sel)) for t in tokens]
        masks = build_masks(pairs, model.tagset, table, scope)
    return crf.tag(model, crf.Example(tokens, None, vectors), masks)


def tag_all(model_path, items, table_spec, pos_sel, lemma_sel, scope, jobs=1):
    if jobs <= 1:
        _init_worker(model_path, table_spec, pos_sel, lemma_sel, scope)
        return [_tag_one(x) for x in items]
    with ProcessPoolExecutor(jobs, initializer=_init_worker,
                             initargs=(model_path, table_spec, pos_sel, lemma_sel, scope)) as ex:
        return list(ex.map(_tag_one, items, chunksize=16))


# ---------------------------------------------------------------------------
# commands


def cmd_validate(a) -> int:
    sents = parse_conllulex(_read_lines(a.input), validate=False)
    out = []
    for s in sents:
        for v in validate_sentence(s):
            out.append(f"{s.sent_id}\t{v.rule}\t{','.join(map(str, v.indices))}\t{v.message}\n")
    write_atomic(a.output, out)
    log.info("%d sentences, %d violations", len(sents), len(out))
    return EXIT_OK if not out else EXIT_DATA


def cmd_encode(a) -> int:
    sents = parse_conllulex(_read_lines(a.input))
    write_atomic(a.output, write_tags_file((s.tokens, encode(s)) for s in sents))
    return EXIT_OK


def cmd_decode(a) -> int:
    rows = parse_tags_file(_read_lines(a.input))
    if a.tokens:
        templates = parse_conllulex_tokens(_read_lines(a.tokens))
        if len(templates) != len(rows):
            raise DataError(f"{len(rows)} tagged sentences but {len(templates)} in {a.tokens}")
    else:
        templates = [convert.sentence_from_tokens(
            [Token(i, f) for i, (f, _) in enumerate(r, 1)], f"s{k}") for k, r in enumerate(rows, 1)]
    out = []
    for k, (tpl, r) in enumerate(zip(templates, rows), 1):
        try:
            out.append(decode_sentence(tpl, [t for _, t in r]))
        except (DecodeError, ValueError) as e:
            raise DataError(f"sentence {k} ({tpl.sent_id}): {e}") from None
    write_atomic(a.output, write_conllulex(out))
    return EXIT_OK


def _read_vectors(path):
    return crf.read_vectors(_read_lines(path)) if path else None


def cmd_train(a) -> int:
    train_s = parse_conllulex(_read_lines(a.train))
    dev_s = parse_conllulex(_read_lines(a.dev)) if a.dev else []
    tv, dv = _read_vectors(a.vectors), _read_vectors(a.dev_vectors)
    if a.provider == "projection" and tv is None:
        raise UsageError("--provider projection needs --vectors")
    if tv is not None and len(tv) != len(train_s):
        raise DataError(f"{len(tv)} vector blocks for {len(train_s)} training sentences")
    if dv is not None and len(dv) != len(dev_s):
        raise DataError(f"{len(dv)} vector blocks for {len(dev_s)} dev sentences")
    cfg = crf.TrainConfig(lr=a.lr, batch_size=a.batch_size, max_epochs=a.epochs,
                          clip_norm=a.clip, patience=a.patience, l2=a.l2, seed=a.seed)
    kw = {}
    if a.provider == "features":
        kw = {"templates": tuple(a.templates.split(",")), "dim": 2 ** a.hash_bits}
    log_f = open(a.log, "a", encoding="utf-8") if a.log else None

    def on_epoch(rec):
        log.info("epoch %d: train nll %.2f, dev accuracy %s", rec.epoch, rec.train_nll,
                 "-" if rec.dev_accuracy is None else f"{rec.dev_accuracy:.4f}")
        if log_f:
            log_f.write(rec.to_json() + "\n")
            log_f.flush()

    try:
        model = crf.train(crf.examples_from_sentences(train_s, tv), cfg,
                          crf.examples_from_sentences(dev_s, dv) if dev_s else None,
                          provider=a.provider, table=load_table(a.constraints),
                          on_epoch=on_epoch, **kw)
    finally:
        if log_f:
            log_f.close()
    _atomic_binary(a.output, lambda p: crf.save_model(model, p, cfg))
    return EXIT_OK


def cmd_tag(a) -> int:
    if not os.path.exists(a.model):
        raise UsageError(f"model file not found: {a.model}")
    templates, sents = _read_input(a.input, a.format)
    vecs = _read_vectors(a.vectors)
    if vecs is not None and len(vecs) != len(sents):
        raise DataError(f"{len(vecs)} vector blocks for {len(sents)} sentences")
    table_spec = a.constraints
    load_table(table_spec)  # fail early on a bad table
    items = [(s.tokens, vecs[i] if vecs else None) for i, s in enumerate(sents)]
    tags = tag_all(a.model, items, table_spec, a.pos_column, a.lemma_column, a.scope, a.jobs)
    decoded = [decode_sentence(s, t) for s, t in zip(sents, tags)]
    if a.format == "conllulex":
        out = write_conllulex(decoded)
    elif a.format == "cupt":
        out = convert.write_cupt(convert.parseme_from_tokens(p, d) for p, d in zip(templates, decoded))
    elif a.format == "dimsum":
        out = convert.write_dimsum(convert.dimsum_from_tokens(t, d) for t, d in zip(templates, decoded))
    else:
        out = write_tags_file((s.tokens, t) for s, t in zip(sents, tags))
    write_atomic(a.output, out)
    return EXIT_OK


def cmd_eval(a) -> int:
    g_lines, p_lines = _read_lines(a.gold), _read_lines(a.pred)
    if a.task == "streusle":
        report = metrics.streusle_report(parse_conllulex(g_lines), parse_conllulex(p_lines),
                                         extended=a.extended)
    elif a.task == "parseme":
        report = metrics.parseme_report(convert.parse_cupt(g_lines), convert.parse_cupt(p_lines))
    else:
        report = metrics.dimsum_report(convert.parse_dimsum(g_lines), convert.parse_dimsum(p_lines))
    write_atomic(a.output, report.records() if a.records else report.table())
    return EXIT_OK


def cmd_convert(a) -> int:
    sents = parse_conllulex(_read_lines(a.input))
    if a.to == "cupt":
        out = convert.write_cupt(convert.to_parseme(s) for s in sents)
    elif a.to == "dimsum":
        out = convert.write_dimsum(convert.to_dimsum(s) for s in sents)
    else:
        out = write_tags_file((s.tokens, encode(s)) for s in sents)
    write_atomic(a.output, out)
    return EXIT_OK


def cmd_derive_constraints(a) -> int:
    sents = parse_conllulex(_read_lines(a.input))
    table = LexcatConstraintTable.from_corpus(sents, tuple(a.lemma_upos.split(",")))
    write_atomic(a.output, table.to_lines())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lexrec", description="Lexical semantic recognition toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("validate", parents=[common], help="check CONLLULEX structure")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("encode", parents=[common], help="CONLLULEX -> token/tag file")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", parents=[common], help="token/tag file -> CONLLULEX")
    s.add_argument("input")
    s.add_argument("--tokens", help="CoNLL-U/CONLLULEX file supplying the token columns")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_decode)

    d = crf.TrainConfig()
    s = sub.add_parser("train", parents=[common], help="train a CRF tagger")
    s.add_argument("train")
    s.add_argument("--dev")
    s.add_argument("-o", "--output", required=True, help="model file")
    s.add_argument("--log", help="append one JSON record per epoch")
    s.add_argument("--provider", choices=("features", "projection"), default="features")
    s.add_argument("--templates", default=",".join(crf.DEFAULT_TEMPLATES))
    s.add_argument("--hash-bits", type=int, default=22)
    s.add_argument("--vectors")
    s.add_argument("--dev-vectors")
    s.add_argument("--constraints", default=None,
                   help="table used when decoding dev: path, 'default' or 'none'")
    s.add_argument("--lr", type=float, default=d.lr)
    s.add_argument("--batch-size", type=int, default=d.batch_size)
    s.add_argument("--epochs", type=int, default=d.max_epochs)
    s.add_argument("--clip", type=float, default=d.clip_norm)
    s.add_argument("--patience", type=int, default=d.patience)
    s.add_argument("--l2", type=float, default=d.l2)
    s.add_argument("--seed", type=int, default=d.seed)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("tag", parents=[common], help="tag sentences with constrained decoding")
    s.add_argument("model")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--format", choices=FORMATS, default="conllulex")
    s.add_argument("--constraints", default="default", help="path, 'default' or 'none'")
    s.add_argument("--scope", choices=("single", "all"), default="single")
    s.add_argument("--pos-column", default="upos", help="upos, xpos or misc:KEY")
    s.add_argument("--lemma-column", default="lemma", help="lemma or misc:KEY")
    s.add_argument("--vectors")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_tag)

    s = sub.add_parser("eval", parents=[common], help="score predictions against gold")
    s.add_argument("--task", choices=("streusle", "parseme", "dimsum"), required=True)
    s.add_argument("gold")
    s.add_argument("pred")
    s.add_argument("--records", action="store_true", help="tab-separated records instead of a table")
    s.add_argument("--extended", action="store_true", help="add strong-unit and per-mode link rows")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("convert", parents=[common], help="project CONLLULEX to another format")
    s.add_argument("input")
    s.add_argument("--to", choices=("cupt", "dimsum", "tags"), required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("derive-constraints", parents=[common], help="UPOS/lemma -> lexcat table from gold data")
    s.add_argument("input")
    s.add_argument("--lemma-upos", default="AUX")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_derive_constraints)
    return p


def _fail(code: int, kind: str, message: str, **extra) -> int:
    rec = {"error": kind, "exit": code, "message": message}
    rec.update({k: v for k, v in extra.items() if v is not None})
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return _fail(EXIT_USAGE, "usage", str(e))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        return _fail(EXIT_USAGE, "usage", str(e))
    except ConllulexError as e:
        return _fail(EXIT_DATA, "data", str(e), rule=e.rule, sent_id=e.sent_id, line=e.line)
    except (DataError, convert.FormatError, DecodeError, ConstraintTableError) as e:
        return _fail(EXIT_DATA, "data", str(e))
    except (InfeasibleLattice, AssertionError) as e:
        return _fail(EXIT_INTERNAL, "internal", f"{type(e).__name__}: {e}")
    except (ValueError, KeyError, OSError) as e:
        return _fail(EXIT_DATA, "data", f"{type(e).__name__}: {e}")
    except Exception as e:  # pragma: no cover
        return _fail(EXIT_INTERNAL, "internal", f"{type(e).__name__}: {e}")


if __name__ == "__main__":
    sys.exit(main())
