"""Command-line interface: ``nnalign {train,align,score,symmetrize,analyze}``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

import argparse
import logging
import os
import sys
from collections import Counter

from . import analysis
from .aligner import Aligner
from .corpus import EMPTY_GOLD, DataError, load_gold, load_parallel
from .decoder import grow_diag_final, read_pharaoh, transpose, write_pharaoh
from .trainer import ConfigError, TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

logger = logging.getLogger("nnalign")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _count_lines(path):
    with open(path, encoding="utf-8") as fh:
        return sum(1 for _ in fh)


def _read_tokens(path):
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh]


def cmd_train(args):
    config = TrainConfig.from_file(args.config)
    if not config.output:
        raise ConfigError("config needs an output directory")
    result = train(config)
    for epoch, (ll, score) in enumerate(result.history, 1):
        extra = "" if score is None else f"\tdev_aer={score:.4f}"
        print(f"epoch {epoch}\tloglik={ll:.4f}{extra}")
    return EXIT_OK


def cmd_align(args):
    aligner = Aligner.load(args.model)
    n = _count_lines(args.src)
    pairs = load_parallel(args.src, args.tgt, max_len=None)
    links = dict(zip((p.index for p in pairs), aligner.align(pairs)))
    write_pharaoh([links.get(k, frozenset()) for k in range(n)], args.out)
    return EXIT_OK


def _gold_list(gold, n):
    return [gold.get(k + 1, EMPTY_GOLD) for k in range(n)]


def cmd_score(args):
    pred = read_pharaoh(args.pred)
    gold = load_gold(args.gold)
    if gold and max(gold) > len(pred):
        raise DataError(f"gold mentions sentence {max(gold)} but {args.pred} has {len(pred)} lines")
    report = analysis.score_corpus(pred, gold, len(pred))
    sys.stdout.write(report.as_text())
    return EXIT_OK


def cmd_symmetrize(args):
    fwd = read_pharaoh(args.fwd)
    rev = read_pharaoh(args.rev)
    if len(fwd) != len(rev):
        raise DataError(f"{args.fwd} has {len(fwd)} lines but {args.rev} has {len(rev)}")
    if args.transpose_rev:
        rev = [transpose(r) for r in rev]
    out = []
    for k, (f, r) in enumerate(zip(fwd, rev), 1):
        try:
            out.append(grow_diag_final(f, r, final_and=args.final_and))
        except ValueError as exc:
            raise DataError(f"sentence {k}: {exc}") from None
    write_pharaoh(out, args.out)
    return EXIT_OK


def cmd_analyze(args):
    src = _read_tokens(args.src)
    tgt = _read_tokens(args.tgt)
    pred = read_pharaoh(args.pred)
    if not (len(src) == len(tgt) == len(pred)):
        raise DataError("test source, test target and predictions must have the same number of lines")
    for k, (links, s, t) in enumerate(zip(pred, src, tgt), 1):
        if any(j > len(s) or i > len(t) for j, i in links):
            raise DataError(f"{args.pred}:{k}: link outside the sentence pair")
    gold = _gold_list(load_gold(args.gold), len(pred))
    lengths = [len(s) for s in src]
    train_src = _read_tokens(args.train_src)
    train_tgt = _read_tokens(args.train_tgt)
    src_counts = Counter(w for s in train_src for w in s)
    tgt_counts = Counter(w for s in train_tgt for w in s)
    os.makedirs(args.outdir, exist_ok=True)

    def out(name):
        return os.path.join(args.outdir, name)

    with open(out("aer.txt"), "w", encoding="utf-8") as fh:
        fh.write(analysis.aer(pred, [g.sure for g in gold], [g.possible for g in gold]).as_text())

    acc = analysis.accuracy_breakdown(pred, gold, lengths)
    with open(out("accuracy.tsv"), "w", encoding="utf-8") as fh:
        fh.write("category\tcount\n")
        for name in ("null_correct", "null_incorrect", "link_correct", "link_incorrect"):
            fh.write(f"{name}\t{getattr(acc, name)}\n")

    def write_recall(path, table):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("group\tnull\tnon-null\n")
            for group, c in table.items():
                fh.write(f"{group}\t{c['null']}\t{c['non-null']}\n")

    groups = analysis.known_unknown_groups(tgt, set(tgt_counts))
    write_recall(out("recall_known.tsv"), analysis.recall_breakdown(pred, gold, groups))
    if args.pos:
        tags = _read_tokens(args.pos)
        if [len(t) for t in tags] != [len(t) for t in tgt]:
            raise DataError(f"{args.pos}: tags must match the target tokens line by line")
        write_recall(out("recall_pos.tsv"), analysis.recall_breakdown(pred, gold, analysis.pos_groups(tags)))

    labels = analysis.confusion_labels(args.K)
    analysis.emit_heatmap(analysis.jump_confusion(pred, gold, lengths, args.K), out("jump_confusion.tsv"),
                          labels, labels)

    buckets = analysis.FrequencyBuckets.from_counts(src_counts, tgt_counts)
    analysis.emit_heatmap(
        analysis.garbage_table(pred, gold, src, tgt, buckets),
        out("garbage.tsv"),
        analysis.FrequencyBuckets.SOURCE_ROWS,
        analysis.FrequencyBuckets.TARGET_COLS,
        corner="source\\target",
    )
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="nnalign", description="Neural and count-based IBM-1/HMM word aligners.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("align", help="write Pharaoh alignments for a bitext")
    p.add_argument("--model", required=True, help="checkpoint directory")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("score", help="print AER against a gold file")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("symmetrize", help="combine two directions with grow-diag-final")
    p.add_argument("--fwd", required=True)
    p.add_argument("--rev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--transpose-rev", action="store_true",
                   help="the reverse file is in target-source order, as written by aligning the swapped bitext")
    p.add_argument("--final-and", action="store_true", help="final step needs both words unaligned")
    p.set_defaults(func=cmd_symmetrize)

    p = sub.add_parser("analyze", help="write the error-analysis reports")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--src", required=True, help="test source text")
    p.add_argument("--tgt", required=True, help="test target text")
    p.add_argument("--train-src", required=True)
    p.add_argument("--train-tgt", required=True)
    p.add_argument("--pos", help="UPOS tags parallel to the test target text")
    p.add_argument("--K", type=int, default=5, help="jump window for the confusion matrix")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"nnalign: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
