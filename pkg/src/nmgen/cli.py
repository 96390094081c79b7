"""Command-line interface: ``nmgen <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import numerics
from .checkpoint import CheckpointError
from .estimators import TreeLM, WordReorderer
from .metrics import (
    bleu,
    entropy_by_depth,
    entropy_csv,
    exact_match_rate,
    pair_report,
    sample_bleu,
    token_f1,
)
from .oracle import ORACLES, Episode
from .trainer import format_log
from .tree import TreeError, in_order_nodes, in_order_sentence, tree_to_dot
from .vocab import EmptyCorpus, read_corpus, tokenize

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 1, 2, 3

# train options that may also come from --config (JSON); flags win over the file
TRAIN_OPTIONS = {
    "oracle": "annealed", "epochs": 10, "batch_size": 32, "lr": 1e-3,
    "lr_halve_every": 20, "clip_norm": 1.0, "beta_burn_in": 20, "beta_rate": 0.05,
    "rollin": None, "split": "random", "seed": 0, "aux_end": False, "tree_enc": False,
    "d_emb": 64, "d_hidden": 64, "n_layers": 1, "d_enc": 64, "max_depth": None,
    "min_count": 1, "embeddings": None, "val_samples": 100,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_train_args(p, conditional=False):
    p.add_argument("--corpus", required=True, help="one pre-tokenized sentence per line")
    if conditional:
        p.add_argument("--bags", help="bag file aligned with --corpus (default: the corpus itself)")
    p.add_argument("--valid", help="validation sentences")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="also write epoch lines to this file")
    p.add_argument("--config", help="JSON file with training options")
    p.add_argument("--oracle", choices=ORACLES, default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-halve-every", type=int)
    p.add_argument("--clip-norm", type=float)
    p.add_argument("--beta-burnin", dest="beta_burn_in", type=int)
    p.add_argument("--beta-rate", type=float)
    p.add_argument("--rollin", choices=("greedy", "stochastic"))
    p.add_argument("--split", choices=("random", "leftmost"))
    p.add_argument("--aux-end", action="store_true", default=None)
    p.add_argument("--tree-enc", action="store_true", default=None)
    p.add_argument("--d-emb", type=int)
    p.add_argument("--d-hidden", type=int)
    p.add_argument("--n-layers", type=int)
    p.add_argument("--d-enc", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-count", type=int)
    p.add_argument("--embeddings", help="pretrained vectors: 'token v1 v2 ...' per line")
    p.add_argument("--val-samples", type=int)


def _add_decode_args(p):
    p.add_argument("--mode", choices=("sample", "greedy"), default="sample")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-k", type=int)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--max-nodes", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="nmgen", description="Train, sample and evaluate binary-tree text generators.")
    parser.add_argument("--debug", action="store_true", help="trap non-finite values")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit an unconditional tree generator")
    _add_train_args(p)

    p = sub.add_parser("sample", help="draw sentences from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("-n", type=int, required=True)
    _add_decode_args(p)
    p.add_argument("--out")
    p.add_argument("--emit-trees", metavar="DIR")
    p.add_argument("--emit-order", action="store_true")
    p.add_argument("--stats-against", nargs=2, metavar=("TRAIN", "VALID"))
    p.add_argument("--entropy-csv", metavar="FILE")

    p = sub.add_parser("complete", help="fill in a seed-tree template")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--template", required=True, help='e.g. "(favorite () (food () (! () ())))"')
    p.add_argument("-n", type=int, default=1)
    _add_decode_args(p)
    p.add_argument("--out")
    p.add_argument("--emit-order", action="store_true")

    p = sub.add_parser("reorder-train", help="fit a bag-of-words to sentence model")
    _add_train_args(p, conditional=True)

    p = sub.add_parser("reorder-eval", help="reorder bags with a conditional checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="bags (or sentences), one per line")
    p.add_argument("--ref", help="reference sentences (default: --input)")
    p.add_argument("--out", help="write predictions here")
    p.add_argument("--strict-permutation", action="store_true")
    p.add_argument("--bleu-n", type=int, default=4)

    p = sub.add_parser("eval", help="score hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--bleu-n", type=int, default=4)
    p.add_argument("--sample-bleu", action="store_true",
                   help="use the whole reference file as references for every hypothesis")

    p = sub.add_parser("inspect-tree", help="show an oracle roll-in for one sentence")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--oracle", choices=ORACLES, default="uniform")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dot", help="write the DOT graph here instead of stdout")

    p = sub.add_parser("tokenize", help="split raw text on whitespace and punctuation")
    p.add_argument("--input", help="text file (default: stdin)")
    p.add_argument("--lower", action="store_true")
    return parser


# --- helpers -----------------------------------------------------------------

def _write_lines(lines, path=None):
    text = "".join(f"{line}\n" for line in lines)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _train_options(args):
    opts = dict(TRAIN_OPTIONS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(opts)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(loaded)
    for key in TRAIN_OPTIONS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _read(path):
    sents = read_corpus(path)
    if not sents:
        raise EmptyCorpus(f"{path} contains no sentences")
    return sents


def _decode_kw(args):
    return dict(mode=args.mode, temperature=args.temperature, top_k=args.top_k, tau=args.tau,
                max_nodes=args.max_nodes, max_depth=args.max_depth, seed=args.seed)


def _annotated(decoded, vocab):
    nodes = decoded.tree.nodes
    return " ".join(f"{vocab.tokens[nodes[i].action]}:{nodes[i].order + 1}"
                    for i in in_order_nodes(decoded.tree))


def _emit_log(log_path):
    handle = open(log_path, "w", encoding="utf-8") if log_path else None

    def on_epoch(rec):
        line = format_log(rec)
        print(line, flush=True)
        if handle:
            handle.write(line + "\n")
            handle.flush()

    return on_epoch, handle


# --- subcommands -------------------------------------------------------------

def cmd_train(args, conditional=False):
    opts = _train_options(args)
    if opts["rollin"] is None:
        opts["rollin"] = "greedy" if conditional else "stochastic"
    corpus = _read(args.corpus)
    valid = _read(args.valid) if args.valid else None
    est = (WordReorderer if conditional else TreeLM)(**opts)
    on_epoch, handle = _emit_log(args.log)
    try:
        if conditional:
            bags = _read(args.bags) if args.bags else corpus
            est.fit(bags, corpus, valid=(valid, valid) if valid else None, on_epoch=on_epoch)
        else:
            est.fit(corpus, valid=valid, on_epoch=on_epoch)
    finally:
        if handle:
            handle.close()
    est.save(args.out)
    return 0


def cmd_sample(args):
    est = TreeLM.load(args.ckpt)
    record = bool(args.entropy_csv)
    decoded = est.sample(args.n, record=record, **_decode_kw(args))
    vocab = est.vocab_
    if args.emit_order:
        lines = [_annotated(d, vocab) for d in decoded]
    else:
        lines = [" ".join(vocab.decode(d.sentence)) for d in decoded]
    _write_lines(lines, args.out)
    if args.emit_trees:
        os.makedirs(args.emit_trees, exist_ok=True)
        for i, d in enumerate(decoded):
            with open(os.path.join(args.emit_trees, f"sample_{i:05d}.dot"), "w", encoding="utf-8") as fh:
                fh.write(tree_to_dot(d.tree, vocab.tokens, name=f"sample_{i}"))
    if args.entropy_csv:
        table = entropy_by_depth([d.trace for d in decoded], len(vocab))
        with open(args.entropy_csv, "w", encoding="utf-8") as fh:
            fh.write(entropy_csv(table))
    if args.stats_against:
        train_set, valid_set = (_read(p) for p in args.stats_against)
        stats = est.stats(decoded, train_set, valid_set)
        stream = sys.stdout if args.out else sys.stderr
        for k, v in stats.items():
            print(f"{k}={_fmt(v)}", file=stream)
    return 0


def cmd_complete(args):
    est = TreeLM.load(args.ckpt)
    decoded = est.complete(args.template, args.n, **_decode_kw(args))
    vocab = est.vocab_
    if args.emit_order:
        lines = [_annotated(d, vocab) for d in decoded]
    else:
        lines = [" ".join(vocab.decode(d.sentence)) for d in decoded]
    _write_lines(lines, args.out)
    return 0


def cmd_reorder_eval(args):
    est = TreeLM.load(args.ckpt)
    if not isinstance(est, WordReorderer):
        raise CheckpointError("checkpoint holds an unconditional model")
    est.strict_permutation = args.strict_permutation
    bags = _read(args.input)
    refs = _read(args.ref) if args.ref else bags
    preds = est.predict(bags)
    if args.out:
        _write_lines([" ".join(p) for p in preds], args.out)
    _report(pair_report(preds, refs, args.bleu_n))
    return 0


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _report(metrics):
    width = max(len(k) for k in metrics)
    print("metric".ljust(width) + "  value")
    for k, v in metrics.items():
        print(f"{k.ljust(width)}  {_fmt(v)}")
    for k, v in metrics.items():
        print(f"{k}={_fmt(v)}")


def cmd_eval(args):
    hyps = read_corpus(args.hyp)
    refs = _read(args.ref)
    if not hyps:
        raise EmptyCorpus(f"{args.hyp} contains no hypotheses")
    if args.sample_bleu:
        b = sample_bleu(hyps, refs, args.bleu_n)
        _report({"bleu": b.score, "bp": b.brevity_penalty, "n": len(hyps)})
        return 0
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")
    b = bleu(hyps, [[r] for r in refs], args.bleu_n)
    _report({
        "bleu": b.score,
        "bp": b.brevity_penalty,
        "f1": float(np.mean([token_f1(h, r) for h, r in zip(hyps, refs)])),
        "em": exact_match_rate(hyps, refs),
        "n": len(hyps),
    })
    return 0


def cmd_inspect(args):
    est = TreeLM.load(args.ckpt)
    vocab, policy = est.vocab_, est.policy_
    tokens = args.input.split()
    target = vocab.encode(tokens)
    bag = target if est.conditional else None
    rng = np.random.default_rng(args.seed)
    ep = Episode(target, args.oracle, rng, args.beta, est.rollin, est.split)
    state = policy.initial_state(1, bags=[bag] if bag is not None else None)

    def name(a):
        return vocab.tokens[a]

    t = 0
    while not ep.done:
        probs = policy.action_dist(state)[0]
        slot = ep.slot
        node = ep.tree.nodes[slot]
        span = " ".join(name(a) for a in ep.state.tokens(slot))
        dist = ep.dist(probs)
        action = ep.commit(ep.choose(dist))
        where = "".join("LR"[s] for s in node.path) or "root"
        shown = " ".join(f"{name(a)}:{p:.3f}" for a, p in dist.items())
        print(f"t={t} node={where} span=[{span}] action={name(action)} "
              f"oracle={{{shown}}} policy_p={probs[action]:.4f}")
        state = policy.step(state, [action], [node.path] if policy.config.tree_enc else None)
        t += 1
    print("sentence=" + " ".join(name(a) for a in in_order_sentence(ep.tree)))
    dot = tree_to_dot(ep.tree, vocab.tokens)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(dot)
    else:
        sys.stdout.write(dot)
    return 0


def cmd_tokenize(args):
    stream = open(args.input, encoding="utf-8") if args.input else sys.stdin
    with stream:
        for line in stream:
            toks = tokenize(line.lower() if args.lower else line)
            print(" ".join(toks))
    return 0


COMMANDS = {
    "train": cmd_train,
    "sample": cmd_sample,
    "complete": cmd_complete,
    "reorder-train": lambda a: cmd_train(a, conditional=True),
    "reorder-eval": cmd_reorder_eval,
    "eval": cmd_eval,
    "inspect-tree": cmd_inspect,
    "tokenize": cmd_tokenize,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    numerics.tensor.DEBUG = args.debug
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"nmgen: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, CheckpointError, TreeError) as exc:
        if isinstance(exc, TreeError) and not isinstance(exc, (KeyError, ValueError)):
            print(f"nmgen: internal error: {exc}", file=sys.stderr)
            return EXIT_INTERNAL
        print(f"nmgen: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, numerics.NonFiniteError) as exc:
        print(f"nmgen: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
