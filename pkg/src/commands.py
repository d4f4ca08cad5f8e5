'''
Subcommands of recnet.py. Each one reads its inputs, writes its outputs
under --out and returns the process exit code.
'''
from __future__ import annotations

import argparse
import os
from pathlib import Path

from consts import CLIP_NORM, CoverMethod, DataFormat, Setting
from src import config as run_config
from src.dataset import candidate_sets, load_interactions, load_prepared, prepare, save_prepared
from src.metrics import compare_reports, evaluate, read_per_user_ap, write_report
from src.model import load_checkpoint
from src.ranker import rank_users, write_rankings
from src.theory import (
    bound_report,
    complexity_curve,
    curve_trend,
    format_report,
    fractional_chromatic,
    rook_graph,
    validate_cover,
)
from src.trainer import train
from src.utils._consts import get_reference_statistics
from src.utils.exceptions import ArgumentError, ConfigError, RecNetError
from src.utils.logger import Logger

logger = Logger("[recnet]")

CHECKPOINT_FILE = "checkpoint.json"
TRAIN_LOG_FILE = "train_log.tsv"
RANKINGS_FILE = "rankings.tsv"
BOUND_FILE = "bound.txt"
CURVE_FILE = "complexity_curve.tsv"
COVER_FILE = "cover.txt"
COMPARE_FILE = "compare.txt"


def _int_list(text):
    try:
        return [int(value) for value in text.split(",") if value.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _prepared_dir(args, config):
    directory = args.data or config.data.prepared_dir
    if directory is None:
        raise ConfigError("no prepared dataset: pass --data or set data.prepared_dir")
    return directory


def _load_dataset(args, config):
    return load_prepared(_prepared_dir(args, config), seed=run_config.split_seed(config))


def cmd_prepare(args, config):
    raw_path = args.raw or config.data.raw_path
    if raw_path is None:
        raise ConfigError("no raw log: pass --raw or set data.raw_path")
    data_format = DataFormat(args.format) if args.format else config.data.format
    frame = load_interactions(raw_path, data_format)
    ds, stats = prepare(frame, config.split, seed=run_config.split_seed(config))

    name = args.name or config.data.name
    reference = get_reference_statistics(name) if name else None
    save_prepared(ds, stats, args.out, reference=reference)
    run_config.write_config(config, args.out)
    print(stats.to_text(reference), end="")
    return 0


def cmd_train(args, config):
    config = run_config.override(config, "train", epochs=args.epochs)
    if args.clip:
        config = run_config.override(config, "train", clip_norm=CLIP_NORM)
    ds = _load_dataset(args, config)
    out = Path(args.out)
    run_config.write_config(config, out)

    # MAP@1 on the test split
    def test_map(params):
        return evaluate(params, ds, Setting.INTERACTED, (1,), threads=args.threads).map_at[1]

    train(
        ds,
        config.model,
        config.objective,
        config.train,
        checkpoint_path=out / CHECKPOINT_FILE,
        log_path=out / TRAIN_LOG_FILE,
        validate=test_map if config.train.eval_every else None,
    )
    logger.info(f"Checkpoint written to {out / CHECKPOINT_FILE}")
    return 0


def cmd_eval(args, config):
    params, _ = load_checkpoint(args.checkpoint)
    ds = _load_dataset(args, config)
    setting = Setting(args.setting) if args.setting else config.eval.setting
    ells = args.ells or config.eval.ells
    report = evaluate(
        params,
        ds,
        setting,
        ells,
        threads=args.threads,
        skip_no_relevant=config.eval.skip_no_relevant,
        all_includes_train=config.eval.all_includes_train,
    )
    write_report(report, args.out)
    print(report.to_text(), end="")
    return 0


def cmd_rank(args, config):
    if args.k < 1:
        raise ArgumentError(f"k must be >= 1, got {args.k}")
    params, _ = load_checkpoint(args.checkpoint)
    ds = _load_dataset(args, config)
    setting = Setting(args.setting) if args.setting else config.eval.setting
    candidates = candidate_sets(ds, setting, config.eval.all_includes_train)
    if args.users:
        missing = [u for u in args.users if u not in candidates]
        if missing:
            raise ArgumentError(f"users without candidates in the {setting.value} setting: {missing}")
        candidates = {u: candidates[u] for u in args.users}
    lists = rank_users(params, candidates, args.k, method=args.method, threads=args.threads)
    write_rankings(lists, Path(args.out) / RANKINGS_FILE, user_ids=ds.user_ids, item_ids=ds.item_ids)
    logger.info(f"Ranked {len(lists)} users into {Path(args.out) / RANKINGS_FILE}")
    return 0


def cmd_bound(args, config):
    delta = args.delta if args.delta is not None else config.bound.delta
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must be in (0, 1), got {delta}")
    params, _ = load_checkpoint(args.checkpoint)
    ds = _load_dataset(args, config)
    caps = tuple(args.caps) if args.caps else config.bound.caps
    report = bound_report(params, ds, delta, caps=caps, half_credit=args.half_credit or config.bound.half_credit)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = format_report(report)
    (out / BOUND_FILE).write_text(text)
    print(text, end="")

    if args.sweep_k:
        rows = complexity_curve(ds, config.bound.sweep_ks, trials=config.bound.trials, seed=config.seed,
                                init_scale=config.bound.init_scale, hidden_units=params.hidden_units)
        (out / CURVE_FILE).write_text("k\tC\n" + "".join(f"{k}\t{value!r}\n" for k, value in rows))
        logger.info(f"Complexity grows with k: Spearman rho={curve_trend(rows):.3f}")
    return 0


def cmd_cover(args, config):
    cover = fractional_chromatic(rook_graph(args.n_pos, args.n_neg), method=CoverMethod(args.method))
    problems = validate_cover(cover)
    if problems:
        raise RecNetError(f"computed cover is not exact: {problems[0]}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / COVER_FILE).write_text(cover.to_text())
    print(cover.to_text(), end="")
    return 0


def cmd_compare(args, config):
    a = read_per_user_ap(args.a, args.ell)
    b = read_per_user_ap(args.b, args.ell)
    statistic, p_value, significant = compare_reports(a.to_numpy(), b.to_numpy())
    text = (f"ell\t{args.ell}\nmean_a\t{float(a.mean())!r}\nmean_b\t{float(b.mean())!r}\n"
            f"rank_sum\t{statistic!r}\np_value\t{p_value!r}\nsignificant\t{significant}\n")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / COMPARE_FILE).write_text(text)
    print(text, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="recnet", description="Pairwise ranking recommender")
    parser.add_argument("--config", help="JSON run configuration", default=None)
    parser.add_argument("--seed", help="Root seed (overrides the config)", type=int, default=None)
    parser.add_argument("--threads", help="Worker threads for evaluation", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", help="Output directory", default="out")
    parser.add_argument("--quiet", help="Only report errors", action="store_true")
    parser.add_argument("--verbose", help="Debug logging", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="Preprocess a raw log into a prepared dataset")
    p.add_argument("--raw", help="Raw interaction log")
    p.add_argument("--format", choices=[f.value for f in DataFormat], default=None)
    p.add_argument("--name", help="Collection name for reference statistics (e.g. ml-100k)")
    p.set_defaults(handler=cmd_prepare)

    p = sub.add_parser("train", help="Train a model on a prepared dataset")
    p.add_argument("--data", help="Prepared dataset directory")
    p.add_argument("--epochs", help="Number of iterations", type=int, default=None)
    p.add_argument("--clip", help=f"Clip gradients to norm {CLIP_NORM}", action="store_true")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="MAP@l of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="Prepared dataset directory")
    p.add_argument("--setting", choices=[s.value for s in Setting], default=None)
    p.add_argument("--ells", help="Cut-offs, e.g. 1,5,10", type=_int_list, default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("rank", help="Top-k lists for test users")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="Prepared dataset directory")
    p.add_argument("--users", help="User indices, e.g. 0,4,7 (default: every test user)", type=_int_list)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--setting", choices=[s.value for s in Setting], default=None)
    p.add_argument("--method", choices=["sort", "insertion"], default="insertion")
    p.set_defaults(handler=cmd_rank)

    p = sub.add_parser("bound", help="Generalization bound of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="Prepared dataset directory")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--caps", help="n_pos,n_neg", type=_int_list, default=None)
    p.add_argument("--half-credit", action="store_true")
    p.add_argument("--sweep-k", help="Also write the complexity-vs-k curve", action="store_true")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("cover", help="Fractional chromatic number of a single-user triplet grid")
    p.add_argument("n_pos", type=int)
    p.add_argument("n_neg", type=int)
    p.add_argument("--method", choices=[m.value for m in CoverMethod], default=CoverMethod.LP.value)
    p.set_defaults(handler=cmd_cover)

    p = sub.add_parser("compare", help="Rank-sum test between two per-user AP files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--ell", type=int, default=1)
    p.set_defaults(handler=cmd_compare)
    return parser
