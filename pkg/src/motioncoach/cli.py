"""Command-line entry point: ``motioncoach <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, corpus, forest, motion_io, simulate
from .alignment import align
from .config import PipelineConfig, load_config
from .errors import MotionCoachError
from .pipeline import dumps_record, normalized, posematch_record, run_pipeline, score_record


UNLIMITED = "none"


def _depth(value: str) -> int | str:
    if value.lower() in ("none", "-"):
        return UNLIMITED
    depth = int(value)
    if depth < 1:
        raise argparse.ArgumentTypeError("max depth must be positive or 'none'")
    return depth


def _emit(record) -> None:
    sys.stdout.write(dumps_record(record))


def cmd_convert(args, config):
    text = Path(args.input).read_text(encoding="utf-8")
    seq = motion_io.loads(text, path=args.input)
    out = motion_io.dumps(seq)
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    _emit({"file": args.input, "frames": seq.n_frames, "has_positions": seq.has_positions, "round_trip": out == text})
    return 0 if out == text or args.output else 1


def cmd_align(args, config):
    user, ref = motion_io.load(args.user), motion_io.load(args.ref)
    radius = args.fast_radius if args.fast_radius is not None else config.fast_radius
    _emit(align(normalized(user), normalized(ref), radius).to_record())
    return 0


def cmd_score(args, config):
    cfg = config.replace(segments=args.segments) if args.segments else config
    user, ref = normalized(motion_io.load(args.user)), normalized(motion_io.load(args.ref))
    result = align(user, ref, cfg.fast_radius)
    rec = score_record(result, user, ref, cfg)
    if args.table:
        print(f"{'segment':>7} {'t_ideal':>8} {'t_actual':>8} {'score':>7}  label")
        for s in rec["segments"]:
            print(f"{s['segment_index']:>7} {s['t_ideal']:>8.3f} {s['t_actual']:>8.3f} {s['score']:>7.2f}  {s['label']}")
        if rec["spatial"] is not None:
            for entry in rec["spatial"]["flagged_frames"]:
                print(f"frame {entry['frame']}: {' '.join(entry['joints'])}")
    else:
        _emit(rec)
    return 0


def cmd_posematch(args, config):
    cfg = config.replace(segments=args.segments) if args.segments else config
    user, ref = motion_io.load(args.user), motion_io.load(args.ref)
    _emit(posematch_record(user, ref, args.segment, cfg, args.user_frame))
    return 0


def cmd_simulate(args, config):
    motions = motion_io.load_dir(args.corpus)
    s = config.simulate
    sim_cfg = simulate.SimulationConfig(
        args.joint_fraction if args.joint_fraction is not None else s.joint_fraction,
        args.sigma_scale if args.sigma_scale is not None else s.sigma_scale,
    )
    seed = args.seed if args.seed is not None else s.seed
    ds = simulate.build_dataset(motions, sim_cfg, seed)
    simulate.save_dataset(ds, args.out)
    if args.sim_dir:
        d = Path(args.sim_dir)
        d.mkdir(parents=True, exist_ok=True)
        for m in simulate.simulate_corpus(motions, sim_cfg, seed):
            motion_io.save(m, d / f"{m.name}{motion_io.SUFFIX}")
    _emit(
        {
            "out": args.out,
            "train_frames": int(ds.train_x.shape[0]),
            "test_frames": int(ds.test_x.shape[0]),
            "train_sequences": ds.provenance["train_sequences"],
            "test_sequences": ds.provenance["test_sequences"],
        }
    )
    return 0


def cmd_eval_dist(args, config):
    report = simulate.distribution_divergence(motion_io.load_dir(args.real), motion_io.load_dir(args.sim))
    if args.json:
        _emit(report)
    else:
        print(simulate.format_divergence(report))
    return 0


def cmd_train(args, config):
    ds = simulate.load_dataset(args.dataset)
    f = config.forest
    model = forest.train_forest(
        ds,
        args.n_estimators if args.n_estimators is not None else f.n_estimators,
        f.max_depth if args.max_depth is None else (None if args.max_depth == UNLIMITED else args.max_depth),
        args.seed if args.seed is not None else f.seed,
    )
    forest.save_model(model, args.out)
    metrics = forest.evaluate(model, ds.test_x, ds.test_y) if len(ds.test_x) else None
    _emit({"out": args.out, "n_estimators": model.n_estimators, "max_depth": model.max_depth, "test_metrics": metrics})
    return 0


def cmd_ablate(args, config):
    ds = simulate.load_dataset(args.dataset)
    grid = forest.parse_grid(args.grid) if args.grid else list(forest.DEFAULT_GRID)
    seed = args.seed if args.seed is not None else config.forest.seed
    rows = forest.ablation(ds, grid, seed)
    if args.json:
        _emit(rows)
    else:
        print(forest.format_ablation(rows))
    return 0


def cmd_feedback(args, config):
    model = forest.load_model(args.model) if args.model else None
    svc = None
    if args.live:
        from .pipeline import make_service

        svc = make_service(config, live=True)
    result = run_pipeline(args.user, args.ref, config, args.method, model, svc)
    record = dict(result.record)
    if args.timing:
        record["timing"] = result.timing.to_record()
    _emit(record)
    return 0


def cmd_serve(args, config):
    from .service import serve

    model = forest.load_model(args.model) if args.model else None
    serve(config, args.host, args.port, model)
    return 0


def cmd_make_corpus(args, config):
    paths = corpus.write_corpus(args.out, args.n, args.seed)
    _emit({"out": args.out, "motions": len(paths)})
    return 0


def cmd_make_fixtures(args, config):
    user, ref = corpus.write_fixture_pair(args.out)
    _emit({"user": str(user), "ref": str(ref)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motioncoach", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="pipeline config file (JSON)")
    sub = p.add_subparsers(dest="command", required=True)

    def pair(sp):
        sp.add_argument("--user", required=True, help="learner motion file")
        sp.add_argument("--ref", required=True, help="expert motion file")

    sp = sub.add_parser("convert", help="parse and re-emit a motion file, checking the round trip")
    sp.add_argument("input")
    sp.add_argument("--out", dest="output")
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("align", help="two-stage window search plus DTW path")
    pair(sp)
    sp.add_argument("--fast-radius", type=int, default=None)
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("score", help="segment timing scores and flagged joints")
    pair(sp)
    sp.add_argument("--segments", type=int, choices=(4, 8), default=None)
    sp.add_argument("--table", action="store_true", help="human-readable table instead of JSON")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("posematch", help="segmented pose-matching verdict")
    pair(sp)
    sp.add_argument("--segment", type=int, required=True)
    sp.add_argument("--segments", type=int, choices=(4, 8), default=None)
    sp.add_argument("--user-frame", type=int, default=None)
    sp.set_defaults(func=cmd_posematch)

    sp = sub.add_parser("simulate", help="build the labeled perturbation dataset")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--joint-fraction", type=float, default=None)
    sp.add_argument("--sigma-scale", type=float, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sim-dir", help="also write the perturbed motions here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("eval-dist", help="KL/JS divergence between real and simulated angles")
    sp.add_argument("--real", required=True)
    sp.add_argument("--sim", required=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_eval_dist)

    sp = sub.add_parser("train", help="train the per-joint forests")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--n-estimators", type=int, default=None)
    sp.add_argument("--max-depth", type=_depth, default=None, help="positive integer or 'none'")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("ablate", help="n_estimators / max_depth ablation table")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--grid", help="e.g. 5:none,10:none,5:3 (default: the six-row grid)")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("feedback", help="full pipeline report")
    pair(sp)
    sp.add_argument("--model", help="forest model file (required for --method forest)")
    sp.add_argument("--method", choices=("naive", "forest"), default="naive")
    sp.add_argument("--live", action="store_true", help="call the completion service instead of the stub")
    sp.add_argument("--timing", action="store_true", help="append per-stage timings to the record")
    sp.set_defaults(func=cmd_feedback)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--model")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("make-corpus", help="write the procedural expert corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=corpus.CORPUS_SIZE)
    sp.add_argument("--seed", type=int, default=corpus.CORPUS_SEED)
    sp.set_defaults(func=cmd_make_corpus)

    sp = sub.add_parser("make-fixtures", help="write the learner/expert fixture pair")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_make_fixtures)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except (MotionCoachError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
