"""Command-line entry point: ``v2vbeam <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
divergence, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiment, metrics, phy, scene
from .dataset import DetectionCache, build_sequences
from .errors import ConfigError, DataError, InputError, TrainingDivergenceError
from .predictor import BeamPredictorModel, rank_beams, train_beam_predictor
from .tracker import IdentifierModel, train_identifier

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3, 4

log = logging.getLogger("v2vbeam")


def _config(args):
    return experiment.load_config(args.config if args.config else {}, args.seed)


def cmd_generate(args):
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load {args.config}: {exc}") from exc
    if "vehicles" in doc:
        cfg = scene.ScenarioConfig.from_dict(doc)
        if args.seed is not None:
            cfg.seed = args.seed
        frames = scene.generate_dataset(cfg)
    else:
        frames = experiment.generate_frames(experiment.load_config(doc, args.seed), args.section)
    scene.write_manifest(frames, args.out)
    print(f"wrote {len(frames)} frames to {args.out}")


def _sequences_and_cache(frames, cfg):
    trk = cfg["tracking"]
    return build_sequences(frames, trk["r"]), DetectionCache(trk["angle_tol"], trk["radius_tol"])


def cmd_train_id(args):
    cfg = _config(args)
    frames = scene.read_manifest(args.manifest)
    ident = cfg["identification"]
    n = args.num_samples or ident["num_samples"]
    trk = cfg["tracking"]
    samples = experiment.annotation_samples(
        frames, n, cfg["seed"], DetectionCache(trk["angle_tol"], trk["radius_tol"]))
    model, m = train_identifier(samples, ident["split_ratio"], experiment.identifier_hyper(ident),
                                seed=cfg["seed"])
    model.save(args.out, seed=cfg["seed"])
    print(f"identification top-1 {m['top1']:.4f}  R^2 {m['r2']:.4f}  -> {args.out}")


def _track_manifest(args, cfg):
    frames = scene.read_manifest(args.manifest)
    sequences, cache = _sequences_and_cache(frames, cfg)
    trk = dict(cfg["tracking"])
    model = None
    if args.identifier:
        model = IdentifierModel.load(args.identifier)
    elif not trk["oracle_identification"]:
        raise ConfigError("need --identifier (or tracking.oracle_identification in the config)")
    ring = phy.build_dft_codebook().ring_positions()
    return experiment.track_sequences(sequences, model, trk, cache, ring)


def cmd_train_beam(args):
    cfg = _config(args)
    tracked = _track_manifest(args, cfg)
    labels = np.array([r["label"] for r in tracked.records], dtype=np.int64)
    model, history = train_beam_predictor(tracked.tracks, labels,
                                          experiment.beam_hyper(cfg["beam"]), seed=cfg["seed"])
    model.save(args.out, seed=cfg["seed"])
    print(f"trained on {len(labels)} sequences; loss {history[0]:.4f} -> {history[-1]:.4f}"
          if history else f"initialized on {len(labels)} sequences")


def cmd_evaluate(args):
    cfg = _config(args)
    tracked = _track_manifest(args, cfg)
    model = BeamPredictorModel.load(args.beam_model)
    ring = phy.build_dft_codebook().ring_positions()
    ranked = rank_beams(model.logits(tracked.tracks), experiment.TOP_K)
    recs = []
    for rec, r in zip(tracked.records, ranked):
        recs.append({**rec, "fold": -1, "top5": [int(b) for b in r],
                     "persist_top5": metrics.ring_ranking(rec["persist"], ring, experiment.TOP_K)})
    labels = [r["label"] for r in recs]
    summary = {
        "sequences": len(recs), "rejected": tracked.rejected,
        "top1": metrics.top_k_accuracy([r["top5"] for r in recs], labels, 1),
        "top5": metrics.top_k_accuracy([r["top5"] for r in recs], labels, 5),
        "persistence_top1": metrics.top_k_accuracy([r["persist_top5"] for r in recs], labels, 1),
        "persistence_top5": metrics.top_k_accuracy([r["persist_top5"] for r in recs], labels, 5),
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.predictions:
        experiment.write_predictions({"evaluate": recs}, args.predictions)
    print(text)


def cmd_analyze(args):
    recs = experiment.read_predictions(args.predictions, args.mode)
    if not recs:
        raise DataError("no matching prediction rows")
    rows = metrics.stratify(recs, args.strata)
    if args.out:
        experiment.write_strata_csv(rows, args.out)
    print(f"{'bin':>8} {'count':>7} {'top1':>8} {'top5':>8}")
    for r in rows:
        print(f"{r['bin']:>8} {r['count']:>7} {experiment._fmt(r['top1']):>8} "
              f"{experiment._fmt(r['top5']):>8}")


def cmd_report(args):
    res = experiment.run_experiment(args.config, args.out_dir, seed=args.seed,
                                    threads=args.threads)
    sys.stdout.write(experiment.report_text(res.report, res.timings))


def build_parser():
    p = argparse.ArgumentParser(prog="v2vbeam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p.add_argument("--threads", type=int, default=1, help="parallel cross-validation folds")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate scenarios and write a manifest")
    g.add_argument("--config", required=True, help="scenario or experiment config (JSON)")
    g.add_argument("--out", required=True, help="manifest path (JSON lines)")
    g.add_argument("--section", choices=("scenarios", "identification"), default="scenarios",
                   help="which scenario family of an experiment config to generate")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train-id", help="train the transmitter identifier")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--config")
    t.add_argument("--num-samples", type=int, default=None)
    t.set_defaults(func=cmd_train_id)

    b = sub.add_parser("train-beam", help="track all windows and train the beam predictor")
    b.add_argument("--manifest", required=True)
    b.add_argument("--identifier", help="identifier checkpoint")
    b.add_argument("--out", required=True, help="checkpoint path")
    b.add_argument("--config")
    b.set_defaults(func=cmd_train_beam)

    e = sub.add_parser("evaluate", help="score a trained beam predictor on a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--identifier")
    e.add_argument("--beam-model", required=True)
    e.add_argument("--config")
    e.add_argument("--out", help="summary JSON path")
    e.add_argument("--predictions", help="per-sample CSV path")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", help="stratified accuracy from a predictions CSV")
    a.add_argument("--predictions", required=True)
    a.add_argument("--strata", required=True, choices=metrics.STRATA)
    a.add_argument("--mode", default=None, help="restrict to one split mode")
    a.add_argument("--out", help="CSV path")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="run the full experiment and write all reports")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_report)
    return p


def _exit_code(exc):
    cause = exc.cause if isinstance(exc, experiment.StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, TrainingDivergenceError):
        return EXIT_DIVERGED
    if isinstance(cause, (DataError, InputError)):
        return EXIT_DATA
    return EXIT_OTHER


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code == EXIT_OTHER:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
