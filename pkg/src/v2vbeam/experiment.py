"""End-to-end runs: generate, identify, track, cross-validate, report.

Everything is driven by one JSON config plus a master seed. All random
streams (scenario seeds, annotation sampling, fold plans, network inits) are
derived from that seed, so identical inputs give byte-identical reports.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, phy, scene
from .dataset import DetectionCache, build_sequences, kfold_split, kfold_split_groups
from .errors import ConfigError, DataError, NoCandidateError, V2VBeamError
from .predictor import BeamHyper, initial_loss, rank_beams, train_beam_predictor
from .tracker import AnnotatedSample, IdentifierHyper, run_tracker, train_identifier

log = logging.getLogger(__name__)

REPORT_FORMAT = "v2vbeam-report"
TOP_K = 5
SPLIT_MODES = ("sequence", "scenario")

DEFAULTS = {
    "name": "experiment",
    "seed": 0,
    "scenarios": {"profile": "maneuver_rich", "count": 2, "duration": 60.0, "max_clutter": 4,
                  "max_offset": 25.0, "speed_delta": [3.0, 8.0], "pause": [0.3, 2.5],
                  "detector": {}, "channel": {}},
    "identification": {"profile": "identification", "count": 4, "duration": 60.0,
                       "max_clutter": 4, "max_offset": 25.0, "speed_delta": [3.0, 8.0],
                       "pause": [0.3, 2.5], "num_samples": 600, "split_ratio": 0.7,
                       "hidden": [256, 256], "learning_rate": 1e-2, "weight_decay": 1e-4,
                       "batch_size": 32, "epochs": 100},
    "tracking": {"r": 5, "gate": None, "angle_tol": 5.0, "radius_tol": 0.1,
                 "oracle_identification": False},
    "beam": {"folds": 5, "split_modes": ["sequence"], "hidden": 150, "layers": 2,
             "dropout": 0.1, "learning_rate": 1e-3, "weight_decay": 1e-4, "batch_size": 32,
             "epochs": 200},
    "outputs": {"manifest": False, "checkpoints": True},
}


class StageError(V2VBeamError):
    """Failure inside one named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _merge(base, override, path=""):
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(base[key], dict) and key not in ("detector", "channel"):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path}{key!r} must be an object")
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def load_config(source, seed=None):
    """Config dict from a path or a dict, defaults filled in and validated."""
    if isinstance(source, (str, Path)):
        try:
            doc = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {source} is not valid JSON: {exc}") from exc
    else:
        doc = dict(source)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULTS, doc)
    if seed is not None:
        cfg["seed"] = int(seed)
    _validate(cfg)
    return cfg


def _validate(cfg):
    sc, beam, trk = cfg["scenarios"], cfg["beam"], cfg["tracking"]
    if sc["profile"] not in scene.PROFILES or cfg["identification"]["profile"] not in scene.PROFILES:
        raise ConfigError(f"scenario profile must be one of {scene.PROFILES}")
    if sc["count"] < 1 or sc["duration"] <= 0:
        raise ConfigError("need at least one scenario of positive duration")
    if trk["r"] < 1:
        raise ConfigError("tracking.r must be >= 1")
    if beam["folds"] < 2:
        raise ConfigError("beam.folds must be >= 2")
    bad = set(beam["split_modes"]) - set(SPLIT_MODES)
    if bad or not beam["split_modes"]:
        raise ConfigError(f"split_modes must be a nonempty subset of {SPLIT_MODES}")
    # fail early on malformed noise or maneuver settings
    for section in ("scenarios", "identification"):
        scene.random_scenario(0, cfg[section]["profile"], 1.0, 0, **{
            k: cfg[section][k] for k in ("max_offset", "speed_delta", "pause")})
    scene.DetectorNoise(**sc["detector"])
    scene.ChannelConfig(**sc["channel"])


def _seeds(master, stream, n):
    rng = np.random.default_rng([int(master), stream])
    return [int(s) for s in rng.integers(0, 2**31, n)]


def scenario_configs(cfg, section="scenarios"):
    sc = cfg[section]
    tag = 11 if section == "scenarios" else 13
    detector = scene.DetectorNoise(**sc.get("detector", {}))
    channel = scene.ChannelConfig(**sc.get("channel", {}))
    intensity = {k: sc[k] for k in ("max_offset", "speed_delta", "pause")}
    return [scene.random_scenario(s, sc["profile"], sc["duration"], sc["max_clutter"],
                                  detector=detector, channel=channel, **intensity,
                                  scenario_id=f"{section[:3]}-{i:03d}")
            for i, s in enumerate(_seeds(cfg["seed"], tag, sc["count"]))]


def generate_frames(cfg, section="scenarios", codebook=None):
    codebook = codebook or phy.build_dft_codebook()
    frames = []
    for sc in scenario_configs(cfg, section):
        frames += scene.generate_dataset(sc, codebook=codebook)
    return frames


def annotation_samples(frames, num_samples, seed, cache):
    """Frames with a visible transmitter, sampled as an annotator would."""
    usable = [f for f in frames if f.power is not None and f.truth.tx_id in cache(f).source_ids]
    if len(usable) < num_samples:
        raise DataError(f"only {len(usable)} annotatable frames, need {num_samples}")
    rng = np.random.default_rng([int(seed), 17])
    pick = np.sort(rng.choice(len(usable), num_samples, replace=False))
    return [AnnotatedSample(usable[i].power, usable[i].truth.tx_point, cache(usable[i]),
                            usable[i].truth.tx_id) for i in pick]


def identifier_hyper(section):
    return IdentifierHyper(tuple(section["hidden"]), section["learning_rate"],
                           section["weight_decay"], section["batch_size"], section["epochs"])


def beam_hyper(section):
    return BeamHyper(section["hidden"], section["layers"], section["dropout"],
                     section["learning_rate"], section["weight_decay"], section["batch_size"],
                     section["epochs"])


@dataclass
class TrackedSet:
    sequences: list
    tracks: list
    records: list
    rejected: int = 0
    coasted_steps: int = 0
    id_correct: int = 0


def track_sequences(sequences, model, tracking, cache, ring):
    """Run the tracker on every window and collect per-sample metadata."""
    out = TrackedSet([], [], [])
    for seq in sequences:
        dets = [cache(f) for f in seq.frames]
        try:
            if tracking["oracle_identification"]:
                track = run_tracker(None, dets, gate=tracking["gate"],
                                    oracle_point=seq.frames[0].truth.tx_point)
            else:
                track = run_tracker(model, dets, seq.first_power, gate=tracking["gate"])
        except NoCandidateError:
            out.rejected += 1
            continue
        first = track.steps[0]
        id_ok = dets[0].source_ids[first.index] == seq.frames[0].truth.tx_id
        out.id_correct += int(id_ok)
        out.coasted_steps += track.coasted
        out.sequences.append(seq)
        out.tracks.append(track)
        out.records.append({
            "scenario_id": seq.scenario_id, "start": seq.start, "label": int(seq.label),
            "persist": int(seq.frames[-1].truth.optimal_beam),
            "beam_diff": metrics.beam_difference(seq, ring),
            "rel_speed": float(seq.frames[-1].truth.rel_speed),
            "obj_count": float(np.mean([len(d) for d in dets])),
            "identified": bool(id_ok), "coasted": track.coasted,
        })
    return out


def _fold_job(tracked, labels, plan, fold, hyper, seed):
    train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
    tr_tracks = [tracked.tracks[i] for i in train_idx]
    model, history = train_beam_predictor(tr_tracks, labels[train_idx], hyper, seed=seed)
    start_loss = initial_loss_for(hyper, tr_tracks, labels[train_idx], seed)
    ranked = rank_beams(model.logits([tracked.tracks[i] for i in test_idx]), TOP_K)
    return {"fold": fold, "test_idx": test_idx, "ranked": ranked, "history": history,
            "initial_loss": start_loss, "model": model}


def initial_loss_for(hyper, tracks, labels, seed):
    """Cross-entropy of the freshly initialized network (what epoch 1 starts from)."""
    fresh, _ = train_beam_predictor(tracks, labels, BeamHyper(**{**hyper.__dict__, "epochs": 0}),
                                    seed=seed)
    return initial_loss(fresh, tracks, labels)


def cross_validate(tracked, beam_cfg, mode, master_seed, threads=1):
    labels = np.array([r["label"] for r in tracked.records], dtype=np.int64)
    k = beam_cfg["folds"]
    plan_seed = _seeds(master_seed, 23 if mode == "sequence" else 29, 1)[0]
    if mode == "sequence":
        plan = kfold_split(len(labels), k, plan_seed)
    else:
        plan = kfold_split_groups([r["scenario_id"] for r in tracked.records], k, plan_seed)
    hyper = beam_hyper(beam_cfg)
    fold_seeds = _seeds(master_seed, 31 if mode == "sequence" else 37, k)
    jobs = [(tracked, labels, plan, f, hyper, fold_seeds[f]) for f in range(k)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _fold_job(*a), jobs))
    else:
        results = [_fold_job(*a) for a in jobs]
    return plan, results


def _acc(ranked, labels, k):
    return metrics.top_k_accuracy([list(r) for r in ranked], list(labels), k)


def summarize_mode(tracked, results, ring):
    folds, per_sample = [], {}
    for res in results:
        idx = res["test_idx"]
        labels = [tracked.records[i]["label"] for i in idx]
        pers = [metrics.ring_ranking(tracked.records[i]["persist"], ring, TOP_K) for i in idx]
        folds.append({
            "fold": res["fold"], "test_size": len(idx),
            "top1": _acc(res["ranked"], labels, 1), "top5": _acc(res["ranked"], labels, 5),
            "persistence_top1": _acc(pers, labels, 1), "persistence_top5": _acc(pers, labels, 5),
            "initial_loss": res["initial_loss"], "first_epoch_loss": res["history"][0]
            if res["history"] else None,
            "final_epoch_loss": res["history"][-1] if res["history"] else None,
        })
        for i, ranked, p in zip(idx, res["ranked"], pers):
            per_sample[int(i)] = {"fold": res["fold"], "top5": [int(b) for b in ranked],
                                  "persist_top5": [int(b) for b in p]}
    recs = [{**tracked.records[i], **per_sample[i]} for i in range(len(tracked.records))]
    persist_recs = [{**r, "top5": r["persist_top5"]} for r in recs]
    labels = [r["label"] for r in recs]
    summary = {
        "folds": folds,
        "mean_top1": float(np.mean([f["top1"] for f in folds])),
        "mean_top5": float(np.mean([f["top5"] for f in folds])),
        "persistence_top1": metrics.top_k_accuracy([r["persist_top5"] for r in recs], labels, 1),
        "persistence_top5": metrics.top_k_accuracy([r["persist_top5"] for r in recs], labels, 5),
        "pooled_top1": metrics.top_k_accuracy([r["top5"] for r in recs], labels, 1),
        "pooled_top5": metrics.top_k_accuracy([r["top5"] for r in recs], labels, 5),
        "strata": {kind: metrics.stratify(recs, kind) for kind in metrics.STRATA},
        "beam_diff_groups": metrics.beam_diff_groups(recs),
        "persistence_strata": {"beam_diff_groups": metrics.beam_diff_groups(persist_recs)},
    }
    return summary, recs


@contextmanager
def _stage(name, state):
    state["stage"] = name
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # tag anything escaping a stage with its name
        raise StageError(name, exc) from exc
    finally:
        state.setdefault("timings", {})[name] = time.perf_counter() - t0
        log.info("stage %s: %.1f s", name, state["timings"][name])


@dataclass
class ExperimentResult:
    report: dict
    records: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    identifier: object = None
    fold_models: dict = field(default_factory=dict)


def run_experiment(config, out_dir=None, seed=None, threads=1):
    """Run the whole pipeline; write artifacts to ``out_dir`` if given."""
    cfg = load_config(config, seed)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    state = {}
    report = {"format": REPORT_FORMAT, "version": 1, "status": "incomplete",
              "config": cfg}
    result = ExperimentResult(report)
    try:
        codebook = phy.build_dft_codebook()
        ring = codebook.ring_positions()
        trk = cfg["tracking"]
        cache = DetectionCache(trk["angle_tol"], trk["radius_tol"])

        with _stage("generate", state):
            frames = generate_frames(cfg, "scenarios", codebook)
            id_frames = generate_frames(cfg, "identification", codebook)
            if out is not None and cfg["outputs"]["manifest"]:
                scene.write_manifest(frames, out / "manifest.jsonl")
            report["data"] = {"frames": len(frames), "scenarios": cfg["scenarios"]["count"],
                              "annotation_pool_frames": len(id_frames)}

        with _stage("preprocess", state):
            sequences = build_sequences(frames, trk["r"])
            if not sequences:
                raise DataError("no sequences could be built")
            report["data"]["sequences"] = len(sequences)

        with _stage("train-identifier", state):
            ident = cfg["identification"]
            samples = annotation_samples(id_frames, ident["num_samples"], cfg["seed"],
                                         DetectionCache(trk["angle_tol"], trk["radius_tol"]))
            model, id_metrics = train_identifier(samples, ident["split_ratio"],
                                                 identifier_hyper(ident),
                                                 seed=_seeds(cfg["seed"], 19, 1)[0])
            result.identifier = model
            report["identification"] = {
                "num_samples": len(samples), "num_train": id_metrics["num_train"],
                "num_test": id_metrics["num_test"], "r2": id_metrics["r2"],
                "top1": id_metrics["top1"], "angle_cut": model.angle_cut,
                "final_train_loss": id_metrics["train_loss"][-1]
                if id_metrics["train_loss"] else None}
            if out is not None and cfg["outputs"]["checkpoints"]:
                model.save(out / "identifier.json", seed=cfg["seed"])

        with _stage("track", state):
            tracked = track_sequences(sequences, model, trk, cache, ring)
            n = len(tracked.records)
            if n < cfg["beam"]["folds"]:
                raise DataError(f"only {n} trackable sequences for {cfg['beam']['folds']} folds")
            report["tracking"] = {
                "sequences": n, "rejected": tracked.rejected,
                "identification_top1": tracked.id_correct / n,
                "coasted_steps": tracked.coasted_steps,
                "oracle_identification": trk["oracle_identification"]}

        report["beam"] = {}
        for mode in cfg["beam"]["split_modes"]:
            with _stage(f"cross-validate-{mode}", state):
                _, results = cross_validate(tracked, cfg["beam"], mode, cfg["seed"], threads)
                summary, recs = summarize_mode(tracked, results, ring)
                report["beam"][mode] = summary
                result.records[mode] = recs
                result.fold_models[mode] = [r["model"] for r in results]
                if out is not None and cfg["outputs"]["checkpoints"]:
                    for r in results:
                        r["model"].save(out / f"beam_{mode}_fold{r['fold']}.json",
                                        seed=cfg["seed"])
        report["status"] = "complete"
    except StageError as exc:
        report["failed_stage"] = exc.stage
        report["error"] = f"{type(exc.cause).__name__}: {exc.cause}"
        result.timings = state.get("timings", {})
        if out is not None:
            write_artifacts(result, out)
        raise
    result.timings = state.get("timings", {})
    if out is not None:
        write_artifacts(result, out)
    return result


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, NaN to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def report_json(report):
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _fmt(v):
    return "-" if v is None else f"{v:.4f}" if isinstance(v, float) else str(v)


def report_text(report, timings=None):
    lines = [f"experiment: {report['config']['name']}  seed: {report['config']['seed']}  "
             f"status: {report['status']}"]
    if report["status"] != "complete":
        lines.append(f"FAILED in stage {report.get('failed_stage')}: {report.get('error')}")
    data = report.get("data")
    if data:
        lines.append(f"frames: {data['frames']}  sequences: {data.get('sequences', '-')}")
    ident = report.get("identification")
    if ident:
        lines.append(f"identification: top-1 {_fmt(ident['top1'])}  R^2 {_fmt(ident['r2'])}  "
                     f"({ident['num_train']} train / {ident['num_test']} test)")
    trk = report.get("tracking")
    if trk:
        lines.append(f"tracking: {trk['sequences']} sequences, {trk['rejected']} rejected, "
                     f"first-frame id top-1 {_fmt(trk['identification_top1'])}, "
                     f"{trk['coasted_steps']} coasted steps")
    for mode, s in report.get("beam", {}).items():
        lines.append("")
        lines.append(f"beam prediction ({mode}-level folds)")
        lines.append(f"{'fold':>6} {'n':>6} {'top1':>8} {'top5':>8} {'pers1':>8} {'pers5':>8} "
                     f"{'loss0':>8} {'epoch1':>8}")
        for f in s["folds"]:
            lines.append(f"{f['fold'] + 1:>6} {f['test_size']:>6} {_fmt(f['top1']):>8} "
                         f"{_fmt(f['top5']):>8} {_fmt(f['persistence_top1']):>8} "
                         f"{_fmt(f['persistence_top5']):>8} {_fmt(f['initial_loss']):>8} "
                         f"{_fmt(f['first_epoch_loss']):>8}")
        lines.append(f"{'mean':>6} {'':>6} {_fmt(s['mean_top1']):>8} {_fmt(s['mean_top5']):>8} "
                     f"{_fmt(s['persistence_top1']):>8} {_fmt(s['persistence_top5']):>8}")
        for kind, rows in s["strata"].items():
            lines.append(f"  by {kind}: " + ", ".join(
                f"{r['bin']}: {_fmt(r['top5'])} (n={r['count']})" for r in rows))
    if timings:
        lines.append("")
        lines.append("timings: " + ", ".join(f"{k} {v:.1f}s" for k, v in timings.items()))
    return "\n".join(lines) + "\n"


PREDICTION_FIELDS = ("mode", "fold", "scenario_id", "start", "label", "top5", "persist_top5",
                     "beam_diff", "rel_speed", "obj_count", "identified", "coasted")


def write_predictions(records_by_mode, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_FIELDS)
        for mode, recs in records_by_mode.items():
            for r in recs:
                w.writerow([mode, r["fold"], r["scenario_id"], r["start"], r["label"],
                            " ".join(map(str, r["top5"])), " ".join(map(str, r["persist_top5"])),
                            "" if r["beam_diff"] is None else r["beam_diff"],
                            repr(r["rel_speed"]), repr(r["obj_count"]), int(r["identified"]),
                            r["coasted"]])


def read_predictions(path, mode=None):
    """Per-sample records from a predictions CSV (optionally one split mode)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read predictions {path}: {exc}") from exc
    out = []
    try:
        for row in rows:
            if mode is not None and row["mode"] != mode:
                continue
            out.append({"mode": row["mode"], "fold": int(row["fold"]),
                        "scenario_id": row["scenario_id"], "start": int(row["start"]),
                        "label": int(row["label"]),
                        "top5": [int(b) for b in row["top5"].split()],
                        "persist_top5": [int(b) for b in row["persist_top5"].split()],
                        "beam_diff": int(row["beam_diff"]) if row["beam_diff"] else None,
                        "rel_speed": float(row["rel_speed"]), "obj_count": float(row["obj_count"]),
                        "identified": bool(int(row["identified"])), "coasted": int(row["coasted"])})
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed predictions file {path}: {exc}") from exc
    return out


def write_strata_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "count", "top1", "top5"])
        for r in rows:
            w.writerow([r["bin"], r["count"], "" if r["top1"] is None else repr(r["top1"]),
                        "" if r["top5"] is None else repr(r["top5"])])


def write_artifacts(result: ExperimentResult, out: Path):
    report = result.report
    (out / "report.json").write_text(report_json(report))
    (out / "report.txt").write_text(report_text(report, result.timings))
    if result.records:
        write_predictions(result.records, out / "predictions.csv")
    for mode, summary in report.get("beam", {}).items():
        for kind, rows in summary["strata"].items():
            write_strata_csv(rows, out / f"strata_{mode}_{kind}.csv")
        rows = [{"fold": f["fold"], **{k: f[k] for k in ("top1", "top5", "persistence_top1",
                                                          "persistence_top5")}}
                for f in summary["folds"]]
        with open(out / f"folds_{mode}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    if report["status"] != "complete":
        (out / "INCOMPLETE").write_text(f"failed stage: {report.get('failed_stage')}\n")
    elif (out / "INCOMPLETE").exists():
        (out / "INCOMPLETE").unlink()
