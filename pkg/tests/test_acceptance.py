"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The verdict lines are printed at the end of the pytest run (see conftest.py)
and also when this file is executed directly with ``python3``.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from v2vbeam import experiment, metrics, nn, phy, polar, scene, tracker
from v2vbeam.dataset import DetectionCache, build_sequences
from v2vbeam.polar import BoundingBox, PolarPoint
from v2vbeam.scene import DetectorNoise, Maneuver, ScenarioConfig, VehicleSpec
from v2vbeam.tracker import train_identifier

from oracles import fd_max_relative_error

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
VERDICTS = {}


def _verdict(num, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {num}: {title} ({detail})"
    VERDICTS[num] = line
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1 gradients

def test_criterion_1_gradient_oracle():
    t0 = time.perf_counter()
    worst_dense = worst_lstm = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        sizes = [int(rng.integers(2, 5)), int(rng.integers(2, 6)), int(rng.integers(1, 4))]
        net = nn.DenseNet.initialize(sizes, seed=seed)
        X, Y = rng.normal(size=(4, sizes[0])), rng.normal(size=(4, sizes[-1]))
        worst_dense = max(worst_dense, fd_max_relative_error(net, X, Y, "mse"))
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        layers = 1 + seed % 2
        net = nn.LstmNet.initialize(2, 3, 4, layers, 0.0, seed=seed)
        for p in net.params().values():
            p[...] = rng.normal(0, 0.6, p.shape)
        X, y = rng.normal(size=(3, int(rng.integers(2, 5)), 2)), rng.integers(0, 4, size=3)
        worst_lstm = max(worst_lstm, fd_max_relative_error(net, X, y, "cross_entropy"))
    elapsed = time.perf_counter() - t0
    _verdict(1, "analytic gradients vs central differences",
             worst_dense < 1e-5 and worst_lstm < 1e-5 and elapsed < 60,
             f"dense {worst_dense:.1e}, lstm {worst_lstm:.1e}, {elapsed:.1f} s")


# ---------------------------------------------------------------- 2 PHY

def _scalar_power(channel, cb, P):
    out = []
    for k, panel in enumerate(phy.PANELS):
        for m in range(cb.beams_per_panel):
            acc = 0j
            for path in channel.per_panel[panel]:
                s = math.sin(path.azimuth) * math.cos(path.elevation)
                inner = sum(cb.vectors[k, m, e].conjugate() * complex(math.cos(math.pi * e * s),
                                                                      math.sin(math.pi * e * s))
                            for e in range(cb.num_antennas))
                acc += path.gain * inner
            out.append(abs(acc) ** 2 * P)
    return np.array(out)


def test_criterion_2_phy_oracle():
    rng = np.random.default_rng(2)
    scan_ok = True
    for _ in range(100):
        v = rng.random(256)
        best_i = 0
        for i in range(1, len(v)):
            if v[i] > v[best_i]:
                best_i = i
        scan_ok &= phy.optimal_beam(v).flat_index == best_i

    cb = phy.build_dft_codebook(16, 64)
    peak_err = 0.0
    for k in range(4):
        m = int(rng.integers(0, 64))
        alpha = complex(*rng.normal(size=2))
        P = float(rng.uniform(0.5, 3.0))
        ch = phy.Channel.empty(16)
        ch.per_panel[phy.PANELS[k]].append(phy.PathComponent(alpha, float(cb.angles[k, m])))
        p = phy.receive_power(ch, cb, symbol_power=P)
        peak_err = max(peak_err, abs(p.max() - 16 * P * abs(alpha) ** 2))

    loop_err = 0.0
    for _ in range(3):
        ch = phy.Channel.empty(16)
        for panel in phy.PANELS:
            for _ in range(int(rng.integers(0, 3))):
                ch.per_panel[panel].append(phy.PathComponent(
                    complex(*rng.normal(0, 0.5, 2)), float(rng.uniform(-0.8, 0.8)),
                    float(rng.uniform(0, 0.2))))
        loop_err = max(loop_err, float(np.max(np.abs(phy.receive_power(ch, cb, 1.7)
                                                     - _scalar_power(ch, cb, 1.7)))))
    _verdict(2, "optimal beam scan, matched peak, scalar-loop power",
             scan_ok and peak_err <= 1e-9 and loop_err <= 1e-9,
             f"scan {'exact' if scan_ok else 'mismatch'}, peak err {peak_err:.1e}, "
             f"loop err {loop_err:.1e}")


# ---------------------------------------------------------------- 3 geometry

def test_criterion_3_geometry():
    rng = np.random.default_rng(3)
    worst = 0.0
    for r, a in zip(rng.uniform(1e-3, 2.0, 1000), rng.uniform(0.0, 360.0, 1000)):
        back = polar.cartesian_to_polar(polar.polar_to_cartesian(PolarPoint(r, a)))
        worst = max(worst, abs(back.radius - r), abs(polar.angle_diff_deg(back.angle, a)))

    w = 0.001
    xf, xb = (90.0 - 89.5) / 180.0, (90.5 - 90.0) / 180.0
    merged = polar.merge_to_plane(
        [BoundingBox("front", xf - w / 2, 0.82, xf + w / 2, 0.78, 1)],
        [BoundingBox("back", xb - w / 2, 0.82, xb + w / 2, 0.78, 1)], angle_tol=5.0)
    seam_ok = len(merged) == 1 and abs(merged.points[0].angle - 90.0) <= 1e-9

    az_err = 0.0
    for f in scene.generate_dataset(scene.random_scenario(6, "maneuver_rich", 30.0)):
        dets = polar.merge_to_plane([b for b in f.boxes if b.image_side == "front"],
                                    [b for b in f.boxes if b.image_side == "back"])
        if f.truth.tx_id in dets.source_ids:
            p = dets.points[dets.source_ids.index(f.truth.tx_id)]
            az_err = max(az_err, abs(polar.angle_diff_deg(p.angle, f.truth.tx_azimuth)))
    _verdict(3, "polar round trip, seam merge, merged azimuth",
             worst < 1e-9 and seam_ok and az_err < 1.0,
             f"round trip {worst:.1e}, seam {'one point at 90' if seam_ok else 'wrong'}, "
             f"azimuth err {az_err:.3f} deg")


# ---------------------------------------------------------------- 4 oracle tracking

def _oracle_errors(frames):
    dc = DetectionCache()
    dets = [dc(f) for f in frames]
    assert frames[0].truth.tx_id in dets[0].source_ids
    track = tracker.run_tracker(None, dets, oracle_point=frames[0].truth.tx_point)
    err = max(max(abs(p.radius - f.truth.tx_point.radius),
                  abs(polar.angle_diff_deg(p.angle, f.truth.tx_point.angle)))
              for p, f in zip(track.points, frames))
    ident = dets[0].source_ids[track.steps[0].index] == frames[0].truth.tx_id
    return err, ident


def test_criterion_4_oracle_tracking():
    co_moving = ScenarioConfig(duration=5.0, vehicles=[
        VehicleSpec(0, "receiver", 0, 0.0, 12.0), VehicleSpec(1, "transmitter", 0, -12.0, 12.0),
        VehicleSpec(2, "clutter", 1, -20.0, 12.0)], detector=DetectorNoise())
    passing = ScenarioConfig(duration=5.0, vehicles=[
        VehicleSpec(0, "receiver", 0, 0.0, 12.0), VehicleSpec(1, "transmitter", 1, -15.0, 12.0),
        VehicleSpec(2, "clutter", 2, 5.0, 12.0)],
        maneuvers=[Maneuver("pass", 1, 0.5, duration=4.0, delta_speed=7.0)],
        detector=DetectorNoise())
    worst, n, hits = 0.0, 0, 0
    for cfg in (co_moving, passing):
        for seq in build_sequences(scene.generate_dataset(cfg), 5):
            err, ident = _oracle_errors(seq.frames)
            worst, n, hits = max(worst, err), n + 1, hits + ident
    _verdict(4, "oracle tracking on co-moving and pass scenarios",
             worst <= 1e-6 and hits == n,
             f"max coord err {worst:.1e} over {n} windows, identification {hits}/{n}")


# ---------------------------------------------------------------- 5 identification

def test_criterion_5_identification():
    t0 = time.perf_counter()
    cfg = experiment.load_config(CONFIGS / "identification.json")
    ident = cfg["identification"]
    assert ident["max_clutter"] <= 4 and ident["num_samples"] == 600
    frames = experiment.generate_frames(cfg, "identification")
    trk = cfg["tracking"]
    samples = experiment.annotation_samples(frames, ident["num_samples"], cfg["seed"],
                                            DetectionCache(trk["angle_tol"], trk["radius_tol"]))
    _, m = train_identifier(samples, ident["split_ratio"], experiment.identifier_hyper(ident),
                            seed=cfg["seed"])
    elapsed = time.perf_counter() - t0
    _verdict(5, "identification top-1 and coordinate R^2",
             m["top1"] >= 0.95 and m["r2"] >= 0.85 and elapsed < 300,
             f"top-1 {m['top1']:.4f}, R^2 {m['r2']:.4f}, {elapsed:.0f} s")


# ---------------------------------------------------------------- 6 end to end

@pytest.mark.slow
def test_criterion_6_end_to_end_benchmark(tmp_path):
    t0 = time.perf_counter()
    res = experiment.run_experiment(CONFIGS / "benchmark.json", tmp_path)
    elapsed = time.perf_counter() - t0
    s = res.report["beam"]["sequence"]
    groups = {g["bin"]: g for g in s["beam_diff_groups"]}
    ln256 = math.log(256)
    init = [f["initial_loss"] for f in s["folds"]]
    checks = {
        "a": s["mean_top5"] > s["persistence_top5"],
        "b": s["mean_top5"] >= s["mean_top1"] + 0.15,
        "c": groups["0"]["top5"] > groups[">=3"]["top5"],
        "d": all(abs(x - ln256) <= 0.5 for x in init),
    }
    detail = (f"{res.report['tracking']['sequences']} sequences; "
              f"(a) top-5 {s['mean_top5']:.4f} vs persistence {s['persistence_top5']:.4f}; "
              f"(b) top-1 {s['mean_top1']:.3f}; "
              f"(c) bd=0 {groups['0']['top5']:.3f} vs bd>=3 {groups['>=3']['top5']:.3f}; "
              f"(d) initial CE {min(init):.3f}..{max(init):.3f} vs ln256 {ln256:.3f}; "
              f"{elapsed:.0f} s; failed: {''.join(k for k, v in checks.items() if not v) or '-'}")
    _verdict(6, "end-to-end synthetic benchmark", all(checks.values()) and elapsed < 900, detail)


# ---------------------------------------------------------------- 7 determinism

def test_criterion_7_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    experiment.run_experiment(CONFIGS / "smoke.json", a)
    experiment.run_experiment(CONFIGS / "smoke.json", b)
    same = (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    _verdict(7, "byte-identical JSON reports", same,
             f"{(a / 'report.json').stat().st_size} bytes, {'identical' if same else 'differ'}")


# ---------------------------------------------------------------- 8 metric units

def test_criterion_8_metric_units():
    rng = np.random.default_rng(8)
    labels = rng.integers(0, 256, 10_000)
    ranked = [rng.permutation(256)[:5] for _ in range(10_000)]
    mc = metrics.top_k_accuracy(ranked, labels, 5)
    # truth 1,2,3 against 1,2,4: SS_res 1, SS_tot 2
    r2_half = metrics.r_squared([1.0, 2.0, 4.0], [1.0, 2.0, 3.0])
    frames = scene.generate_dataset(scene.random_scenario(1, "maneuver_rich", 10.0))
    windows = len(build_sequences(frames, 5))
    ok = (abs(mc - 5 / 256) <= 0.005 and abs(r2_half - 0.5) <= 1e-12 and len(frames) == 100 and windows == 95)
    _verdict(8, "metric unit cases", ok,
             f"uniform top-5 {mc:.4f} vs {5 / 256:.4f}, R^2 hand case {r2_half}, "
             f"{len(frames)} frames -> {windows} windows")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
