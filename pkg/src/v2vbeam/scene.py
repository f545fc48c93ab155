"""Synthetic V2V scenes: kinematics, camera boxes, detector noise, channels.

World frame: x forward along the road, y lateral (left positive). All
vehicles keep heading +x, so receiver-relative azimuth is simply
atan2(dy, dx) (0 = forward, counterclockwise positive).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import phy
from .errors import ConfigError, DataError
from .polar import BoundingBox, PolarPoint, angle_diff_deg, angle_to_image, box_to_point, wrap_deg

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "v2vbeam-frame"
MANIFEST_VERSION = 1
LANE_CHANGE_SECONDS = 3.0
ROLES = ("receiver", "transmitter", "clutter")
LONGITUDINAL = ("pass", "fall_back", "stop")

# per-frame RNG streams
_STREAM_DETECTOR, _STREAM_PHASE, _STREAM_NOISE = 1, 2, 3


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass
class VehicleSpec:
    id: int
    role: str
    lane: int = 0
    x0: float = 0.0
    speed: float = 13.0
    length: float = 4.5
    width: float = 1.8
    height: float = 1.5


@dataclass
class Maneuver:
    """One scripted event.

    ``pass`` / ``fall_back``: speed +/- ``delta_speed`` for ``duration`` s.
    ``stop``: decelerate at ``decel`` to rest, wait ``hold`` s, re-accelerate.
    ``lane_change``: sigmoid lateral move to ``target_lane`` over 3 s.
    """

    kind: str
    vehicle: int
    start: float
    duration: float = 0.0
    delta_speed: float = 0.0
    target_lane: Optional[int] = None
    decel: float = 3.0
    hold: float = 2.0


@dataclass
class DetectorNoise:
    miss_prob: float = 0.0
    box_jitter_std: float = 0.0
    false_positive_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ConfigError("miss_prob must lie in [0, 1]")
        if self.box_jitter_std < 0 or self.false_positive_rate < 0:
            raise ConfigError("detector noise levels must be non-negative")

    @property
    def is_zero(self):
        return self.miss_prob == 0 and self.box_jitter_std == 0 and self.false_positive_rate == 0


@dataclass
class ChannelConfig:
    enabled: bool = True
    symbol_power: float = 1.0
    noise_std: float = 0.0
    nlos_paths: int = 0
    nlos_gain_ratio: float = 0.1
    reference_gain: float = 1.0
    num_antennas: int = 16
    beams_per_panel: int = 64

    def __post_init__(self):
        if self.noise_std < 0 or self.nlos_paths < 0 or self.symbol_power <= 0:
            raise ConfigError("bad channel settings")
        if self.num_antennas < 1 or self.beams_per_panel < 1:
            raise ConfigError("need at least one antenna and one beam per panel")


@dataclass
class CameraConfig:
    horizon_y: float = 0.5
    k_y: float = 2.0
    k_h: float = 1.0
    max_range: float = 80.0


@dataclass
class ScenarioConfig:
    duration: float
    sample_rate: float = 10.0
    vehicles: list = field(default_factory=list)
    maneuvers: list = field(default_factory=list)
    detector: DetectorNoise = field(default_factory=DetectorNoise)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    lane_width: float = 3.5
    seed: int = 0
    scenario_id: str = "scenario-0"

    def __post_init__(self):
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ConfigError("duration and sample_rate must be positive")
        d = self.detector
        for p in (d.miss_prob,):
            if not 0.0 <= p <= 1.0:
                raise ConfigError("miss_prob must be a probability")
        if d.box_jitter_std < 0 or d.false_positive_rate < 0:
            raise ConfigError("detector noise parameters must be nonnegative")
        roles = [v.role for v in self.vehicles]
        if any(r not in ROLES for r in roles):
            raise ConfigError(f"vehicle roles must be one of {ROLES}")
        if roles.count("receiver") != 1 or roles.count("transmitter") != 1:
            raise ConfigError("need exactly one receiver and one transmitter")
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ConfigError("vehicle ids must be unique")
        if any(v.speed < 0 for v in self.vehicles):
            raise ConfigError("speeds must be nonnegative")
        for m in self.maneuvers:
            if m.vehicle not in ids:
                raise ConfigError(f"maneuver references unknown vehicle {m.vehicle}")
            if m.kind not in LONGITUDINAL + ("lane_change",):
                raise ConfigError(f"unknown maneuver {m.kind!r}")
            if m.kind == "lane_change" and m.target_lane is None:
                raise ConfigError("lane_change needs target_lane")

    @property
    def num_clutter(self):
        return sum(v.role == "clutter" for v in self.vehicles)

    @property
    def num_frames(self):
        return int(math.floor(self.duration * self.sample_rate + 1e-9))

    def vehicle(self, role):
        return next(v for v in self.vehicles if v.role == role)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        try:
            doc = dict(doc)
            doc["vehicles"] = [VehicleSpec(**v) for v in doc.get("vehicles", [])]
            doc["maneuvers"] = [Maneuver(**m) for m in doc.get("maneuvers", [])]
            doc["detector"] = DetectorNoise(**doc.get("detector", {}))
            doc["channel"] = ChannelConfig(**doc.get("channel", {}))
            doc["camera"] = CameraConfig(**doc.get("camera", {}))
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc


# --------------------------------------------------------------------------
# Kinematics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VehicleState:
    id: int
    role: str
    x: float
    y: float
    vx: float
    vy: float
    lane: int
    length: float
    width: float
    height: float

    @property
    def speed(self):
        return math.hypot(self.vx, self.vy)


def _unit_sigmoid(u, steepness=10.0):
    """Logistic rescaled so that s(0) = 0, s(1) = 1; monotone on [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    lo = 1.0 / (1.0 + math.exp(steepness / 2))
    hi = 1.0 / (1.0 + math.exp(-steepness / 2))
    return (1.0 / (1.0 + np.exp(-steepness * (u - 0.5))) - lo) / (hi - lo)


def _stop_interval(m: Maneuver, speed):
    t_brake = speed / m.decel if m.decel > 0 else 0.0
    return m.start, m.start + 2 * t_brake + m.hold


def _check_conflicts(cfg: ScenarioConfig):
    speeds = {v.id: v.speed for v in cfg.vehicles}
    for vid in speeds:
        for axis in ("long", "lat"):
            spans = []
            for m in cfg.maneuvers:
                if m.vehicle != vid:
                    continue
                if axis == "long" and m.kind in LONGITUDINAL:
                    spans.append(_stop_interval(m, speeds[vid]) if m.kind == "stop"
                                 else (m.start, m.start + m.duration))
                elif axis == "lat" and m.kind == "lane_change":
                    spans.append((m.start, m.start + LANE_CHANGE_SECONDS))
            spans.sort()
            for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
                if b0 < a1:
                    raise ConfigError(f"vehicle {vid}: overlapping {axis} maneuvers at t={b0}")


def simulate_kinematics(cfg: ScenarioConfig):
    """Per-vehicle list of states at t_i = i / sample_rate, i < num_frames."""
    _check_conflicts(cfg)
    n = cfg.num_frames
    dt = 1.0 / cfg.sample_rate
    t = np.arange(n) / cfg.sample_rate
    out = {}
    for v in cfg.vehicles:
        mans = [m for m in cfg.maneuvers if m.vehicle == v.id]
        speed = np.full(n, float(v.speed))
        for m in mans:
            if m.kind in ("pass", "fall_back"):
                sign = 1.0 if m.kind == "pass" else -1.0
                active = (t >= m.start - 1e-9) & (t < m.start + m.duration - 1e-9)
                speed[active] += sign * m.delta_speed
            elif m.kind == "stop":
                t_brake = v.speed / m.decel if m.decel > 0 else 0.0
                rel = t - m.start
                prof = np.where(rel < t_brake, v.speed - m.decel * rel, 0.0)
                restart = rel - t_brake - m.hold
                prof = np.where(restart > 0, np.minimum(m.decel * restart, v.speed), prof)
                active = rel >= 0
                speed[active] = np.minimum(speed[active], np.maximum(prof[active], 0.0))
        speed = np.maximum(speed, 0.0)
        x = v.x0 + np.concatenate([[0.0], np.cumsum(speed[:-1] * dt)])

        lane = np.full(n, v.lane, dtype=np.int64)
        y = lane * cfg.lane_width * 1.0
        current = v.lane
        for m in sorted((m for m in mans if m.kind == "lane_change"), key=lambda m: m.start):
            frac = _unit_sigmoid((t - m.start) / LANE_CHANGE_SECONDS)
            started = t >= m.start
            y = np.where(started, (current + (m.target_lane - current) * frac) * cfg.lane_width, y)
            lane = np.where(t >= m.start + LANE_CHANGE_SECONDS / 2, m.target_lane, lane)
            current = m.target_lane
        vy = np.gradient(y, dt) if n > 1 else np.zeros(n)
        out[v.id] = [VehicleState(v.id, v.role, float(x[i]), float(y[i]), float(speed[i]),
                                  float(vy[i]), int(lane[i]), v.length, v.width, v.height)
                     for i in range(n)]
    return out


# --------------------------------------------------------------------------
# Camera projection and detector
# --------------------------------------------------------------------------


def relative_polar(state: VehicleState, receiver: VehicleState):
    """(azimuth in degrees (-180, 180], range in metres) seen from the receiver."""
    dx, dy = state.x - receiver.x, state.y - receiver.y
    return math.degrees(math.atan2(dy, dx)), math.hypot(dx, dy)


def box_extent(state: VehicleState, azimuth_deg, rng_m, camera: CameraConfig):
    """Unclamped (width, height) of a vehicle's box at the given bearing / range."""
    a = math.radians(azimuth_deg)
    apparent = abs(state.length * math.sin(a)) + abs(state.width * math.cos(a))
    # the 180 deg image spans x in [0, 1]
    return apparent / (math.pi * rng_m), camera.k_h * state.height / rng_m


def ideal_box(state: VehicleState, receiver: VehicleState, camera: CameraConfig):
    """Noise-free box for one vehicle; None at zero range.

    Clamping to the image shrinks the box symmetrically so the centre, and
    hence the merged-plane point, is preserved.
    """
    az, rng_m = relative_polar(state, receiver)
    if rng_m == 0.0:
        return None
    side, xc = angle_to_image(az)
    yc = min(max(camera.horizon_y + camera.k_y / rng_m, 0.0), 1.0)
    w, h = box_extent(state, az, rng_m, camera)
    hw = min(w / 2, xc, 1.0 - xc)
    hh = min(h / 2, yc, 1.0 - yc)
    return BoundingBox(side, xc - hw, yc + hh, xc + hw, yc - hh, state.id)


def project_to_cameras(states, receiver: VehicleState, camera: CameraConfig = None):
    camera = camera or CameraConfig()
    boxes = []
    for s in states:
        if s.id == receiver.id:
            continue
        az, rng_m = relative_polar(s, receiver)
        if rng_m == 0.0:
            log.warning("vehicle %s at zero range from receiver; skipped", s.id)
            continue
        if rng_m > camera.max_range:
            continue
        boxes.append(ideal_box(s, receiver, camera))
    return boxes


def _clip01(v):
    return min(max(v, 0.0), 1.0)


def surrogate_detector(true_boxes, noise: DetectorNoise, rng: np.random.Generator):
    """Emulate a detector's output: misses, coordinate jitter, false positives."""
    if noise.is_zero:
        return list(true_boxes)
    out = []
    for b in true_boxes:
        if rng.random() < noise.miss_prob:
            continue
        if noise.box_jitter_std > 0:
            x1, y1, x2, y2 = (_clip01(c + rng.normal(0.0, noise.box_jitter_std))
                              for c in (b.x1, b.y1, b.x2, b.y2))
            b = BoundingBox(b.image_side, min(x1, x2), max(y1, y2), max(x1, x2), min(y1, y2),
                            b.truth_vehicle_id)
        out.append(b)
    for _ in range(rng.poisson(noise.false_positive_rate)):
        side = "front" if rng.random() < 0.5 else "back"
        xc, yc = rng.uniform(0, 1), rng.uniform(0.5, 1)
        w, h = rng.uniform(0.01, 0.08), rng.uniform(0.02, 0.15)
        x1, x2 = _clip01(xc - w / 2), _clip01(xc + w / 2)
        y1, y2 = _clip01(yc + h / 2), _clip01(yc - h / 2)
        out.append(BoundingBox(side, x1, y1, x2, y2, None))
    return out


# --------------------------------------------------------------------------
# Channel
# --------------------------------------------------------------------------


def panel_for_angle(angle_deg):
    """Panel whose 90-degree sector [b - 45, b + 45) contains the angle."""
    a = wrap_deg(angle_deg)
    if a >= 315.0 or a < 45.0:
        return "front"
    if a < 135.0:
        return "left"
    if a < 225.0:
        return "back"
    return "right"


def _path_at(angle_deg, gain):
    panel = panel_for_angle(angle_deg)
    local = angle_diff_deg(angle_deg, phy.BORESIGHT_DEG[panel])
    return panel, phy.PathComponent(complex(gain), math.radians(local), 0.0)


def channel_from_geometry(states, receiver: VehicleState, cfg: ChannelConfig,
                          rng: np.random.Generator):
    tx = next(s for s in states if s.role == "transmitter")
    az, rng_m = relative_polar(tx, receiver)
    ch = phy.Channel.empty(cfg.num_antennas)
    amp = cfg.reference_gain / max(rng_m, 1e-6)
    panel, path = _path_at(az, amp * np.exp(1j * rng.uniform(0, 2 * math.pi)))
    ch.per_panel[panel].append(path)
    for _ in range(cfg.nlos_paths):
        angle = rng.uniform(0.0, 360.0)
        gain = cfg.nlos_gain_ratio * amp * np.exp(1j * rng.uniform(0, 2 * math.pi))
        panel, path = _path_at(angle, gain)
        ch.per_panel[panel].append(path)
    return ch


# --------------------------------------------------------------------------
# Frames and manifests
# --------------------------------------------------------------------------


@dataclass
class FrameTruth:
    tx_id: int
    tx_point: PolarPoint
    tx_azimuth: float      # degrees [0, 360)
    tx_range: float        # metres
    optimal_beam: int      # flat index
    rel_speed: float       # |v_tx - v_rx|, m/s
    rel_vx: float          # signed longitudinal closing speed, m/s
    channel: phy.Channel


@dataclass
class Frame:
    scenario_id: str
    index: int
    timestamp: float
    boxes: list
    power: Optional[np.ndarray]
    truth: FrameTruth

    def to_json(self):
        t = self.truth
        return json.dumps({
            "schema": MANIFEST_SCHEMA, "version": MANIFEST_VERSION,
            "scenario_id": self.scenario_id, "index": self.index, "timestamp": self.timestamp,
            "boxes": [b.to_list() for b in self.boxes],
            "power": None if self.power is None else self.power.tolist(),
            "truth": {"tx_id": t.tx_id, "tx_point": [t.tx_point.radius, t.tx_point.angle],
                      "tx_azimuth": t.tx_azimuth, "tx_range": t.tx_range,
                      "optimal_beam": t.optimal_beam, "rel_speed": t.rel_speed,
                      "rel_vx": t.rel_vx, "channel": t.channel.to_dict()},
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, line):
        doc = json.loads(line)
        if doc.get("schema") != MANIFEST_SCHEMA or doc.get("version") != MANIFEST_VERSION:
            raise DataError("unsupported manifest line")
        t = doc["truth"]
        truth = FrameTruth(t["tx_id"], PolarPoint(*t["tx_point"]), t["tx_azimuth"], t["tx_range"],
                           t["optimal_beam"], t["rel_speed"], t["rel_vx"],
                           phy.Channel.from_dict(t["channel"]))
        power = None if doc["power"] is None else np.array(doc["power"], dtype=np.float64)
        return cls(doc["scenario_id"], doc["index"], doc["timestamp"],
                   [BoundingBox.from_list(b) for b in doc["boxes"]], power, truth)


def write_manifest(frames, path):
    path = Path(path)
    try:
        with path.open("w") as fh:
            for f in frames:
                fh.write(f.to_json())
                fh.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path):
    path = Path(path)
    try:
        with path.open() as fh:
            return [Frame.from_json(line) for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed manifest {path}: {exc}") from exc


def frame_rng(seed, index, stream):
    return np.random.default_rng([int(seed), int(index), int(stream)])


def generate_dataset(cfg: ScenarioConfig, manifest_path=None, codebook=None):
    """Run the whole per-step pipeline and optionally write the manifest."""
    traj = simulate_kinematics(cfg)
    ch_cfg = cfg.channel
    codebook = codebook or phy.build_dft_codebook(ch_cfg.num_antennas, ch_cfg.beams_per_panel)
    rx_id = cfg.vehicle("receiver").id
    tx_id = cfg.vehicle("transmitter").id
    frames = []
    for i in range(cfg.num_frames):
        states = [traj[v.id][i] for v in cfg.vehicles]
        rx, tx = traj[rx_id][i], traj[tx_id][i]
        true_boxes = project_to_cameras(states, rx, cfg.camera)
        boxes = surrogate_detector(true_boxes, cfg.detector, frame_rng(cfg.seed, i, _STREAM_DETECTOR))
        channel = channel_from_geometry(states, rx, ch_cfg, frame_rng(cfg.seed, i, _STREAM_PHASE))
        clean = phy.receive_power(channel, codebook, ch_cfg.symbol_power, 0.0)
        best = phy.optimal_beam(clean).flat_index
        power = None
        if ch_cfg.enabled:
            power = clean if ch_cfg.noise_std == 0 else phy.receive_power(
                channel, codebook, ch_cfg.symbol_power, ch_cfg.noise_std,
                frame_rng(cfg.seed, i, _STREAM_NOISE))
        az, rng_m = relative_polar(tx, rx)
        tx_box = ideal_box(tx, rx, cfg.camera)
        truth = FrameTruth(tx_id, box_to_point(tx_box), wrap_deg(az), rng_m, best,
                           math.hypot(tx.vx - rx.vx, tx.vy - rx.vy), tx.vx - rx.vx, channel)
        frames.append(Frame(cfg.scenario_id, i, i / cfg.sample_rate, boxes, power, truth))
    if manifest_path is not None:
        write_manifest(frames, manifest_path)
    return frames


# --------------------------------------------------------------------------
# Scenario families
# --------------------------------------------------------------------------

PROFILES = ("co_moving", "maneuver_rich", "identification")


def random_scenario(seed, profile="maneuver_rich", duration=60.0, max_clutter=4,
                    detector=None, channel=None, scenario_id=None, max_offset=25.0,
                    speed_delta=(3.0, 8.0), pause=(0.3, 2.5)):
    """Seeded scenario drawn from one of the declared families.

    ``co_moving``: transmitter follows at constant offset, no maneuvers.
    ``maneuver_rich``: transmitter repeatedly changes lane, passes and falls
    back around the receiver; joint stops emulate stop signs.
    ``identification``: like ``maneuver_rich`` with a wider spread of
    starting geometry, used to build annotation sets.

    ``max_offset`` bounds how far ahead/behind a pass or fall-back ends (m),
    ``speed_delta`` is the range of speed changes (m/s) and ``pause`` the
    range of idle time between transmitter events (s).
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown scenario profile {profile!r}")
    rng = np.random.default_rng([int(seed), 7919])
    base = float(rng.uniform(10.0, 16.0))
    rx = VehicleSpec(0, "receiver", 0, 0.0, base)
    tx_lane = int(rng.choice([-1, 0, 1]))
    if max_offset <= 6.0 or speed_delta[0] <= 0 or speed_delta[0] > speed_delta[1] \
            or pause[0] < 0 or pause[0] > pause[1]:
        raise ConfigError("bad maneuver intensity settings")
    tx_x0 = -float(rng.uniform(8.0, max(max_offset, 8.0)))
    if profile == "identification" and rng.random() < 0.4:
        tx_x0 = -tx_x0 if tx_lane != 0 else tx_x0
    tx = VehicleSpec(1, "transmitter", tx_lane, tx_x0, base)
    vehicles = [rx, tx]
    n_clutter = int(rng.integers(0, max_clutter + 1))
    occupied = [(rx.lane, rx.x0), (tx.lane, tx.x0)]
    next_id = 2
    while len(vehicles) - 2 < n_clutter:
        lane = int(rng.integers(-1, 3))
        x0 = float(rng.uniform(-45.0, 45.0))
        if any(lane == l and abs(x0 - x) < 10.0 for l, x in occupied):
            continue
        occupied.append((lane, x0))
        speed = base + float(rng.uniform(-1.0, 1.0))
        # cars sharing the receiver's lane keep their gap instead of driving through it
        vehicles.append(VehicleSpec(next_id, "clutter", lane, x0,
                                    base if lane == rx.lane else speed,
                                    length=float(rng.uniform(4.0, 6.0))))
        next_id += 1
    followers = [v.id for v in vehicles if v.role == "clutter" and v.lane == rx.lane]

    maneuvers = []
    if profile != "co_moving":
        maneuvers = _plan_transmitter(rng, tx, duration, base, max_offset, speed_delta, pause)
        # stop sign: receiver, transmitter and the cars in the receiver's lane brake together
        if rng.random() < 0.5:
            t_stop = round(float(rng.uniform(5.0, max(duration - 15.0, 6.0))), 1)
            stop = Maneuver("stop", 1, t_stop, decel=3.0, hold=2.0)
            s0, s1 = _stop_interval(stop, base)
            if not any(m.start < s1 and m.start + m.duration > s0
                       for m in maneuvers if m.kind in LONGITUDINAL):
                for vid in (0, 1, *followers):
                    maneuvers.append(Maneuver("stop", vid, t_stop, decel=3.0, hold=2.0))
    return ScenarioConfig(duration=duration, vehicles=vehicles, maneuvers=maneuvers,
                          detector=detector or DetectorNoise(), channel=channel or ChannelConfig(),
                          seed=int(seed), scenario_id=scenario_id or f"{profile}-{seed}")


def _plan_transmitter(rng, tx: VehicleSpec, duration, base_speed, max_offset=25.0,
                      speed_delta=(3.0, 8.0), pause=(0.3, 2.5)):
    """Timeline of transmitter maneuvers keeping it within ``max_offset`` of the receiver."""
    events = []
    t = float(rng.uniform(0.5, 2.0))
    lane, offset = tx.lane, tx.x0
    while t < duration - 1.0:
        if lane == 0:
            if abs(offset) < 8.0 or rng.random() < 0.7:
                target = int(rng.choice([-1, 1]))
                events.append(Maneuver("lane_change", tx.id, t, target_lane=target))
                lane = target
                t += LANE_CHANGE_SECONDS
            else:
                t += float(rng.uniform(1.0, 3.0))
        else:
            if abs(offset) >= 8.0 and rng.random() < 0.25:
                events.append(Maneuver("lane_change", tx.id, t, target_lane=0))
                lane = 0
                t += LANE_CHANGE_SECONDS
                continue
            dv = float(rng.uniform(*speed_delta))
            if offset < 0:
                target = float(rng.uniform(6.0, max_offset))
                kind = "pass"
            else:
                target = -float(rng.uniform(6.0, max_offset))
                kind = "fall_back"
            dv = min(dv, base_speed - 1.0) if kind == "fall_back" else dv
            dur = round(abs(target - offset) / dv, 1)
            events.append(Maneuver(kind, tx.id, t, duration=dur, delta_speed=dv))
            offset += (dv if kind == "pass" else -dv) * dur
            t += dur
        t = round(t + float(rng.uniform(*pause)), 1)
    return events
