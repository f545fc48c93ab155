"""Four-panel ULA receiver: geometric channel, beam codebook, beam sweep.

Panels are flattened in the fixed order front, right, back, left, so the
flat beam index is ``panel_order * Q + local_index``. Panel-local azimuths are
counterclockwise-positive with 0 at the panel boresight, matching the merged
plane convention used by the vision side.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InputError

PANELS = ("front", "right", "back", "left")
BORESIGHT_DEG = {"front": 0.0, "left": 90.0, "back": 180.0, "right": 270.0}


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        if not np.isfinite(abs(self.gain)):
            raise InputError("path gain must be finite")
        if not -math.pi < self.azimuth <= math.pi:
            raise InputError(f"azimuth {self.azimuth} outside (-pi, pi]")
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise InputError(f"elevation {self.elevation} outside [-pi/2, pi/2]")


@dataclass
class Channel:
    num_antennas: int
    per_panel: dict = field(default_factory=lambda: {p: [] for p in PANELS})

    def __post_init__(self):
        missing = set(PANELS) - set(self.per_panel)
        if missing:
            raise InputError(f"channel lacks panels {sorted(missing)}")

    @classmethod
    def empty(cls, num_antennas):
        return cls(num_antennas, {p: [] for p in PANELS})

    def panel_vector(self, panel):
        h = np.zeros(self.num_antennas, dtype=np.complex128)
        for path in self.per_panel[panel]:
            h += path.gain * steering_vector(self.num_antennas, path.azimuth, path.elevation)
        return h

    def scaled(self, factor):
        return Channel(self.num_antennas, {
            p: [PathComponent(c.gain * factor, c.azimuth, c.elevation) for c in paths]
            for p, paths in self.per_panel.items()})

    def to_dict(self):
        return {"num_antennas": self.num_antennas,
                "paths": [[p, c.gain.real, c.gain.imag, c.azimuth, c.elevation]
                          for p in PANELS for c in self.per_panel[p]]}

    @classmethod
    def from_dict(cls, doc):
        ch = cls.empty(doc["num_antennas"])
        for panel, re, im, az, el in doc["paths"]:
            ch.per_panel[panel].append(PathComponent(complex(re, im), az, el))
        return ch


@dataclass(frozen=True)
class GlobalBeamIndex:
    panel: str
    local_index: int
    flat_index: int

    @classmethod
    def from_flat(cls, flat, beams_per_panel):
        flat = int(flat)
        if not 0 <= flat < 4 * beams_per_panel:
            raise InputError(f"flat beam index {flat} outside [0, {4 * beams_per_panel})")
        order, local = divmod(flat, beams_per_panel)
        return cls(PANELS[order], local, flat)

    @classmethod
    def from_local(cls, panel, local_index, beams_per_panel):
        if not 0 <= local_index < beams_per_panel:
            raise InputError("local index out of range")
        return cls(panel, int(local_index), PANELS.index(panel) * beams_per_panel + int(local_index))


@dataclass
class Codebook:
    num_antennas: int
    beams_per_panel: int
    panel_fov: float
    vectors: np.ndarray    # (4, Q, M) complex, panels in PANELS order
    angles: np.ndarray     # (4, Q) panel-local steering angles, radians

    @property
    def size(self):
        return 4 * self.beams_per_panel

    def merged_angles_deg(self):
        """Steering angle of every flat beam on the 0-360 deg vehicle plane."""
        out = np.empty(self.size)
        Q = self.beams_per_panel
        for k, panel in enumerate(PANELS):
            out[k * Q:(k + 1) * Q] = BORESIGHT_DEG[panel] + np.degrees(self.angles[k])
        return np.mod(out, 360.0)

    def ring_positions(self):
        """Position of each flat index on the angle-ordered ring of all beams."""
        order = np.argsort(self.merged_angles_deg(), kind="stable")
        pos = np.empty(self.size, dtype=np.int64)
        pos[order] = np.arange(self.size)
        return pos

    def to_json(self):
        return json.dumps({
            "format": "v2vbeam-codebook", "version": 1,
            "num_antennas": self.num_antennas, "beams_per_panel": self.beams_per_panel,
            "panel_fov": self.panel_fov, "panel_order": list(PANELS),
            "steering_angles": self.angles.tolist(),
            # [..., 2] interleaves real / imag
            "vectors": np.stack([self.vectors.real, self.vectors.imag], axis=-1).tolist(),
        })

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != "v2vbeam-codebook" or list(doc["panel_order"]) != list(PANELS):
            raise DataError("unsupported codebook document")
        v = np.array(doc["vectors"])
        return cls(doc["num_antennas"], doc["beams_per_panel"], doc["panel_fov"],
                   v[..., 0] + 1j * v[..., 1], np.array(doc["steering_angles"]))


def steering_vector(num_antennas, azimuth, elevation=0.0):
    """Half-wavelength ULA response, element k = exp(j pi k sin(az) cos(el))."""
    if num_antennas < 1:
        raise InputError("need at least one antenna")
    k = np.arange(num_antennas)
    return np.exp(1j * math.pi * k * math.sin(azimuth) * math.cos(elevation))


def build_dft_codebook(num_antennas=16, beams_per_panel=64, panel_fov=math.pi / 2):
    """Oversampled DFT-style codebook, identical on each panel.

    Beam m points where sin(theta_m) = s * (2m/Q - 1), s = sin(fov/2): a
    uniform sine grid over [-s, s) that contains boresight for even Q and
    lets adjacent panels tile the circle without duplicate beams.
    """
    if beams_per_panel < 1:
        raise InputError("beams_per_panel must be >= 1")
    if not 0 < panel_fov <= math.pi:
        raise InputError("panel_fov must be in (0, pi]")
    s = math.sin(panel_fov / 2)
    sines = s * (2.0 * np.arange(beams_per_panel) / beams_per_panel - 1.0)
    angles = np.arcsin(sines)
    # matched filter: f = a(theta) / sqrt(M) so |f^H a(theta)|^2 = M
    k = np.arange(num_antennas)
    vecs = np.exp(1j * math.pi * np.outer(sines, k)) / math.sqrt(num_antennas)
    return Codebook(num_antennas, beams_per_panel, panel_fov,
                    np.broadcast_to(vecs, (4,) + vecs.shape).copy(),
                    np.broadcast_to(angles, (4, beams_per_panel)).copy())


def receive_power(channel: Channel, codebook: Codebook, symbol_power=1.0, noise_std=0.0,
                  rng_seed=None):
    """|f^H h sqrt(P) + n|^2 for every beam, in flat-index order."""
    if channel.num_antennas != codebook.num_antennas:
        raise InputError(f"channel has {channel.num_antennas} antennas, "
                         f"codebook {codebook.num_antennas}")
    amp = math.sqrt(symbol_power)
    y = np.concatenate([codebook.vectors[k].conj() @ channel.panel_vector(panel) * amp
                        for k, panel in enumerate(PANELS)])
    if noise_std > 0:
        rng = np.random.default_rng(rng_seed)
        y = y + noise_std / math.sqrt(2) * (rng.standard_normal(y.shape)
                                            + 1j * rng.standard_normal(y.shape))
    return np.abs(y) ** 2


def optimal_beam(power):
    """Exhaustive-search argmax over all 4Q beams; ties go to the smallest flat index."""
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 1 or power.size == 0 or power.size % 4:
        raise InputError("power must be a nonempty vector of length 4Q")
    if np.isnan(power).any():
        raise InputError("power vector contains NaN")
    # np.argmax returns the first maximum
    return GlobalBeamIndex.from_flat(int(np.argmax(power)), power.size // 4)
