"""Sliding-window sequence samples and K-fold plans."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .polar import merge_to_plane

log = logging.getLogger(__name__)


@dataclass
class SequenceSample:
    frames: list            # r consecutive Frames
    first_power: np.ndarray
    label: int              # flat optimal beam of the successor frame
    scenario_id: str
    start: int

    @property
    def r(self):
        return len(self.frames)

    @property
    def label_frame_index(self):
        return self.start + self.r


def build_sequences(frames, r):
    """Every window of ``r`` consecutive frames that has a successor frame.

    Frames are grouped by scenario and sorted by index; windows never span
    a scenario boundary or a timing gap.
    """
    if r < 1:
        raise InputError("window length must be at least 1")
    by_scenario = {}
    for f in frames:
        by_scenario.setdefault(f.scenario_id, []).append(f)
    out = []
    for sid in sorted(by_scenario):
        seq = sorted(by_scenario[sid], key=lambda f: f.index)
        if len(seq) < r + 1:
            log.warning("scenario %s has %d frames, fewer than r+1=%d; no sequences",
                        sid, len(seq), r + 1)
            continue
        ts = np.array([f.timestamp for f in seq])
        dt = np.diff(ts)
        step = np.median(dt)
        ok = np.abs(dt - step) <= 1e-6
        for s in range(len(seq) - r):
            if not ok[s:s + r].all():
                continue
            first = seq[s]
            if first.power is None:
                raise InputError(f"frame {first.index} of {sid} has no power vector")
            out.append(SequenceSample(seq[s:s + r], first.power, seq[s + r].truth.optimal_beam,
                                      sid, seq[s].index))
    return out


class DetectionCache:
    """Merged-plane detections per frame, computed once."""

    def __init__(self, angle_tol=5.0, radius_tol=0.1):
        self.angle_tol = angle_tol
        self.radius_tol = radius_tol
        self._cache = {}

    def __call__(self, frame):
        key = (frame.scenario_id, frame.index)
        if key not in self._cache:
            front = [b for b in frame.boxes if b.image_side == "front"]
            back = [b for b in frame.boxes if b.image_side == "back"]
            self._cache[key] = merge_to_plane(front, back, self.angle_tol, self.radius_tol)
        return self._cache[key]


@dataclass
class FoldPlan:
    num_folds: int
    assignment: np.ndarray
    seed: Optional[int] = None

    def test_indices(self, fold):
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignment != fold)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.num_folds)


def kfold_split(n, k, seed=0):
    """Seeded permutation dealt round-robin into ``k`` folds."""
    if k < 2 or n < k:
        raise InputError(f"need k >= 2 and n >= k, got n={n}, k={k}")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k
    return FoldPlan(k, assignment, seed)


def kfold_split_groups(groups, k, seed=0):
    """Folds that keep every group (e.g. scenario) whole.

    Groups are shuffled and each goes to the currently smallest fold, so fold
    sizes are balanced as far as group sizes allow.
    """
    groups = list(groups)
    names = sorted(set(groups))
    if k < 2 or len(names) < k:
        raise InputError(f"need k >= 2 and at least k groups, got {len(names)} groups")
    counts = {g: 0 for g in names}
    for g in groups:
        counts[g] += 1
    rng = np.random.default_rng(seed)
    fold_of, load = {}, np.zeros(k, dtype=np.int64)
    for i in rng.permutation(len(names)):
        f = int(np.argmin(load))
        fold_of[names[i]] = f
        load[f] += counts[names[i]]
    return FoldPlan(k, np.array([fold_of[g] for g in groups], dtype=np.int64), seed)
