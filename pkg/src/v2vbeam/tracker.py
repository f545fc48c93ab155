"""Transmitter identification from the beam-power vector, then tracking.

Identification regresses the transmitter's merged-plane point from the
normalized 4Q power vector with a DenseNet and picks the nearest detection.
Tracking carries that point forward frame by frame with the same
nearest-distance rule. Distances are Euclidean in the cartesian embedding of
(radius, angle), which sidesteps the 0/360 degree wrap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nn
from .errors import DataError, InputError, NoCandidateError
from .polar import DetectionSet, PolarPoint, polar_to_cartesian
from .metrics import r_squared

TIE_TOL = 1e-12


@dataclass
class IdentifierHyper:
    hidden: tuple = (256, 256)
    learning_rate: float = 1e-2
    weight_decay: float = 1e-4
    batch_size: int = 32
    epochs: int = 100


@dataclass
class IdentifierModel:
    net: nn.DenseNet
    power_norm: float
    coord_min: np.ndarray
    coord_max: np.ndarray
    angle_cut: float = 0.0   # angles are represented in [cut, cut + 360)

    def __post_init__(self):
        if not (np.isfinite(self.power_norm) and self.power_norm > 0):
            raise DataError("power normalization must be finite and positive")
        self.coord_min = np.asarray(self.coord_min, dtype=np.float64)
        self.coord_max = np.asarray(self.coord_max, dtype=np.float64)
        if not np.all(self.coord_min < self.coord_max):
            raise DataError("degenerate coordinate range: min must be < max per component")

    def normalize_power(self, power):
        return np.asarray(power, dtype=np.float64) / self.power_norm

    def predict_coords(self, powers):
        """Raw (radius, angle) predictions for a batch of power vectors."""
        out = nn.dense_predict(self.net, self.normalize_power(np.atleast_2d(powers)))
        out = self.coord_min + out * (self.coord_max - self.coord_min)
        out[:, 1] = np.mod(out[:, 1], 360.0)
        return out

    def predict_point(self, power):
        r, a = self.predict_coords(power)[0]
        return PolarPoint.make(max(r, 0.0), a)

    def to_extra(self):
        return {"power_norm": self.power_norm, "coord_min": self.coord_min.tolist(),
                "coord_max": self.coord_max.tolist(), "angle_cut": self.angle_cut}

    def save(self, path, seed=None):
        nn.save_checkpoint(path, self.net, seed, {"identifier": self.to_extra()})

    @classmethod
    def load(cls, path):
        net, doc = nn.load_checkpoint(path)
        extra = doc["extra"].get("identifier")
        if extra is None or not isinstance(net, nn.DenseNet):
            raise DataError(f"{path} is not an identifier checkpoint")
        return cls(net, extra["power_norm"], extra["coord_min"], extra["coord_max"],
                   extra.get("angle_cut", 0.0))


@dataclass
class AnnotatedSample:
    power: np.ndarray
    point: PolarPoint
    detections: Optional[DetectionSet] = None
    tx_id: Optional[int] = None


def angle_cut_for(angles):
    """Start of the angle interval that puts the cut in the widest empty arc.

    Min-max normalizing a circular quantity is only continuous if the 0/360
    cut falls where the data is not.
    """
    a = np.sort(np.mod(np.asarray(angles, dtype=np.float64), 360.0))
    if len(a) == 0:
        return 0.0
    gaps = np.diff(np.append(a, a[0] + 360.0))
    i = int(np.argmax(gaps))
    return float(np.mod(a[i] + 0.5 * gaps[i], 360.0))


def unwrap_from(angles, cut):
    """Represent angles in [cut, cut + 360)."""
    return cut + np.mod(np.asarray(angles, dtype=np.float64) - cut, 360.0)


def nearest_index(target: PolarPoint, detections: DetectionSet):
    """Index of the detection closest to ``target``; ties go to the lower index."""
    if len(detections) == 0:
        raise NoCandidateError("no detections to choose from")
    d = np.linalg.norm(detections.cartesian() - np.array(polar_to_cartesian(target)), axis=1)
    return int(np.flatnonzero(d <= d.min() + TIE_TOL)[0]), float(d.min())


def identify(model: IdentifierModel, power, detections: DetectionSet):
    """(selected point, its index in ``detections``)."""
    if len(detections) == 0:
        raise NoCandidateError("frame has no detections; identification impossible")
    idx, _ = nearest_index(model.predict_point(power), detections)
    return detections.points[idx], idx


def train_identifier(samples, split_ratio=0.7, hyper: IdentifierHyper = None, seed=0):
    """Fit normalizers on the training split, train the FCN, score the test split.

    Returns ``(model, metrics)`` where metrics holds the test R^2 of the raw
    (radius, angle) coordinates and the identification top-1 accuracy (for
    samples carrying detections and a transmitter id).
    """
    hyper = hyper or IdentifierHyper()
    if len(samples) < 2:
        raise InputError("need at least two annotated samples")
    if not 0.0 < split_ratio < 1.0:
        raise InputError("split ratio must be in (0, 1)")
    rng = np.random.default_rng([seed, 1])
    order = rng.permutation(len(samples))
    n_train = min(max(int(round(split_ratio * len(samples))), 1), len(samples) - 1)
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]

    P = np.array([s.power for s in train], dtype=np.float64)
    C = np.array([(s.point.radius, s.point.angle) for s in train])
    cut = angle_cut_for(C[:, 1])
    C[:, 1] = unwrap_from(C[:, 1], cut)
    power_norm = float(P.max())
    cmin, cmax = C.min(axis=0), C.max(axis=0)
    if not np.all(cmin < cmax):
        raise DataError("degenerate coordinate range in training split")
    sizes = [P.shape[1], *hyper.hidden, 2]
    net = nn.DenseNet.initialize(sizes, seed=int(rng.integers(2**31)))
    model = IdentifierModel(net, power_norm, cmin, cmax, cut)
    opt = nn.OptimizerState.for_model(net, "adamw", hyper.learning_rate, hyper.weight_decay)
    history = nn.fit(net, P / power_norm, (C - cmin) / (cmax - cmin), "mse", opt,
                     hyper.epochs, hyper.batch_size, seed=int(rng.integers(2**31)))
    return model, evaluate_identifier(model, test) | {"train_loss": history,
                                                      "num_train": len(train), "num_test": len(test)}


def evaluate_identifier(model: IdentifierModel, samples):
    if not samples:
        return {"r2": None, "top1": None}
    pred = model.predict_coords(np.array([s.power for s in samples]))
    truth = np.array([(s.point.radius, s.point.angle) for s in samples])
    hits, scored = 0, 0
    for s, p in zip(samples, pred):
        if s.detections is None or s.tx_id is None:
            continue
        scored += 1
        if len(s.detections) == 0:
            continue
        idx, _ = nearest_index(PolarPoint.make(max(p[0], 0.0), p[1]), s.detections)
        hits += s.detections.source_ids[idx] == s.tx_id
    # score angles in the representation the regressor was trained on
    rep_p, rep_t = pred.copy(), truth.copy()
    rep_p[:, 1] = unwrap_from(pred[:, 1], model.angle_cut)
    rep_t[:, 1] = unwrap_from(truth[:, 1], model.angle_cut)
    return {"r2": r_squared(rep_p, rep_t), "top1": hits / scored if scored else None}


@dataclass
class Association:
    point: PolarPoint
    outcome: str            # "identified", "matched" or "coasted"
    index: Optional[int] = None


def track_step(previous: PolarPoint, detections: DetectionSet, gate=None):
    """Nearest detection to the previous point; coast when none qualifies."""
    if len(detections) == 0:
        return Association(previous, "coasted")
    idx, dist = nearest_index(previous, detections)
    if gate is not None and dist > gate:
        return Association(previous, "coasted")
    return Association(detections.points[idx], "matched", idx)


@dataclass
class Track:
    steps: list = field(default_factory=list)

    @property
    def points(self):
        return [s.point for s in self.steps]

    @property
    def coasted(self):
        return sum(s.outcome == "coasted" for s in self.steps)

    def __len__(self):
        return len(self.steps)


def run_tracker(model: Optional[IdentifierModel], detections, first_power=None, gate=None,
                oracle_point: Optional[PolarPoint] = None):
    """Identify on the first frame, then track through the remaining frames.

    ``detections`` is one DetectionSet per frame. ``oracle_point`` replaces
    the FCN prediction (used to isolate tracking from identification).
    """
    if not detections:
        raise InputError("empty sequence")
    first = detections[0]
    if len(first) == 0:
        raise NoCandidateError("no detections in the first frame; sequence rejected")
    if oracle_point is not None:
        idx, _ = nearest_index(oracle_point, first)
    else:
        if model is None or first_power is None:
            raise InputError("identification needs a model and the first power vector")
        _, idx = identify(model, first_power, first)
    track = Track([Association(first.points[idx], "identified", idx)])
    for dets in detections[1:]:
        track.steps.append(track_step(track.steps[-1].point, dets, gate))
    return track
