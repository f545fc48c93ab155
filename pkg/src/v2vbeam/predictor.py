"""LSTM classifier from a tracked point sequence to the next optimal beam."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import DataError, InputError


@dataclass
class BeamHyper:
    hidden: int = 150
    layers: int = 2
    dropout: float = 0.1
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 32
    epochs: int = 200


def track_features(points):
    """(r, 2) array of (radius, unwrapped angle in degrees).

    Successive angles are shifted by multiples of 360 so consecutive steps
    differ by at most 180 degrees.
    """
    pts = [p for p in points]
    if not pts:
        raise InputError("empty track")
    feats = np.empty((len(pts), 2))
    feats[:, 0] = [p.radius for p in pts]
    feats[:, 1] = np.degrees(np.unwrap(np.radians([p.angle for p in pts])))
    return feats


def _points(track):
    return track.points if hasattr(track, "points") else list(track)


@dataclass
class BeamPredictorModel:
    net: nn.LstmNet
    input_min: np.ndarray
    input_max: np.ndarray
    seq_len: int

    def __post_init__(self):
        self.input_min = np.asarray(self.input_min, dtype=np.float64)
        self.input_max = np.asarray(self.input_max, dtype=np.float64)
        if not np.all(self.input_min < self.input_max):
            raise DataError("degenerate input range: min must be < max per feature")

    @property
    def num_classes(self):
        return self.net.num_classes

    def normalize(self, feats):
        return (feats - self.input_min) / (self.input_max - self.input_min)

    def features(self, tracks):
        X = np.stack([track_features(_points(t)) for t in tracks])
        if X.shape[1] != self.seq_len:
            raise InputError(f"tracks must have length {self.seq_len}, got {X.shape[1]}")
        return self.normalize(X)

    def logits(self, tracks):
        return nn.lstm_predict(self.net, self.features(tracks))

    def save(self, path, seed=None):
        nn.save_checkpoint(path, self.net, seed, {"beam_predictor": {
            "input_min": self.input_min.tolist(), "input_max": self.input_max.tolist(),
            "seq_len": self.seq_len, "num_classes": self.num_classes}})

    @classmethod
    def load(cls, path):
        net, doc = nn.load_checkpoint(path)
        extra = doc["extra"].get("beam_predictor")
        if extra is None or not isinstance(net, nn.LstmNet):
            raise DataError(f"{path} is not a beam-predictor checkpoint")
        return cls(net, extra["input_min"], extra["input_max"], extra["seq_len"])


def rank_beams(logits, k=None):
    """Indices by descending logit; equal logits keep ascending index."""
    order = np.argsort(-np.asarray(logits), axis=-1, kind="stable")
    return order if k is None else order[..., :k]


def train_beam_predictor(tracks, labels, hyper: BeamHyper = None, seed=0, num_classes=256,
                         callback=None):
    """Fit input min/max on ``tracks`` and train with cross-entropy and Adam.

    Minimizing mean cross-entropy over i.i.d. samples is the same as
    maximizing the product of predicted label probabilities.
    Returns ``(model, per-epoch mean losses)``.
    """
    hyper = hyper or BeamHyper()
    if not len(tracks):
        raise InputError("empty training set")
    if len(tracks) != len(labels):
        raise InputError("tracks and labels differ in length")
    y = np.asarray(labels)
    if y.dtype.kind not in "iu" or y.min() < 0 or y.max() >= num_classes:
        raise InputError(f"labels must be integers in [0, {num_classes})")
    raw = np.stack([track_features(_points(t)) for t in tracks])
    lo = raw.reshape(-1, 2).min(axis=0)
    hi = raw.reshape(-1, 2).max(axis=0)
    # a feature constant over the training set gets a unit span
    hi = np.where(hi > lo, hi, lo + 1.0)
    rng = np.random.default_rng([seed, 2])
    net = nn.LstmNet.initialize(2, hyper.hidden, num_classes, hyper.layers, hyper.dropout,
                                seed=int(rng.integers(2**31)))
    model = BeamPredictorModel(net, lo, hi, raw.shape[1])
    opt = nn.OptimizerState.for_model(net, "adam", hyper.learning_rate, hyper.weight_decay)
    history = nn.fit(net, model.normalize(raw), y, "cross_entropy", opt, hyper.epochs,
                     hyper.batch_size, seed=int(rng.integers(2**31)), callback=callback)
    return model, history


def predict_beam(model: BeamPredictorModel, track, k=5):
    """Top-``k`` flat beam indices for one track."""
    if not 1 <= k <= model.num_classes:
        raise InputError(f"k must be in [1, {model.num_classes}]")
    return rank_beams(model.logits([track])[0], k).tolist()


def initial_loss(model: BeamPredictorModel, tracks, labels):
    """Mean cross-entropy before any update (inference mode)."""
    return nn._batch_loss(model.logits(tracks), np.asarray(labels), "cross_entropy")[0]

