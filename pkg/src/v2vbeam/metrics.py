"""Evaluation metrics and stratified accuracy tables."""
from __future__ import annotations

import math

import numpy as np

from .errors import InputError

OBJECT_BINS = (("1-4", 0.0, 4.5), ("5-10", 4.5, 10.5), ("11-20", 10.5, 20.5), ("21+", 20.5, math.inf))
SPEED_BIN = 2.0
STRATA = ("beam_diff", "rel_speed", "obj_count")


def top_k_accuracy(predictions, labels, k=None):
    """Fraction of samples whose label is among the first ``k`` ranked beams."""
    if len(predictions) != len(labels):
        raise InputError("predictions and labels differ in length")
    if len(labels) == 0:
        raise InputError("nothing to score")
    hits = 0
    for ranked, label in zip(predictions, labels):
        top = ranked if k is None else ranked[:k]
        hits += int(label) in [int(b) for b in top]
    return hits / len(labels)


def r_squared_components(predicted, truth):
    """Per-component R^2; None where the truth component is constant."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise InputError("predicted and truth must be nonempty and equally shaped")
    if p.ndim == 1:
        p, t = p[:, None], t[:, None]
    out = []
    for j in range(t.shape[1]):
        ss_tot = float(np.sum((t[:, j] - t[:, j].mean()) ** 2))
        if ss_tot == 0.0:
            out.append(None)
            continue
        out.append(1.0 - float(np.sum((t[:, j] - p[:, j]) ** 2)) / ss_tot)
    return out


def r_squared(predicted, truth):
    """Mean of the applicable per-component R^2 values (None if none apply)."""
    comps = [c for c in r_squared_components(predicted, truth) if c is not None]
    return sum(comps) / len(comps) if comps else None


def ring_distance(a, b, ring_positions):
    """Circular distance between two flat beams on the angle-ordered ring."""
    n = len(ring_positions)
    d = abs(int(ring_positions[a]) - int(ring_positions[b]))
    return min(d, n - d)


def ring_ranking(center, ring_positions, k=None):
    """Beams ordered by ring distance from ``center`` (ties: lower flat index)."""
    n = len(ring_positions)
    pos = np.asarray(ring_positions)
    d = np.abs(pos - pos[center])
    d = np.minimum(d, n - d)
    order = np.lexsort((np.arange(n), d))
    return order[:k].tolist() if k else order.tolist()


def speed_bin(speed):
    lo = math.floor(speed / SPEED_BIN) * SPEED_BIN
    return f"{lo:g}-{lo + SPEED_BIN:g}"


def object_bin(mean_count):
    for name, lo, hi in OBJECT_BINS:
        if lo <= mean_count < hi:
            return name
    raise InputError(f"negative object count {mean_count}")


def stratify(records, kind):
    """Top-1/top-5 per stratum.

    ``records`` are dicts with ``label``, ``top5`` (ranked list) and the
    stratification keys ``beam_diff``, ``rel_speed`` and ``obj_count``.
    Empty bins inside the observed range are emitted with count 0 and null
    accuracies.
    """
    if kind not in STRATA:
        raise InputError(f"unknown stratum {kind!r}")
    groups = {}
    for rec in records:
        if kind == "beam_diff":
            if rec.get("beam_diff") is None:
                continue
            key = int(rec["beam_diff"])
        elif kind == "rel_speed":
            key = speed_bin(rec["rel_speed"])
        else:
            key = object_bin(rec["obj_count"])
        groups.setdefault(key, []).append(rec)

    if kind == "beam_diff":
        keys = list(range(max(groups) + 1)) if groups else []
    elif kind == "rel_speed":
        top = max((float(k.split("-")[0]) for k in groups), default=-SPEED_BIN)
        keys = [speed_bin(s) for s in np.arange(0.0, top + SPEED_BIN, SPEED_BIN)]
    else:
        keys = [name for name, _, _ in OBJECT_BINS]

    rows = []
    for key in keys:
        recs = groups.get(key, [])
        rows.append(_row(str(key), recs))
    return rows


def _row(name, recs):
    if not recs:
        return {"bin": name, "count": 0, "top1": None, "top5": None}
    labels = [r["label"] for r in recs]
    ranked = [r["top5"] for r in recs]
    return {"bin": name, "count": len(recs), "top1": top_k_accuracy(ranked, labels, 1),
            "top5": top_k_accuracy(ranked, labels, 5)}


def beam_diff_groups(records):
    """Coarse beam-difference groups 0 / 1-2 / >=3."""
    spans = (("0", 0, 0), ("1-2", 1, 2), (">=3", 3, math.inf))
    return [_row(name, [r for r in records if r.get("beam_diff") is not None
                        and lo <= r["beam_diff"] <= hi]) for name, lo, hi in spans]


def beam_difference(seq, ring_positions):
    """Ring distance between the truth beams of a window's first and last frames.

    None when either truth beam is missing.
    """
    try:
        a = seq.frames[0].truth.optimal_beam
        b = seq.frames[-1].truth.optimal_beam
    except AttributeError:
        return None
    if a is None or b is None:
        return None
    return ring_distance(a, b, ring_positions)
