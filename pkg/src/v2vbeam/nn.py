"""Minimal float64 neural-network engine.

Two model kinds are supported: fully connected ReLU networks (``DenseNet``)
and stacked LSTM classifiers with a dense read-out (``LstmNet``). Gradients
are derived by hand (backpropagation, and backpropagation through time for
the LSTM) and applied with Adam or AdamW.

All batched routines take inputs shaped ``(batch, features)`` for dense nets
and ``(batch, time, features)`` for LSTMs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InputError, TrainingDivergenceError

CHECKPOINT_FORMAT = "v2vbeam-checkpoint"
CHECKPOINT_VERSION = 1


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def sigmoid(x):
    # tanh form: no overflow for large |x| and no masking
    return 0.5 * (np.tanh(0.5 * np.asarray(x)) + 1.0)


def softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# --------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------


class DenseNet:
    """Fully connected network, ReLU hidden layers and identity output."""

    def __init__(self, layer_sizes, weights, biases,
                 hidden_activation="relu", output_activation="identity"):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2 or min(layer_sizes) < 1:
            raise InputError(f"invalid layer sizes {layer_sizes}")
        if hidden_activation != "relu" or output_activation != "identity":
            raise InputError("only relu hidden / identity output activations are supported")
        if len(weights) != len(layer_sizes) - 1 or len(biases) != len(weights):
            raise InputError("need one weight matrix and bias per layer")
        self.layer_sizes = layer_sizes
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (layer_sizes[i + 1], layer_sizes[i])
            if w.shape != expect or b.shape != (expect[0],):
                raise InputError(f"layer {i}: weight {w.shape} / bias {b.shape}, expected {expect}")

    @classmethod
    def initialize(cls, layer_sizes, seed=0):
        rng = np.random.default_rng(seed)
        weights = [glorot_uniform(rng, n_out, n_in)
                   for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])]
        biases = [np.zeros(n) for n in layer_sizes[1:]]
        return cls(layer_sizes, weights, biases)

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    def params(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        return out


class LstmNet:
    """Stacked LSTM whose last top-layer hidden state feeds a DenseNet head.

    Gate rows in each layer's weight matrix are ordered input, forget, cell,
    output. Weights act on the concatenation ``[x_t, h_{t-1}]``.
    """

    def __init__(self, input_size, hidden_size, weights, biases, head: DenseNet,
                 inter_layer_dropout=0.0):
        if not 0.0 <= inter_layer_dropout < 1.0:
            raise InputError("dropout must be in [0, 1)")
        self.input_size = int(input_size)
        self.hidden_size = int(hidden_size)
        self.num_layers = len(weights)
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        self.head = head
        self.inter_layer_dropout = float(inter_layer_dropout)
        H = self.hidden_size
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            n_in = self.input_size if layer == 0 else H
            if w.shape != (4 * H, n_in + H) or b.shape != (4 * H,):
                raise InputError(f"LSTM layer {layer} has inconsistent gate shapes {w.shape}")
        if head.input_size != H:
            raise InputError("head input size must equal hidden size")

    @classmethod
    def initialize(cls, input_size, hidden_size, num_classes, num_layers=2,
                   dropout=0.0, seed=0, forget_bias=1.0):
        rng = np.random.default_rng(seed)
        H = hidden_size
        weights, biases = [], []
        for layer in range(num_layers):
            n_in = input_size if layer == 0 else H
            # per-gate Glorot, stacked
            w = np.vstack([glorot_uniform(rng, H, n_in + H) for _ in range(4)])
            b = np.zeros(4 * H)
            b[H:2 * H] = forget_bias
            weights.append(w)
            biases.append(b)
        head = DenseNet.initialize([H, num_classes], seed=rng.integers(2**31))
        return cls(input_size, H, weights, biases, head, dropout)

    @property
    def num_classes(self):
        return self.head.output_size

    def params(self):
        out = {}
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"lstm{layer}.W"] = w
            out[f"lstm{layer}.b"] = b
        for name, p in self.head.params().items():
            out[f"head.{name}"] = p
        return out


# --------------------------------------------------------------------------
# Forward / backward passes
# --------------------------------------------------------------------------


def _dense_forward_batch(net: DenseNet, X):
    acts, pre = [X], []
    h = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return h, (acts, pre)


def _dense_backward(net: DenseNet, cache, dout, prefix=""):
    acts, pre = cache
    grads = {}
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        dz = dout if i == last else dout * (pre[i] > 0)
        grads[f"{prefix}W{i}"] = dz.T @ acts[i]
        grads[f"{prefix}b{i}"] = dz.sum(axis=0)
        dout = dz @ net.weights[i]
    return grads, dout


def _check_dense_input(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_size:
        raise InputError(f"expected (batch, {net.input_size}) input, got {X.shape}")
    return X


def dense_forward(net: DenseNet, x):
    """Output-layer activations for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_size:
        raise InputError(f"input length {x.shape} does not match net input size {net.input_size}")
    out, _ = _dense_forward_batch(net, x[None, :])
    return out[0]


def dense_predict(net: DenseNet, X):
    out, _ = _dense_forward_batch(net, _check_dense_input(net, X))
    return out


def _dropout_masks(net: LstmNet, shape, rng):
    p = net.inter_layer_dropout
    masks = []
    for _ in range(net.num_layers - 1):
        if p > 0.0:
            masks.append((rng.random(shape) >= p) / (1.0 - p))
        else:
            masks.append(None)
    return masks


def _lstm_forward_batch(net: LstmNet, X, training=False, rng=None):
    B, T, _ = X.shape
    H = net.hidden_size
    masks = _dropout_masks(net, (B, T, H), rng) if training else [None] * (net.num_layers - 1)
    layer_in = X
    caches = []
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        # input contribution for all steps in one product
        n_in = layer_in.shape[2]
        zx = layer_in @ w[:, :n_in].T + b
        wh = w[:, n_in:]
        hs = np.empty((B, T, H))
        steps = []
        for t in range(T):
            z = zx[:, t] + h @ wh.T
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h_prev = h
            h = o * tc
            hs[:, t] = h
            steps.append((h_prev, c_prev, i, f, g, o, tc))
        caches.append((layer_in, steps))
        layer_in = hs
        if layer < net.num_layers - 1 and masks[layer] is not None:
            layer_in = hs * masks[layer]
    logits, head_cache = _dense_forward_batch(net.head, hs[:, -1])
    return logits, (caches, masks, head_cache)


def _lstm_backward(net: LstmNet, cache, dlogits):
    caches, masks, head_cache = cache
    grads, dh_top = _dense_backward(net.head, head_cache, dlogits, prefix="head.")
    H = net.hidden_size
    layer_in, steps = caches[-1]
    B, T = layer_in.shape[:2]
    d_hs = np.zeros((B, T, H))
    d_hs[:, -1] = dh_top
    for layer in range(net.num_layers - 1, -1, -1):
        layer_in, steps = caches[layer]
        w = net.weights[layer]
        n_in = layer_in.shape[2]
        gW = np.zeros_like(w)
        gb = np.zeros(4 * H)
        d_in = np.empty_like(layer_in)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h_prev, c_prev, i, f, g, o, tc = steps[t]
            dh = d_hs[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            xh = np.concatenate([layer_in[:, t], h_prev], axis=1)
            gW += dz.T @ xh
            gb += dz.sum(axis=0)
            dxh = dz @ w
            d_in[:, t] = dxh[:, :n_in]
            dh_next = dxh[:, n_in:]
            dc_next = dc * f
        grads[f"lstm{layer}.W"] = gW
        grads[f"lstm{layer}.b"] = gb
        if layer > 0:
            mask = masks[layer - 1]
            d_hs = d_in * mask if mask is not None else d_in
    return grads


def _check_sequence_batch(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != net.input_size:
        raise InputError(f"expected (batch, time, {net.input_size}) input, got {X.shape}")
    if X.shape[1] == 0:
        raise InputError("empty sequence")
    return X


def lstm_forward(net: LstmNet, sequence, training=False, rng_seed=None):
    """Class logits for one sequence (list of step vectors)."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise InputError("sequence must be a nonempty list of step vectors")
    rng = np.random.default_rng(rng_seed) if training else None
    logits, _ = _lstm_forward_batch(net, _check_sequence_batch(net, seq[None]), training, rng)
    return logits[0]


def lstm_predict(net: LstmNet, X):
    logits, _ = _lstm_forward_batch(net, _check_sequence_batch(net, X))
    return logits


# --------------------------------------------------------------------------
# Losses
# --------------------------------------------------------------------------


def loss_mse(prediction, target):
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise InputError(f"length mismatch {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def loss_cross_entropy(logits, label):
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= int(label) < z.shape[0] or int(label) != label:
        raise InputError(f"label {label} outside [0, {z.shape[0]})")
    shifted = z - z.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[int(label)])


def _batch_loss(outputs, targets, loss_kind):
    """Mean batch loss and its gradient w.r.t. the outputs."""
    B = outputs.shape[0]
    if loss_kind == "mse":
        diff = outputs - targets
        return float(np.mean(diff ** 2)), 2.0 * diff / diff.size
    if loss_kind == "cross_entropy":
        labels = np.asarray(targets, dtype=np.int64)
        if labels.min() < 0 or labels.max() >= outputs.shape[1]:
            raise InputError("label out of range")
        shifted = outputs - outputs.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(shifted).sum(axis=1))
        rows = np.arange(B)
        loss = float(np.mean(logsum - shifted[rows, labels]))
        grad = np.exp(shifted - logsum[:, None])
        grad[rows, labels] -= 1.0
        return loss, grad / B
    raise InputError(f"unknown loss kind {loss_kind!r}")


def loss_and_grads(model, inputs, targets, loss_kind, training=False, rng=None):
    """Mean batch loss and analytic gradients for every parameter."""
    if isinstance(model, DenseNet):
        X = _check_dense_input(model, inputs)
        out, cache = _dense_forward_batch(model, X)
        loss, dout = _batch_loss(out, np.asarray(targets, dtype=np.float64)
                                 if loss_kind == "mse" else targets, loss_kind)
        grads, _ = _dense_backward(model, cache, dout)
        return loss, grads
    if isinstance(model, LstmNet):
        X = _check_sequence_batch(model, inputs)
        if training and rng is None:
            rng = np.random.default_rng(0)
        out, cache = _lstm_forward_batch(model, X, training, rng)
        loss, dout = _batch_loss(out, targets, loss_kind)
        return loss, _lstm_backward(model, cache, dout)
    raise InputError(f"unsupported model type {type(model).__name__}")


# --------------------------------------------------------------------------
# Optimizers and training
# --------------------------------------------------------------------------


@dataclass
class OptimizerState:
    """Adam / AdamW state.

    ``adam`` folds weight decay into the gradient (L2 penalty); ``adamw``
    applies it directly to the parameters, decoupled from the moments.
    """

    kind: str
    learning_rate: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("adam", "adamw"):
            raise InputError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise InputError("learning rate must be positive and weight decay nonnegative")

    @classmethod
    def for_model(cls, model, kind, learning_rate, weight_decay=0.0, **kw):
        state = cls(kind, learning_rate, weight_decay, **kw)
        for name, p in model.params().items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state

    def apply(self, params, grads):
        self.step += 1
        t = self.step
        lr, wd = self.learning_rate, self.weight_decay
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in params.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            if m.shape != p.shape:
                raise InputError(f"optimizer state for {name} has shape {m.shape}, parameter {p.shape}")
            if self.kind == "adam" and wd:
                g = g + wd * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.kind == "adamw" and wd:
                p -= lr * wd * p
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


def backward_and_step(model, inputs, targets, loss_kind, optimizer: OptimizerState, rng=None):
    """One update on a batch. Parameters change in place; returns the pre-update loss."""
    if len(inputs) == 0:
        raise InputError("empty batch")
    loss, grads = loss_and_grads(model, inputs, targets, loss_kind, training=True, rng=rng)
    if not math.isfinite(loss):
        raise TrainingDivergenceError(f"non-finite loss {loss}")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(f"non-finite gradient for {name}", parameter=name)
    optimizer.apply(model.params(), grads)
    return loss


def fit(model, inputs, targets, loss_kind, optimizer, epochs, batch_size=32, seed=0,
        callback=None):
    """Minibatch training with a per-epoch shuffle drawn from ``seed``.

    Returns the list of per-epoch mean training losses (each batch loss taken
    before its update, weighted by batch size).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets)
    n = len(inputs)
    if n == 0:
        raise InputError("empty training set")
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            total += backward_and_step(model, inputs[idx], targets[idx], loss_kind,
                                       optimizer, rng) * len(idx)
        history.append(total / n)
        if callback is not None:
            callback(epoch, history[-1])
    return history


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


def model_to_dict(model, seed=None, extra=None):
    if isinstance(model, DenseNet):
        arch = {"kind": "dense", "layer_sizes": model.layer_sizes,
                "hidden_activation": model.hidden_activation,
                "output_activation": model.output_activation}
    elif isinstance(model, LstmNet):
        arch = {"kind": "lstm", "input_size": model.input_size, "hidden_size": model.hidden_size,
                "num_layers": model.num_layers, "num_classes": model.num_classes,
                "inter_layer_dropout": model.inter_layer_dropout}
    else:
        raise InputError(f"unsupported model type {type(model).__name__}")
    params = {name: {"shape": list(p.shape), "data": p.ravel(order="C").tolist()}
              for name, p in model.params().items()}
    return {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "architecture": arch,
            "seed": seed, "parameters": params, "extra": extra or {}}


def model_from_dict(doc):
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise DataError("not a v2vbeam checkpoint (or unsupported version)")
    arch = doc["architecture"]

    def arr(name):
        entry = doc["parameters"][name]
        return np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])

    if arch["kind"] == "dense":
        n = len(arch["layer_sizes"]) - 1
        return DenseNet(arch["layer_sizes"], [arr(f"W{i}") for i in range(n)],
                        [arr(f"b{i}") for i in range(n)],
                        arch["hidden_activation"], arch["output_activation"])
    if arch["kind"] == "lstm":
        L = arch["num_layers"]
        head = DenseNet([arch["hidden_size"], arch["num_classes"]], [arr("head.W0")], [arr("head.b0")])
        return LstmNet(arch["input_size"], arch["hidden_size"],
                       [arr(f"lstm{i}.W") for i in range(L)], [arr(f"lstm{i}.b") for i in range(L)],
                       head, arch["inter_layer_dropout"])
    raise DataError(f"unknown model kind {arch['kind']!r}")


def save_checkpoint(path, model, seed=None, extra=None):
    path = Path(path)
    try:
        path.write_text(json.dumps(model_to_dict(model, seed, extra)))
    except OSError as exc:
        raise DataError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path):
    """Returns ``(model, document)``; the document carries seed and extras."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    return model_from_dict(doc), doc
