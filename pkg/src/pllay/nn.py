"""A small fully connected ReLU network trained with softmax cross-entropy.

Enough to train classifiers on top of topological features; no convolutions,
no regularisation. Weights use Glorot-uniform initialisation, biases start at
zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .layer import PLLayLayer, backward_batch, forward_batch


@dataclass
class MlpSpec:
    widths: list
    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError("need at least input and output widths, all >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class MLP:
    def __init__(self, widths, seed=0):
        self.widths = list(widths)
        rng = np.random.default_rng(seed)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self):
        return self.weights + self.biases

    def forward(self, x):
        acts = [np.asarray(x, dtype=float)]
        h = acts[0]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, dout):
        """Gradients ``(dweights + dbiases, dinput)`` for upstream gradient ``dout``."""
        gw, gb = [None] * len(self.weights), [None] * len(self.biases)
        g = dout
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (acts[i + 1] > 0)
            gw[i] = acts[i].T @ g
            gb[i] = g.sum(0)
            g = g @ self.weights[i].T
        return gw + gb, g

    def predict(self, x):
        return np.argmax(self.forward(x)[0], axis=1)

    def to_json(self) -> dict:
        return {"widths": self.widths, "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_json(cls, obj) -> "MLP":
        if isinstance(obj, str):
            obj = json.loads(obj)
        m = cls(obj["widths"])
        m.weights = [np.array(w, dtype=float) for w in obj["weights"]]
        m.biases = [np.array(b, dtype=float) for b in obj["biases"]]
        return m


def softmax_xent(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    g = np.exp(logp)
    g[np.arange(n), labels] -= 1.0
    return float(loss), g / n


class Optimizer:
    def __init__(self, spec: MlpSpec, params):
        self.spec = spec
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        s = self.spec
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            if s.optimizer == "sgd":
                p -= s.lr * g
                continue
            self.m[i] = s.beta1 * self.m[i] + (1 - s.beta1) * g
            self.v[i] = s.beta2 * self.v[i] + (1 - s.beta2) * g * g
            mh = self.m[i] / (1 - s.beta1 ** self.t)
            vh = self.v[i] / (1 - s.beta2 ** self.t)
            p -= s.lr * mh / (np.sqrt(vh) + s.eps)


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    @property
    def last(self):
        return self.rows[-1] if self.rows else {}

    def to_csv(self) -> str:
        lines = ["epoch,loss,train_acc,test_acc"]
        for r in self.rows:
            ta = r.get("test_acc")
            lines.append(",".join([str(r["epoch"]), format(r["loss"], ".17g"), format(r["train_acc"], ".17g"),
                                   "" if ta is None else format(ta, ".17g")]))
        return "\n".join(lines) + "\n"


def accuracy(model, x, y) -> float:
    return float(np.mean(model.predict(x) == np.asarray(y)))


def _check_inputs(features, labels):
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (n, d) with one label per row")
    if len(np.unique(y)) < 2:
        raise ValueError("need at least two classes")
    return x, y


def _loop(spec, n, model, step_fn, evaluate, log):
    """Shared epoch loop: shuffle, mini-batch, log. ``step_fn(idx)`` returns the batch loss."""
    rng = np.random.default_rng(spec.seed + 1)
    for epoch in range(1, spec.epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, spec.batch_size):
            idx = perm[s : s + spec.batch_size]
            loss = step_fn(idx)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch starting {s}")
            total += loss * len(idx)
        train_acc, test_acc = evaluate()
        log.add(epoch=epoch, loss=total / n, train_acc=train_acc, test_acc=test_acc)


def train(spec: MlpSpec, features, labels, test=None):
    """Train an MLP; ``test=(features, labels)`` adds held-out accuracy to the log."""
    x, y = _check_inputs(features, labels)
    widths = list(spec.widths)
    if widths[0] != x.shape[1]:
        raise ValueError(f"input width {widths[0]} != feature width {x.shape[1]}")
    model = MLP(widths, spec.seed)
    opt = Optimizer(spec, model.params)
    log = TrainLog()

    def step(idx):
        out, acts = model.forward(x[idx])
        loss, g = softmax_xent(out, y[idx])
        grads, _ = model.backward(acts, g)
        opt.step(model.params, grads)
        return loss

    def evaluate():
        te = None if test is None else accuracy(model, np.asarray(test[0], dtype=float), test[1])
        return accuracy(model, x, y), te

    _loop(spec, len(y), model, step, evaluate, log)
    return model, log


@dataclass
class PLLayModel:
    layer: PLLayLayer
    mlp: MLP

    def predict_landscapes(self, lms):
        return self.mlp.predict(forward_batch(self.layer, np.asarray(lms, dtype=float))[0])

    def predict(self, inputs, threads: int = 1):
        return self.predict_landscapes(self.layer.featurize(inputs, threads))


def train_with_pllay(layer: PLLayLayer, spec: MlpSpec, inputs, labels, mode: str = "end-to-end",
                     test=None, landscapes=None, test_landscapes=None, train_layer: bool = True,
                     threads: int = 1):
    """Train ``layer`` followed by an MLP whose input width is ``layer.n_h``.

    ``frozen-precompute`` computes the layer features once and trains only the
    MLP. ``end-to-end`` also updates sigma, mu and the omega logits; the
    diagrams themselves do not depend on those parameters, so they are
    prepared once and reused every step. ``train_layer=False`` keeps the
    layer fixed inside the end-to-end loop. Precomputed landscape stacks from
    :meth:`PLLayLayer.featurize` may be passed to skip the featurization.
    """
    if mode not in ("frozen-precompute", "end-to-end"):
        raise ValueError(f"unknown mode {mode!r}")
    y = np.asarray(labels, dtype=np.int64)
    lms = layer.featurize(inputs, threads) if landscapes is None else np.asarray(landscapes, dtype=float)
    test_lms = None
    if test is not None:
        test_lms = layer.featurize(test[0], threads) if test_landscapes is None else np.asarray(test_landscapes)
    widths = list(spec.widths)
    widths[0] = layer.n_h
    spec = MlpSpec(widths, spec.optimizer, spec.lr, spec.batch_size, spec.epochs, spec.seed,
                   spec.beta1, spec.beta2, spec.eps)

    if mode == "frozen-precompute":
        feats = forward_batch(layer, lms)[0]
        tf = None if test is None else (forward_batch(layer, test_lms)[0], test[1])
        mlp, log = train(spec, feats, y, tf)
        return PLLayModel(layer, mlp), log

    _check_inputs(np.zeros((len(y), 1)), y)
    mlp = MLP(widths, spec.seed)
    layer_params = [layer.sigma, layer.mu, layer.logits]
    opt = Optimizer(spec, mlp.params)
    lopt = Optimizer(spec, layer_params)
    log = TrainLog()

    def step(idx):
        s, ctx = forward_batch(layer, lms[idx])
        out, acts = mlp.forward(s)
        loss, g = softmax_xent(out, y[idx])
        grads, ds = mlp.backward(acts, g)
        opt.step(mlp.params, grads)
        if train_layer:
            lopt.step([layer.sigma, layer.mu, layer.logits], list(backward_batch(layer, ctx, ds)))
        return loss

    def evaluate():
        tr = float(np.mean(mlp.predict(forward_batch(layer, lms)[0]) == y))
        te = None
        if test is not None:
            te = float(np.mean(mlp.predict(forward_batch(layer, test_lms)[0]) == np.asarray(test[1])))
        return tr, te

    _loop(spec, len(y), mlp, step, evaluate, log)
    return PLLayModel(layer, mlp), log
