"""Quantized arithmetic for approximate multiplier-less MLPs.

A network here is a stack of fully connected layers whose weights are
restricted to signed powers of two (w = s * 2^k), so every multiply is a
wire shift. On top of that, each connection carries a bit mask that is
AND-ed with the incoming activation before the shift; masked-off bits are
hardwired to zero and an all-zero mask removes the summand entirely.

Hidden activations pass through QReLU: clamp(max(0, v) >> r, 0, 2^w - 1).
The output layer produces raw accumulator scores; argmax, ties to the
lowest class id, form the prediction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BitConfig:
    """Bit widths shared by the whole network.

    w_in: input activation width (bits), w_hidden: QReLU output width,
    n_bits: weight resolution (shift exponents k lie in [0, n_bits-1)),
    b_bits: signed bias width. shifts optionally pins the per-hidden-layer
    QReLU shift amounts; None means the static worst-case default.
    """

    w_in: int = 4
    w_hidden: int = 8
    n_bits: int = 8
    b_bits: int = 8
    shifts: tuple[int, ...] | None = None

    def validate(self) -> None:
        if self.w_in < 1 or self.w_hidden < 1:
            raise ValueError("activation widths must be >= 1")
        if self.n_bits < 2:
            raise ValueError("n_bits must be >= 2 (k range would be empty)")
        if self.b_bits < 1:
            raise ValueError("b_bits must be >= 1")


@dataclass(frozen=True)
class ApproxNeuron:
    """One neuron: per-input (mask, sign, shift) plus a signed bias."""

    masks: tuple[int, ...]
    signs: tuple[int, ...]
    shifts: tuple[int, ...]
    bias: int


@dataclass(frozen=True)
class ApproxMlp:
    topology: tuple[int, ...]
    layers: tuple[tuple[ApproxNeuron, ...], ...]
    config: BitConfig


def activation_width(cfg: BitConfig, layer: int) -> int:
    """Width of the activations feeding weight layer `layer` (0-based)."""
    return cfg.w_in if layer == 0 else cfg.w_hidden


def _width_for(neg_mag: int, pos_mag: int) -> int:
    # Smallest W such that [-neg_mag, pos_mag] fits in signed W-bit
    # two's complement.
    w = 1
    while (1 << (w - 1)) < neg_mag or (1 << (w - 1)) - 1 < pos_mag:
        w += 1
    return w


def neuron_acc_width(neuron: ApproxNeuron, w_act: int) -> int:
    """Accumulator width that can never overflow for this neuron.

    Uses the magnitude bound: every live summand can reach m << k, and all
    of them count against both ends of the range, which makes the width
    invariant under flipping every sign. The actual bias value stretches
    the side it lives on.
    """
    s = sum((m << k) for m, k in zip(neuron.masks, neuron.shifts) if m)
    b = neuron.bias
    return _width_for(s + max(-b, 0), s + max(b, 0))


def static_layer_acc_width(fan_in: int, w_act: int, cfg: BitConfig) -> int:
    """Worst-case accumulator width for a layer, independent of weights.

    Assumes all-ones masks, maximal shift and extreme bias; this is what
    the default QReLU scaling is derived from, so it must not depend on
    any particular genome.
    """
    s = fan_in * ((1 << w_act) - 1) << (cfg.n_bits - 2)
    half = 1 << (cfg.b_bits - 1)
    return _width_for(s + half, s + half - 1)


def default_shifts(topology: tuple[int, ...], cfg: BitConfig) -> tuple[int, ...]:
    """Static per-hidden-layer QReLU shifts: max(0, acc_width - w_hidden)."""
    out = []
    for layer in range(len(topology) - 2):
        w_act = activation_width(cfg, layer)
        wacc = static_layer_acc_width(topology[layer], w_act, cfg)
        out.append(max(0, wacc - cfg.w_hidden))
    return tuple(out)


def resolved_shifts(topology: tuple[int, ...], cfg: BitConfig) -> tuple[int, ...]:
    if cfg.shifts is None:
        return default_shifts(topology, cfg)
    if len(cfg.shifts) != len(topology) - 2:
        raise ValueError(
            "config.shifts must have one entry per hidden layer "
            f"({len(topology) - 2}), got {len(cfg.shifts)}"
        )
    return cfg.shifts


def validate_mlp(theta: ApproxMlp) -> None:
    """Check every structural bound; raises ValueError on the first breach."""
    theta.config.validate()
    topo = theta.topology
    if len(topo) < 2:
        raise ValueError("topology needs at least input and output widths")
    if any(n < 1 for n in topo):
        raise ValueError("topology widths must be >= 1")
    if len(theta.layers) != len(topo) - 1:
        raise ValueError("layer count does not match topology")
    kmax = theta.config.n_bits - 2
    bhalf = 1 << (theta.config.b_bits - 1)
    for li, layer in enumerate(theta.layers):
        if len(layer) != topo[li + 1]:
            raise ValueError(f"layer {li} width {len(layer)} != topology {topo[li + 1]}")
        w_act = activation_width(theta.config, li)
        mmax = (1 << w_act) - 1
        for ni, nrn in enumerate(layer):
            if not (len(nrn.masks) == len(nrn.signs) == len(nrn.shifts) == topo[li]):
                raise ValueError(f"neuron {li}/{ni} fan-in does not match topology")
            for m in nrn.masks:
                if not 0 <= m <= mmax:
                    raise ValueError(f"neuron {li}/{ni} mask {m} out of [0, {mmax}]")
            for s in nrn.signs:
                if s not in (-1, 1):
                    raise ValueError(f"neuron {li}/{ni} sign {s} not in {{-1, +1}}")
            for k in nrn.shifts:
                if not 0 <= k <= kmax:
                    raise ValueError(f"neuron {li}/{ni} shift {k} out of [0, {kmax}]")
            if not -bhalf <= nrn.bias <= bhalf - 1:
                raise ValueError(f"neuron {li}/{ni} bias {nrn.bias} out of signed range")


def masked_shift(x: int, m: int, k: int) -> int:
    """The multiplier-less product magnitude: (x AND m) << k."""
    return (x & m) << k


def fold_negations(neuron: ApproxNeuron) -> tuple[tuple[bool, ...], int]:
    """Two's-complement folding of the negative summands.

    Each live s=-1 summand is realized as a bitwise complement at the
    accumulator width; the matching '+1' corrections all fold into the
    bias. Returns (per-input complement flags, bias + negative live count).
    Sum of complements plus the folded constant equals the true signed sum
    modulo 2^acc_width.
    """
    flags = tuple(s == -1 and m != 0 for m, s in zip(neuron.masks, neuron.signs))
    return flags, neuron.bias + sum(flags)


def tree_constant(neuron: ApproxNeuron, width: int) -> int:
    """All constant bits feeding the neuron's adder tree, as one number.

    Complementing a summand at `width` bits turns every position outside
    m << k into a constant 1; those extension bits, the per-negation '+1'
    and the bias fold into a single unsigned width-bit constant.
    """
    full = 1 << width
    k = neuron.bias
    for m, s, sh in zip(neuron.masks, neuron.signs, neuron.shifts):
        if m and s == -1:
            k += full - (m << sh)
    return k % full


def neuron_preact(neuron: ApproxNeuron, xs) -> int:
    """Signed accumulator value: sum of s * ((x & m) << k) plus bias."""
    acc = neuron.bias
    for x, m, s, k in zip(xs, neuron.masks, neuron.signs, neuron.shifts):
        if m:
            acc += s * ((x & m) << k)
    return acc


def qrelu(v: int, r: int, w_out: int) -> int:
    """clamp(max(0, v) >> r, 0, 2^w_out - 1); shift happens after the max."""
    if v < 0:
        return 0
    v >>= r
    top = (1 << w_out) - 1
    return top if v > top else v


def forward(theta: ApproxMlp, x) -> tuple[tuple[int, ...], int]:
    """Single-sample inference. Returns (class scores, predicted class).

    Pure integer arithmetic end to end; ties in the argmax go to the
    lowest class id.
    """
    shifts = resolved_shifts(theta.topology, theta.config)
    acts = tuple(int(v) for v in x)
    if len(acts) != theta.topology[0]:
        raise ValueError(f"expected {theta.topology[0]} inputs, got {len(acts)}")
    top_in = (1 << theta.config.w_in) - 1
    for v in acts:
        if not 0 <= v <= top_in:
            raise ValueError(f"input {v} outside [0, {top_in}]")
    for li, layer in enumerate(theta.layers):
        pre = tuple(neuron_preact(nrn, acts) for nrn in layer)
        if li == len(theta.layers) - 1:
            scores = pre
            break
        acts = tuple(qrelu(v, shifts[li], theta.config.w_hidden) for v in pre)
    best = 0
    for j, sc in enumerate(scores):
        if sc > scores[best]:
            best = j
    return scores, best


def _layer_arrays(layer, fan_in):
    h = len(layer)
    m = np.empty((fan_in, h), dtype=np.int64)
    sg = np.empty((fan_in, h), dtype=np.int64)
    k = np.empty((fan_in, h), dtype=np.int64)
    b = np.empty(h, dtype=np.int64)
    for j, nrn in enumerate(layer):
        m[:, j] = nrn.masks
        sg[:, j] = nrn.signs
        k[:, j] = nrn.shifts
        b[j] = nrn.bias
    return m, sg, k, b


def batch_scores(theta: ApproxMlp, features: np.ndarray) -> np.ndarray:
    """Vectorized forward pass over a (samples, features) int matrix."""
    shifts = resolved_shifts(theta.topology, theta.config)
    acts = features.astype(np.int64, copy=False)
    top = (1 << theta.config.w_hidden) - 1
    last = len(theta.layers) - 1
    for li, layer in enumerate(theta.layers):
        m, sg, k, b = _layer_arrays(layer, theta.topology[li])
        pre = (((acts[:, :, None] & m[None]) << k[None]) * sg[None]).sum(axis=1) + b
        if li == last:
            return pre
        acts = np.minimum(np.maximum(pre, 0) >> shifts[li], top)


def predict_batch(theta: ApproxMlp, features: np.ndarray) -> np.ndarray:
    return np.argmax(batch_scores(theta, features), axis=1)


def accuracy(theta: ApproxMlp, dataset, split: str = "train") -> float:
    """Fraction of correct argmax predictions on the given split."""
    if split == "train":
        idx = dataset.train_idx
    elif split == "test":
        idx = dataset.test_idx
    else:
        raise ValueError(f"unknown split {split!r}")
    feats = dataset.features[idx]
    labels = dataset.labels[idx]
    preds = predict_batch(theta, feats)
    return float(np.mean(preds == labels))


def all_ones_theta(topology: tuple[int, ...], cfg: BitConfig) -> ApproxMlp:
    """The unpruned reference network: every mask all-ones, s=+1, k=0, b=0.

    With k=0 every live bit stacks into the lowest columns, which makes
    this the densest (most expensive) all-ones layout; it serves as the
    deterministic area yardstick.
    """
    layers = []
    for li in range(len(topology) - 1):
        mmax = (1 << activation_width(cfg, li)) - 1
        fan = topology[li]
        layers.append(
            tuple(
                ApproxNeuron((mmax,) * fan, (1,) * fan, (0,) * fan, 0)
                for _ in range(topology[li + 1])
            )
        )
    return ApproxMlp(tuple(topology), tuple(layers), cfg)


def mlp_to_dict(theta: ApproxMlp) -> dict:
    return {
        "version": 1,
        "topology": list(theta.topology),
        "config": {
            "w_in": theta.config.w_in,
            "w_hidden": theta.config.w_hidden,
            "n_bits": theta.config.n_bits,
            "b_bits": theta.config.b_bits,
            "shifts": list(resolved_shifts(theta.topology, theta.config)),
        },
        "layers": [
            [
                {
                    "m": list(n.masks),
                    "s": list(n.signs),
                    "k": list(n.shifts),
                    "b": n.bias,
                }
                for n in layer
            ]
            for layer in theta.layers
        ],
    }


def mlp_from_dict(d: dict) -> ApproxMlp:
    if d.get("version") != 1:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    c = d["config"]
    cfg = BitConfig(
        w_in=c["w_in"],
        w_hidden=c["w_hidden"],
        n_bits=c["n_bits"],
        b_bits=c["b_bits"],
        shifts=tuple(c["shifts"]),
    )
    layers = tuple(
        tuple(
            ApproxNeuron(tuple(n["m"]), tuple(n["s"]), tuple(n["k"]), n["b"])
            for n in layer
        )
        for layer in d["layers"]
    )
    theta = ApproxMlp(tuple(d["topology"]), layers, cfg)
    validate_mlp(theta)
    return theta


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def theta_hash(theta: ApproxMlp) -> str:
    """Stable short identifier for a model, from its canonical JSON."""
    blob = canonical_json(mlp_to_dict(theta)).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
