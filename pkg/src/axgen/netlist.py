"""Structural netlist builder, bit-true simulator and Verilog emitter.

Every neuron becomes a carry-save adder tree over its live summand bits:
negative summands turn into bitwise complements (free inverters) with the
'+1' corrections and complement extension bits folded into one constant,
the tree is compressed 3:2 until no column holds more than two bits, and a
ripple carry-propagate stage produces the accumulator value. Hidden
accumulators feed QReLU clamp/shift wiring; output accumulators leave the
module as raw signed scores.

Node kinds are restricted to {FA, HA, NOT, CONST0, CONST1, INPUT, OUTPUT}.
QReLU needs AND/OR, which an FA provides through its carry when one input
is constant, so activation logic is FA/NOT based too; those FAs carry the
role "qrelu" and are never mixed into the reduction or final-adder counts.
HA nodes appear only in the final ripple stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qarith import (
    ApproxMlp,
    ApproxNeuron,
    activation_width,
    fold_negations,
    neuron_acc_width,
    resolved_shifts,
    theta_hash,
    tree_constant,
    validate_mlp,
)

# re-exported under the names the rest of the toolchain uses
acc_width = neuron_acc_width

KINDS = ("FA", "HA", "NOT", "CONST0", "CONST1", "INPUT", "OUTPUT")


@dataclass
class Node:
    kind: str
    ins: tuple[int, ...]
    outs: tuple[int, ...]
    role: str = ""
    tag: str = ""


@dataclass
class Netlist:
    nodes: list[Node] = field(default_factory=list)
    n_wires: int = 0
    # input_wires[feature][bit] -> wire id, outputs: per class (wires, width)
    input_wires: list[list[int]] = field(default_factory=list)
    outputs: list[tuple[list[int], int]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    _const0: int | None = None
    _const1: int | None = None

    def new_wire(self) -> int:
        w = self.n_wires
        self.n_wires += 1
        return w

    def add(self, kind, ins=(), n_out=1, role="", tag="") -> tuple[int, ...]:
        outs = tuple(self.new_wire() for _ in range(n_out))
        self.nodes.append(Node(kind, tuple(ins), outs, role, tag))
        return outs

    def const0(self) -> int:
        if self._const0 is None:
            (self._const0,) = self.add("CONST0")
        return self._const0

    def const1(self) -> int:
        if self._const1 is None:
            (self._const1,) = self.add("CONST1")
        return self._const1

    def inv(self, w: int, role: str, tag: str = "") -> int:
        (out,) = self.add("NOT", (w,), role=role, tag=tag)
        return out

    def fa(self, a, b, c, role, tag="") -> tuple[int, int]:
        s, co = self.add("FA", (a, b, c), n_out=2, role=role, tag=tag)
        return s, co

    def ha(self, a, b, role, tag="") -> tuple[int, int]:
        s, co = self.add("HA", (a, b), n_out=2, role=role, tag=tag)
        return s, co

    def and2(self, a, b, tag="") -> int:
        _, co = self.fa(a, b, self.const0(), role="qrelu", tag=tag)
        return co

    def or2(self, a, b, tag="") -> int:
        _, co = self.fa(a, b, self.const1(), role="qrelu", tag=tag)
        return co

    def validate(self) -> None:
        """Single driver per wire, no forward references, known kinds."""
        driven = [False] * self.n_wires
        for idx, node in enumerate(self.nodes):
            if node.kind not in KINDS:
                raise RuntimeError(f"node {idx}: unknown kind {node.kind!r}")
            for w in node.ins:
                if not (0 <= w < self.n_wires) or not driven[w]:
                    raise RuntimeError(
                        f"node {idx} ({node.kind}) reads undriven wire {w}; "
                        "combinational loop or builder bug"
                    )
            for w in node.outs:
                if driven[w]:
                    raise RuntimeError(f"wire {w} has two drivers")
                driven[w] = True

    def count(self, kind: str, role: str | None = None) -> int:
        return sum(
            1
            for n in self.nodes
            if n.kind == kind and (role is None or n.role == role)
        )


def _mask_bits(m: int):
    p = 0
    while m:
        if m & 1:
            yield p
        m >>= 1
        p += 1


def _build_neuron(net: Netlist, nrn: ApproxNeuron, acts, w_act: int, tag: str):
    """Adder tree for one neuron; returns (accumulator wires, stats)."""
    width = neuron_acc_width(nrn, w_act)
    flags, folded_bias = fold_negations(nrn)
    konst = tree_constant(nrn, width)

    cols: list[list[int]] = [[] for _ in range(width)]
    for i, (m, k, neg) in enumerate(zip(nrn.masks, nrn.shifts, flags)):
        if not nrn.masks[i]:
            continue
        for p in _mask_bits(m):
            src = acts[i][p]
            if neg:
                src = net.inv(src, role="neg", tag=tag)
            cols[p + k].append(src)
    for p in _mask_bits(konst):
        cols[p].append(net.const1())

    # 3:2 reduction, pass by pass, bits taken oldest first. Carries above
    # the accumulator width keep reducing (the simulation oracle has no
    # width cap) but never reach the ripple stage: dropping them is the
    # two's-complement wraparound.
    fa_reduce = 0
    while any(len(c) > 2 for c in cols):
        nxt: list[list[int]] = [[] for _ in range(len(cols) + 1)]
        for c, bits in enumerate(cols):
            groups = len(bits) // 3
            for g in range(groups):
                a, b, d = bits[3 * g : 3 * g + 3]
                s, co = net.fa(a, b, d, role="reduce", tag=tag)
                nxt[c].append(s)
                nxt[c + 1].append(co)
            nxt[c].extend(bits[3 * groups :])
            fa_reduce += groups
        while nxt and not nxt[-1]:
            nxt.pop()
        cols = nxt

    # final ripple stage over the accumulator columns only
    fa_final = ha_final = 0
    result: list[int] = []
    carry: int | None = None
    for c in range(width):
        avail = list(cols[c]) if c < len(cols) else []
        if carry is not None:
            avail.append(carry)
        if len(avail) == 3:
            s, co = net.fa(*avail, role="final", tag=tag)
            result.append(s)
            carry = co
            fa_final += 1
        elif len(avail) == 2:
            s, co = net.ha(*avail, role="final", tag=tag)
            result.append(s)
            carry = co
            ha_final += 1
        elif len(avail) == 1:
            result.append(avail[0])
            carry = None
        else:
            result.append(net.const0())
            carry = None

    stats = {
        "acc_width": width,
        "folded_bias": folded_bias,
        "fa_reduce": fa_reduce,
        "fa_final": fa_final,
        "ha_final": ha_final,
    }
    return result, stats


def _build_qrelu(net: Netlist, acc: list[int], r: int, w_out: int, tag: str):
    """Clamp/shift wiring: out = clamp(max(0, acc) >> r, 0, 2^w_out - 1)."""
    width = len(acc)
    sign = acc[width - 1]
    not_sign = net.inv(sign, role="qrelu", tag=tag)
    overflow = None
    for p in range(r + w_out, width - 1):
        overflow = acc[p] if overflow is None else net.or2(overflow, acc[p], tag)
    out = []
    for j in range(w_out):
        p = j + r
        src = acc[p] if p <= width - 2 else None
        if src is not None and overflow is not None:
            out.append(net.and2(not_sign, net.or2(src, overflow, tag), tag))
        elif src is not None:
            out.append(net.and2(not_sign, src, tag))
        elif overflow is not None:
            out.append(net.and2(not_sign, overflow, tag))
        else:
            out.append(net.const0())
    return out


def build(theta: ApproxMlp) -> Netlist:
    """Structural netlist for the whole network, deterministic node order."""
    validate_mlp(theta)
    cfg = theta.config
    shifts = resolved_shifts(theta.topology, cfg)
    net = Netlist()

    acts = []
    for i in range(theta.topology[0]):
        bits = []
        for b in range(cfg.w_in):
            (w,) = net.add("INPUT", tag=f"x{i}b{b}")
            bits.append(w)
        acts.append(bits)
    net.input_wires = [list(b) for b in acts]

    per_neuron = []
    last = len(theta.layers) - 1
    for li, layer in enumerate(theta.layers):
        w_act = activation_width(cfg, li)
        nxt_acts = []
        for nj, nrn in enumerate(layer):
            tag = f"l{li}n{nj}"
            acc, stats = _build_neuron(net, nrn, acts, w_act, tag)
            stats.update(layer=li, neuron=nj)
            per_neuron.append(stats)
            if li == last:
                for p, w in enumerate(acc):
                    net.add("OUTPUT", (w,), n_out=0, tag=f"s{nj}b{p}")
                net.outputs.append((list(acc), len(acc)))
            else:
                nxt_acts.append(_build_qrelu(net, acc, shifts[li], cfg.w_hidden, tag))
        acts = nxt_acts

    net.meta = {
        "theta_hash": theta_hash(theta),
        "topology": list(theta.topology),
        "w_in": cfg.w_in,
        "w_hidden": cfg.w_hidden,
        "n_bits": cfg.n_bits,
        "b_bits": cfg.b_bits,
        "shifts": list(shifts),
        "fa_count_reduction": net.count("FA", "reduce"),
        "fa_count_final_adder": net.count("FA", "final"),
        "fa_count_qrelu": net.count("FA", "qrelu"),
        "ha_count_final_adder": net.count("HA", "final"),
        "not_count": net.count("NOT"),
        "per_neuron": per_neuron,
    }
    net.validate()
    return net


def simulate(net: Netlist, x) -> np.ndarray:
    """Gate-level evaluation. x is one input vector or a (samples, features)
    matrix of quantized activations; returns signed class scores with the
    same leading shape."""
    arr = np.asarray(x, dtype=np.int64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    n_feat = len(net.input_wires)
    if arr.shape[1] != n_feat:
        raise ValueError(f"expected {n_feat} features, got {arr.shape[1]}")
    w_in = net.meta["w_in"]
    if arr.min(initial=0) < 0 or arr.max(initial=0) >= (1 << w_in):
        raise ValueError(f"inputs must lie in [0, {1 << w_in})")

    n_s = arr.shape[0]
    values: list = [None] * net.n_wires
    zeros = np.zeros(n_s, dtype=np.int64)
    ones = np.ones(n_s, dtype=np.int64)
    feat_bit = {}
    for i, bits in enumerate(net.input_wires):
        for b, w in enumerate(bits):
            feat_bit[w] = (i, b)

    for idx, node in enumerate(net.nodes):
        for w in node.ins:
            if values[w] is None:
                raise RuntimeError(f"node {idx} reads unevaluated wire {w}")
        if node.kind == "INPUT":
            i, b = feat_bit[node.outs[0]]
            values[node.outs[0]] = (arr[:, i] >> b) & 1
        elif node.kind == "CONST0":
            values[node.outs[0]] = zeros
        elif node.kind == "CONST1":
            values[node.outs[0]] = ones
        elif node.kind == "NOT":
            values[node.outs[0]] = values[node.ins[0]] ^ 1
        elif node.kind == "FA":
            a, b, c = (values[w] for w in node.ins)
            values[node.outs[0]] = a ^ b ^ c
            values[node.outs[1]] = (a & b) | (a & c) | (b & c)
        elif node.kind == "HA":
            a, b = (values[w] for w in node.ins)
            values[node.outs[0]] = a ^ b
            values[node.outs[1]] = a & b
        # OUTPUT nodes only mark wires; scores are assembled below

    scores = np.empty((n_s, len(net.outputs)), dtype=np.int64)
    for j, (wires, width) in enumerate(net.outputs):
        v = np.zeros(n_s, dtype=np.int64)
        for p, w in enumerate(wires):
            v |= values[w] << p
        # sign bit decides two's-complement reinterpretation
        v -= (v >> (width - 1)) << width
        scores[:, j] = v
    return scores[0] if single else scores


_FA_CELL = """module fa_cell(input a, input b, input cin, output s, output co);
  wire axb, ab, axb_c;
  xor g1(axb, a, b);
  xor g2(s, axb, cin);
  and g3(ab, a, b);
  and g4(axb_c, axb, cin);
  or  g5(co, ab, axb_c);
endmodule
"""

_HA_CELL = """module ha_cell(input a, input b, output s, output co);
  xor g1(s, a, b);
  and g2(co, a, b);
endmodule
"""


def emit_hdl(net: Netlist, module_name: str = "axgen_top") -> str:
    """Structural Verilog-2001 for the netlist; byte-deterministic."""
    meta = net.meta
    name = {}
    for i, bits in enumerate(net.input_wires):
        for b, w in enumerate(bits):
            name[w] = f"x{i}[{b}]"

    lines = []
    lines.append(f"// {module_name}: approximate shift-add MLP classifier")
    lines.append(f"// model hash: {meta['theta_hash']}")
    lines.append(
        "// topology: {} w_in={} w_hidden={} n_bits={} b_bits={} shifts={}".format(
            "-".join(str(t) for t in meta["topology"]),
            meta["w_in"],
            meta["w_hidden"],
            meta["n_bits"],
            meta["b_bits"],
            ",".join(str(s) for s in meta["shifts"]),
        )
    )
    lines.append(
        "// reduction FAs: {} final-adder FAs: {} qrelu FAs: {} HAs: {} NOTs: {}".format(
            meta["fa_count_reduction"],
            meta["fa_count_final_adder"],
            meta["fa_count_qrelu"],
            meta["ha_count_final_adder"],
            meta["not_count"],
        )
    )
    lines.append("")
    lines.append(_FA_CELL)
    lines.append(_HA_CELL)

    ports = []
    for i in range(len(net.input_wires)):
        ports.append(f"  input [{meta['w_in'] - 1}:0] x{i}")
    for j, (_, width) in enumerate(net.outputs):
        ports.append(f"  output [{width - 1}:0] score{j}")
    lines.append(f"module {module_name}(")
    lines.append(",\n".join(ports))
    lines.append(");")

    internal = [w for w in range(net.n_wires) if w not in name]
    for w in internal:
        name[w] = f"w{w}"
    if internal:
        # chunked declarations keep lines readable for wide nets
        for start in range(0, len(internal), 20):
            chunk = internal[start : start + 20]
            lines.append("  wire " + ", ".join(f"w{w}" for w in chunk) + ";")

    for idx, node in enumerate(net.nodes):
        tag = f" // {node.tag}" if node.tag else ""
        if node.kind == "INPUT":
            continue
        if node.kind == "CONST0":
            lines.append(f"  assign {name[node.outs[0]]} = 1'b0;")
        elif node.kind == "CONST1":
            lines.append(f"  assign {name[node.outs[0]]} = 1'b1;")
        elif node.kind == "NOT":
            lines.append(f"  not u{idx}({name[node.outs[0]]}, {name[node.ins[0]]});{tag}")
        elif node.kind == "FA":
            a, b, c = (name[w] for w in node.ins)
            s, co = (name[w] for w in node.outs)
            lines.append(
                f"  fa_cell u{idx}(.a({a}), .b({b}), .cin({c}), .s({s}), .co({co}));{tag}"
            )
        elif node.kind == "HA":
            a, b = (name[w] for w in node.ins)
            s, co = (name[w] for w in node.outs)
            lines.append(f"  ha_cell u{idx}(.a({a}), .b({b}), .s({s}), .co({co}));{tag}")
        # OUTPUT handled via assigns below

    for j, (wires, _) in enumerate(net.outputs):
        for p, w in enumerate(wires):
            lines.append(f"  assign score{j}[{p}] = {name[w]};")
    lines.append("endmodule")
    lines.append("")
    return "\n".join(lines)


def net_to_dict(net: Netlist) -> dict:
    """Sidecar description of the netlist (metadata plus node listing)."""
    return {
        "version": 1,
        "meta": net.meta,
        "n_wires": net.n_wires,
        "nodes": [
            {
                "id": i,
                "kind": n.kind,
                "ins": list(n.ins),
                "outs": list(n.outs),
                "role": n.role,
                "tag": n.tag,
            }
            for i, n in enumerate(net.nodes)
        ],
        "inputs": [list(b) for b in net.input_wires],
        "outputs": [{"wires": list(w), "width": wd} for w, wd in net.outputs],
    }
