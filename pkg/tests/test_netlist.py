import itertools

import numpy as np
import pytest

from axgen import areamodel as am
from axgen import netlist as nl
from axgen.qarith import (
    ApproxMlp,
    ApproxNeuron,
    BitConfig,
    all_ones_theta,
    forward,
    neuron_acc_width,
)


def random_theta(rng, topology, cfg):
    from axgen.evolver import build_layout, decode

    lay = build_layout(tuple(topology), cfg)
    return decode(rng.integers(lay.lo, lay.hi + 1), tuple(topology), cfg)


SMALL = BitConfig(w_in=3, w_hidden=6, n_bits=8)


class TestNetlistContainer:
    def test_wire_single_driver_enforced(self):
        net = nl.Netlist()
        w = net.new_wire()
        net.nodes.append(nl.Node("CONST0", (), (w,)))
        net.nodes.append(nl.Node("CONST1", (), (w,)))
        with pytest.raises(RuntimeError, match="two drivers"):
            net.validate()

    def test_unknown_kind_rejected(self):
        net = nl.Netlist()
        net.add("XOR", (), n_out=1)
        with pytest.raises(RuntimeError, match="kind"):
            net.validate()

    def test_undriven_input_rejected(self):
        net = nl.Netlist()
        w = net.new_wire()
        net.add("NOT", (w,), n_out=1)
        with pytest.raises(RuntimeError, match="undriven"):
            net.validate()

    def test_constants_shared(self):
        net = nl.Netlist()
        assert net.const0() == net.const0()
        assert net.const1() == net.const1()
        assert net.const0() != net.const1()


class TestBuild:
    def test_valid_and_counts_recorded(self):
        rng = np.random.default_rng(71)
        theta = random_theta(rng, (3, 2, 2), SMALL)
        net = nl.build(theta)
        net.validate()
        meta = net.meta
        assert meta["fa_count_reduction"] == net.count("FA", role="reduce")
        assert meta["fa_count_final_adder"] == net.count("FA", role="final")
        assert meta["fa_count_qrelu"] == net.count("FA", role="qrelu")
        assert meta["ha_count_final_adder"] == net.count("HA")
        assert meta["not_count"] == net.count("NOT")

    def test_reduction_count_matches_area_model(self):
        rng = np.random.default_rng(72)
        for _ in range(15):
            theta = random_theta(rng, (4, 3, 2), BitConfig(w_in=4))
            net = nl.build(theta)
            assert net.meta["fa_count_reduction"] == am.mlp_area(theta)

    def test_ha_only_in_final_stage(self):
        rng = np.random.default_rng(73)
        theta = random_theta(rng, (4, 2, 2), BitConfig(w_in=4))
        net = nl.build(theta)
        for node in net.nodes:
            if node.kind == "HA":
                assert node.role == "final"
            if node.kind == "FA":
                assert node.role in ("reduce", "final", "qrelu")
            if node.kind == "NOT":
                assert node.role in ("neg", "qrelu")

    def test_qrelu_gates_lean_on_constant_inputs(self):
        # AND = carry(a, b, 0), OR = carry(a, b, 1)
        rng = np.random.default_rng(74)
        theta = random_theta(rng, (3, 2, 2), SMALL)
        net = nl.build(theta)
        c0, c1 = net.const0(), net.const1()
        for node in net.nodes:
            if node.kind == "FA" and node.role == "qrelu":
                assert node.ins[2] in (c0, c1)

    def test_output_width_matches_acc_width(self):
        rng = np.random.default_rng(75)
        theta = random_theta(rng, (3, 2, 2), SMALL)
        net = nl.build(theta)
        for j, (wires, width) in enumerate(net.outputs):
            nrn = theta.layers[-1][j]
            assert width == neuron_acc_width(nrn, SMALL.w_hidden)
            assert len(wires) == width

    def test_all_dead_model_builds_empty_logic(self):
        zero = ApproxNeuron((0, 0, 0), (1, 1, 1), (0, 0, 0), 0)
        out = ApproxNeuron((0, 0), (1, 1), (0, 0), 0)
        theta = ApproxMlp((3, 2, 2), ((zero, zero), (out, out)), SMALL)
        net = nl.build(theta)
        assert net.count("FA") == 0
        assert net.count("HA") == 0
        scores = nl.simulate(net, np.array([0, 1, 2]))
        assert scores.tolist() == [0, 0]

    def test_bias_only_neuron_passes_constant_through(self):
        # no arithmetic needed; the bias pattern shows up in the score
        hidden = ApproxNeuron((7, 0, 0), (1, 1, 1), (0, 0, 0), 0)
        out_a = ApproxNeuron((0, 0), (1, 1), (0, 0), 5)
        out_b = ApproxNeuron((0, 0), (1, 1), (0, 0), -3)
        theta = ApproxMlp((3, 2, 2), ((hidden, hidden), (out_a, out_b)), SMALL)
        net = nl.build(theta)
        scores = nl.simulate(net, np.array([0, 0, 0]))
        assert scores.tolist() == [5, -3]


class TestSimulate:
    def test_matches_forward_exhaustively(self):
        rng = np.random.default_rng(76)
        xs = np.array(list(itertools.product(range(8), repeat=3)), dtype=np.int64)
        for _ in range(12):
            theta = random_theta(rng, (3, 2, 2), SMALL)
            net = nl.build(theta)
            got = nl.simulate(net, xs)
            want = np.array([forward(theta, tuple(map(int, x)))[0] for x in xs])
            assert np.array_equal(got, want)

    def test_single_sample_shape(self):
        theta = all_ones_theta((3, 2, 2), SMALL)
        net = nl.build(theta)
        scores = nl.simulate(net, np.array([1, 2, 3]))
        assert scores.shape == (2,)
        assert scores.tolist() == list(forward(theta, (1, 2, 3))[0])

    def test_input_validation(self):
        theta = all_ones_theta((3, 2, 2), SMALL)
        net = nl.build(theta)
        with pytest.raises(ValueError):
            nl.simulate(net, np.array([8, 0, 0]))  # 3-bit inputs
        with pytest.raises(ValueError):
            nl.simulate(net, np.array([0, 0]))  # wrong arity


class TestEmit:
    def test_byte_deterministic_across_builds(self):
        rng = np.random.default_rng(77)
        theta = random_theta(rng, (3, 2, 2), SMALL)
        a = nl.emit_hdl(nl.build(theta))
        b = nl.emit_hdl(nl.build(theta))
        assert a == b

    def test_structure(self):
        theta = all_ones_theta((3, 2, 2), SMALL)
        net = nl.build(theta)
        text = nl.emit_hdl(net, module_name="dut")
        assert text.count("module dut") == 1
        assert text.count("module fa_cell") == 1
        assert text.count("module ha_cell") == 1
        assert "endmodule" in text
        for i in range(3):
            assert f"input [2:0] x{i}" in text
        for j, (_, width) in enumerate(net.outputs):
            assert f"output [{width - 1}:0] score{j}" in text
        # one instance line per arithmetic node
        assert text.count("fa_cell u") == net.count("FA")
        assert text.count("ha_cell u") == net.count("HA")
        assert "$display" not in text  # gates only

    def test_no_timestamps(self):
        theta = all_ones_theta((3, 2, 2), SMALL)
        text = nl.emit_hdl(nl.build(theta))
        import re

        assert not re.search(r"\b20\d\d-\d\d-\d\d\b", text)

    def test_sidecar_dict(self):
        theta = all_ones_theta((3, 2, 2), SMALL)
        net = nl.build(theta)
        d = nl.net_to_dict(net)
        assert d["meta"]["fa_count_reduction"] == net.count("FA", role="reduce")
        assert len(d["nodes"]) == len(net.nodes)
        assert d["n_wires"] == net.n_wires
