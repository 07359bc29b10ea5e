"""FA-count area model for the masked shift-add neurons.

Area of a neuron is the number of full adders a carry-save tree needs to
compress its live summand bits (plus folded constant ones) down to at most
two bits per column. The final two-row carry-propagate adder is not part
of the figure; it is reported separately by the netlist builder.
"""

from __future__ import annotations

from .qarith import (
    ApproxMlp,
    ApproxNeuron,
    activation_width,
    all_ones_theta,
    neuron_acc_width,
    tree_constant,
)


def column_profile(neuron: ApproxNeuron, w_act: int) -> list[int]:
    """Live bits per accumulator column, trailing zero columns trimmed.

    Every set mask bit p of a live summand lands in column p + k. Negative
    summands are charged like positive ones (inverters are free); their
    two's-complement corrections and the bias fold into one constant whose
    set bits occupy one slot each.
    """
    width = neuron_acc_width(neuron, w_act)
    counts = [0] * width
    for m, k in zip(neuron.masks, neuron.shifts):
        if not m:
            continue
        p = 0
        while m:
            if m & 1:
                counts[p + k] += 1
            m >>= 1
            p += 1
    konst = tree_constant(neuron, width)
    p = 0
    while konst:
        if konst & 1:
            counts[p] += 1
        konst >>= 1
        p += 1
    while counts and counts[-1] == 0:
        counts.pop()
    return counts


def fa_count(profile) -> int:
    """Full adders used by repeated 3:2 reduction of a column profile.

    Per pass every column with c bits consumes floor(c/3) FAs, each eating
    3 bits and dropping 1 sum bit back in place plus 1 carry into the next
    column; passes repeat until every column holds at most 2 bits.
    """
    counts = list(profile)
    total = 0
    while any(c > 2 for c in counts):
        carries = [0] * (len(counts) + 1)
        for c, n in enumerate(counts):
            fas = n // 3
            if fas:
                total += fas
                counts[c] = n - 2 * fas
                carries[c + 1] = fas
        if carries[-1]:
            counts.append(0)
        for c, extra in enumerate(carries):
            if extra and c < len(counts):
                counts[c] += extra
    return total


def neuron_fa(neuron: ApproxNeuron, w_act: int) -> int:
    return fa_count(column_profile(neuron, w_act))


def mlp_area(theta: ApproxMlp) -> int:
    """Total reduction-FA count over every neuron in every layer."""
    area = 0
    for li, layer in enumerate(theta.layers):
        w_act = activation_width(theta.config, li)
        for nrn in layer:
            area += neuron_fa(nrn, w_act)
    return area


def reference_area(topology, cfg) -> int:
    """Area of the unpruned all-ones-mask network (the 100% yardstick)."""
    return mlp_area(all_ones_theta(tuple(topology), cfg))
