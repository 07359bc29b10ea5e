"""Constrained bi-objective NSGA-II over (train error, FA area).

Individuals are flat integer genomes: per layer, per neuron, per input the
triple (mask, sign, shift), then the neuron bias. Feasibility means the
train accuracy stays within 10 percentage points of the configured
baseline; constrained domination makes every feasible individual outrank
every infeasible one, and smaller bound violation wins among the
infeasible. An archive accumulates every feasible non-dominated individual
ever seen.

All stochastic choices draw from per-generation streams keyed by
(seed, generation, slot), so results never depend on evaluation order or
thread scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import areamodel
from .qarith import (
    ApproxMlp,
    ApproxNeuron,
    BitConfig,
    activation_width,
    predict_batch,
)

# accuracy may drop at most this far below the configured baseline
LOSS_BOUND = 0.10

# reference baselines (plain float accuracy) and topologies
BASELINE_ACCURACY = {
    "breast_cancer": 0.980,
    "cardio": 0.881,
    "pendigits": 0.937,
    "redwine": 0.564,
    "whitewine": 0.537,
}
TOPOLOGY = {
    "breast_cancer": (10, 3, 2),
    "cardio": (21, 3, 3),
    "pendigits": (16, 5, 10),
    "redwine": (11, 2, 6),
    "whitewine": (11, 4, 7),
}

KIND_MASK, KIND_SIGN, KIND_SHIFT, KIND_BIAS = 0, 1, 2, 3


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 1000
    mutation_prob: float = 0.2
    crossover_prob: float = 0.7
    dope_fraction: float = 0.10
    seed: int = 0
    baseline_accuracy: float = 1.0

    def validate(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("mutation_prob", "crossover_prob", "dope_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.baseline_accuracy <= 1.0:
            raise ValueError("baseline_accuracy must lie in (0, 1]")


@dataclass(frozen=True)
class Fitness:
    error: float
    area: int
    feasible: bool
    violation: float


class GenomeLayout:
    """Gene bookkeeping for one (topology, bit config) pair."""

    def __init__(self, topology: tuple[int, ...], cfg: BitConfig):
        cfg.validate()
        if len(topology) < 2:
            raise ValueError("topology needs at least two widths")
        self.topology = topology
        self.cfg = cfg
        kinds, lo, hi, maskw = [], [], [], []
        group_starts = [0]
        kmax = cfg.n_bits - 2
        bhalf = 1 << (cfg.b_bits - 1)
        for li in range(len(topology) - 1):
            w_act = activation_width(cfg, li)
            mtop = (1 << w_act) - 1
            for _ in range(topology[li + 1]):
                for _ in range(topology[li]):
                    kinds += [KIND_MASK, KIND_SIGN, KIND_SHIFT]
                    lo += [0, 0, 0]
                    hi += [mtop, 1, kmax]
                    maskw += [w_act, 0, 0]
                    group_starts.append(len(kinds))
                kinds.append(KIND_BIAS)
                lo.append(-bhalf)
                hi.append(bhalf - 1)
                maskw.append(0)
                group_starts.append(len(kinds))
        self.kind = np.array(kinds, dtype=np.int8)
        self.lo = np.array(lo, dtype=np.int64)
        self.hi = np.array(hi, dtype=np.int64)
        self.maskw = np.array(maskw, dtype=np.int64)
        # group_starts[i] is where group i begins; valid crossover cuts are
        # the interior boundaries group_starts[1..n_groups-1]
        self.group_starts = np.array(group_starts[:-1], dtype=np.int64)
        self.n_groups = len(self.group_starts)
        self.length = len(kinds)

    def expected_length(self) -> int:
        t = self.topology
        return 3 * sum(t[i] * t[i + 1] for i in range(len(t) - 1)) + sum(t[1:])


@lru_cache(maxsize=32)
def build_layout(topology: tuple[int, ...], cfg: BitConfig) -> GenomeLayout:
    return GenomeLayout(topology, cfg)


def encode(theta: ApproxMlp) -> np.ndarray:
    genes = []
    for layer in theta.layers:
        for nrn in layer:
            for m, s, k in zip(nrn.masks, nrn.signs, nrn.shifts):
                genes += [m, 1 if s == 1 else 0, k]
            genes.append(nrn.bias)
    return np.array(genes, dtype=np.int64)


def decode(genes, topology: tuple[int, ...], cfg: BitConfig) -> ApproxMlp:
    """Inverse of encode; raises ValueError on any out-of-bounds gene."""
    layout = build_layout(tuple(topology), cfg)
    g = np.asarray(genes, dtype=np.int64)
    if g.shape != (layout.length,):
        raise ValueError(f"expected {layout.length} genes, got {g.shape}")
    bad = np.nonzero((g < layout.lo) | (g > layout.hi))[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"gene {i} value {int(g[i])} outside [{int(layout.lo[i])}, {int(layout.hi[i])}]"
        )
    layers = []
    pos = 0
    for li in range(len(topology) - 1):
        fan, width = topology[li], topology[li + 1]
        neurons = []
        for _ in range(width):
            w = g[pos : pos + 3 * fan].reshape(fan, 3)
            bias = int(g[pos + 3 * fan])
            pos += 3 * fan + 1
            neurons.append(
                ApproxNeuron(
                    tuple(int(v) for v in w[:, 0]),
                    tuple(1 if v else -1 for v in w[:, 1]),
                    tuple(int(v) for v in w[:, 2]),
                    bias,
                )
            )
        layers.append(tuple(neurons))
    return ApproxMlp(tuple(topology), tuple(layers), cfg)


def _rng(seed: int, gen: int, slot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, gen, slot)))


def init_population(layout: GenomeLayout, cfg: GaConfig) -> np.ndarray:
    """Uniform random genomes; the last round(dope*N) get all-ones masks."""
    n = cfg.population_size
    pop = np.empty((n, layout.length), dtype=np.int64)
    for i in range(n):
        r = _rng(cfg.seed, 0, i)
        pop[i] = r.integers(layout.lo, layout.hi + 1)
    doped = int(cfg.dope_fraction * n + 0.5)
    if doped:
        mask_genes = layout.kind == KIND_MASK
        pop[n - doped :, mask_genes] = layout.hi[mask_genes]
    return pop


def mutate(genes: np.ndarray, p: float, layout: GenomeLayout, rng) -> None:
    """In place, per gene with probability p: masks flip one uniformly
    chosen bit, signs flip, shifts and biases resample uniformly."""
    sel = rng.random(layout.length) < p
    mk = sel & (layout.kind == KIND_MASK)
    if mk.any():
        bit = rng.integers(0, layout.maskw[mk])
        genes[mk] ^= np.int64(1) << bit
    sg = sel & (layout.kind == KIND_SIGN)
    genes[sg] ^= 1
    rs = sel & ((layout.kind == KIND_SHIFT) | (layout.kind == KIND_BIAS))
    if rs.any():
        genes[rs] = rng.integers(layout.lo[rs], layout.hi[rs] + 1)


def crossover(a: np.ndarray, b: np.ndarray, layout: GenomeLayout, rng):
    """Single-point crossover at a uniformly chosen group boundary; never
    splits a (mask, sign, shift) triple. Returns two children."""
    gi = int(rng.integers(1, layout.n_groups))
    cut = int(layout.group_starts[gi])
    c1 = np.concatenate([a[:cut], b[cut:]])
    c2 = np.concatenate([b[:cut], a[cut:]])
    return c1, c2


def evaluate(theta: ApproxMlp, dataset, cfg: GaConfig) -> Fitness:
    """Train-split error, FA area and the 10-point feasibility verdict."""
    feats = dataset.features[dataset.train_idx]
    labels = dataset.labels[dataset.train_idx]
    return _fitness_from(theta, feats, labels, cfg.baseline_accuracy)


def _fitness_from(theta, feats, labels, baseline) -> Fitness:
    acc = float(np.mean(predict_batch(theta, feats) == labels))
    area = areamodel.mlp_area(theta)
    bound = baseline - LOSS_BOUND
    return Fitness(1.0 - acc, area, acc >= bound, max(0.0, bound - acc))


def _eval_many(pop, layout, feats, labels, baseline, threads):
    def one(i):
        theta = decode(pop[i], layout.topology, layout.cfg)
        return _fitness_from(theta, feats, labels, baseline)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(len(pop))))
    return [one(i) for i in range(len(pop))]


def _dominates_matrix(fits: list[Fitness]) -> np.ndarray:
    err = np.array([f.error for f in fits])
    area = np.array([f.area for f in fits], dtype=np.float64)
    feas = np.array([f.feasible for f in fits])
    viol = np.array([f.violation for f in fits])
    le = (err[:, None] <= err[None, :]) & (area[:, None] <= area[None, :])
    lt = (err[:, None] < err[None, :]) | (area[:, None] < area[None, :])
    pareto = le & lt
    fi, fj = feas[:, None], feas[None, :]
    dom = np.where(
        fi & fj, pareto, np.where(fi & ~fj, True, np.where(~fi & fj, False, viol[:, None] < viol[None, :]))
    )
    np.fill_diagonal(dom, False)
    return dom


def nondominated_sort(fits: list[Fitness]) -> list[list[int]]:
    """Constrained-domination fronts, best first."""
    dom = _dominates_matrix(fits)
    n_dominators = dom.sum(axis=0).astype(np.int64)
    fronts = []
    assigned = np.zeros(len(fits), dtype=bool)
    while not assigned.all():
        front = np.nonzero(~assigned & (n_dominators == 0))[0]
        if front.size == 0:
            raise RuntimeError("domination cycle; comparator bug")
        fronts.append([int(i) for i in front])
        assigned[front] = True
        n_dominators -= dom[front].sum(axis=0)
    return fronts


def crowding_distance(fits: list[Fitness], front: list[int]) -> dict[int, float]:
    """Per-objective normalized gap sum; boundary points get infinity."""
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: float("inf") for i in front}
    for values in (
        [fits[i].error for i in front],
        [float(fits[i].area) for i in front],
    ):
        order = sorted(range(len(front)), key=lambda j: values[j])
        lo, hi = values[order[0]], values[order[-1]]
        dist[front[order[0]]] = float("inf")
        dist[front[order[-1]]] = float("inf")
        if hi > lo:
            for w in range(1, len(order) - 1):
                gap = (values[order[w + 1]] - values[order[w - 1]]) / (hi - lo)
                dist[front[order[w]]] += gap
    return dist


def _rank_and_crowd(fits: list[Fitness]):
    ranks = np.empty(len(fits), dtype=np.int64)
    crowd = np.empty(len(fits), dtype=np.float64)
    fronts = nondominated_sort(fits)
    for r, front in enumerate(fronts):
        dist = crowding_distance(fits, front)
        for i in front:
            ranks[i] = r
            crowd[i] = dist[i]
    return ranks, crowd, fronts


def _tournament(rng, ranks, crowd, areas) -> int:
    n = len(ranks)
    a, b = int(rng.integers(n)), int(rng.integers(n))
    ka = (ranks[a], -crowd[a], areas[a], a)
    kb = (ranks[b], -crowd[b], areas[b], b)
    return a if ka <= kb else b


class ParetoArchive:
    """Every feasible non-dominated (error, area) individual ever seen."""

    def __init__(self):
        self.entries: list[dict] = []
        self._genomes: set[bytes] = set()

    def offer(self, genes: np.ndarray, fit: Fitness, gen: int) -> None:
        if not fit.feasible:
            return
        key = genes.tobytes()
        if key in self._genomes:
            return
        for e in self.entries:
            if (e["error"] <= fit.error and e["area"] <= fit.area) and (
                e["error"] < fit.error or e["area"] < fit.area
            ):
                return  # dominated by an archived point
            if e["error"] == fit.error and e["area"] == fit.area:
                return  # objective tie: first seen stays
        kept = []
        for e in self.entries:
            if (fit.error <= e["error"] and fit.area <= e["area"]) and (
                fit.error < e["error"] or fit.area < e["area"]
            ):
                self._genomes.discard(e["genes"].tobytes())
                continue
            kept.append(e)
        kept.append(
            {"genes": genes.copy(), "error": fit.error, "area": fit.area, "generation": gen}
        )
        self.entries = kept
        self._genomes.add(key)

    def hypervolume(self, ref_area: float, ref_error: float = 1.0) -> float:
        """2-D dominated volume against (ref_error, ref_area)."""
        if not self.entries:
            return 0.0
        pts = sorted((e["error"], e["area"]) for e in self.entries)
        hv = 0.0
        for i, (err, area) in enumerate(pts):
            nxt = pts[i + 1][0] if i + 1 < len(pts) else ref_error
            hv += max(0.0, nxt - err) * max(0.0, ref_area - area)
        return hv


def evolve(dataset, topology, ga: GaConfig, bits: BitConfig, progress=None):
    """Run the GA; returns (archive, history, final population fitnesses).

    history holds one record per generation; progress, when given, is
    called with each record as it is produced.
    """
    ga.validate()
    topology = tuple(topology)
    if topology[0] != dataset.features.shape[1]:
        raise ValueError(
            f"topology input width {topology[0]} != dataset features {dataset.features.shape[1]}"
        )
    n_classes = int(dataset.labels.max()) + 1
    if topology[-1] != n_classes:
        raise ValueError(f"topology output width {topology[-1]} != classes {n_classes}")
    if bits.w_in != dataset.w_in:
        raise ValueError(f"config w_in {bits.w_in} != dataset w_in {dataset.w_in}")

    layout = build_layout(topology, bits)
    feats = dataset.features[dataset.train_idx]
    labels = dataset.labels[dataset.train_idx]
    threads = max(1, int(os.environ.get("AXGEN_THREADS", "1")))
    ref_area = areamodel.reference_area(topology, bits)

    pop = init_population(layout, ga)
    fits = _eval_many(pop, layout, feats, labels, ga.baseline_accuracy, threads)
    archive = ParetoArchive()
    for i in range(len(pop)):
        archive.offer(pop[i], fits[i], 0)

    history = []

    def record(gen):
        rec = {
            "generation": gen,
            "best_error": min(f.error for f in fits),
            "min_area": min(f.area for f in fits),
            "archive_size": len(archive.entries),
            "hypervolume": archive.hypervolume(ref_area),
        }
        history.append(rec)
        if progress is not None:
            progress(rec)

    record(0)

    n = ga.population_size
    for gen in range(1, ga.generations + 1):
        ranks, crowd, _ = _rank_and_crowd(fits)
        areas = np.array([f.area for f in fits])
        children = np.empty_like(pop)
        made = 0
        for slot in range(0, n, 2):
            rng = _rng(ga.seed, gen, slot)
            p1 = _tournament(rng, ranks, crowd, areas)
            p2 = _tournament(rng, ranks, crowd, areas)
            c1, c2 = pop[p1].copy(), pop[p2].copy()
            if rng.random() < ga.crossover_prob:
                c1, c2 = crossover(c1, c2, layout, rng)
            mutate(c1, ga.mutation_prob, layout, rng)
            mutate(c2, ga.mutation_prob, layout, rng)
            children[made] = c1
            made += 1
            if made < n:
                children[made] = c2
                made += 1
        cfits = _eval_many(children, layout, feats, labels, ga.baseline_accuracy, threads)
        for i in range(n):
            archive.offer(children[i], cfits[i], gen)

        merged = np.concatenate([pop, children])
        mfits = fits + cfits
        _, mcrowd, mfronts = _rank_and_crowd(mfits)
        chosen: list[int] = []
        for front in mfronts:
            if len(chosen) + len(front) <= n:
                chosen.extend(front)
            else:
                need = n - len(chosen)
                front_sorted = sorted(
                    front, key=lambda i: (-mcrowd[i], mfits[i].area, i)
                )
                chosen.extend(front_sorted[:need])
            if len(chosen) == n:
                break
        pop = merged[chosen]
        fits = [mfits[i] for i in chosen]
        record(gen)

    return archive, history, (pop, fits)


def archive_to_dict(archive: ParetoArchive, dataset, topology, ga, bits, name: str) -> dict:
    """Serializable archive; computes test accuracy once per entry and
    sorts by area ascending."""
    from .qarith import mlp_to_dict  # local to avoid import noise at top

    feats_t = dataset.features[dataset.test_idx]
    labels_t = dataset.labels[dataset.test_idx]
    rows = []
    ordered = sorted(archive.entries, key=lambda e: (e["area"], e["error"]))
    for e in ordered:
        theta = decode(e["genes"], tuple(topology), bits)
        test_acc = float(np.mean(predict_batch(theta, feats_t) == labels_t))
        rows.append(
            {
                "area_fa": int(e["area"]),
                "error": e["error"],
                "train_acc": 1.0 - e["error"],
                "test_acc": test_acc,
                "generation": int(e["generation"]),
                "feasible": True,
                "model": mlp_to_dict(theta),
            }
        )
    return {
        "version": 1,
        "dataset": name,
        "topology": list(topology),
        "baseline_accuracy": ga.baseline_accuracy,
        "loss_bound": LOSS_BOUND,
        "seed": ga.seed,
        "population_size": ga.population_size,
        "generations": ga.generations,
        "mutation_prob": ga.mutation_prob,
        "crossover_prob": ga.crossover_prob,
        "dope_fraction": ga.dope_fraction,
        "reference_area": areamodel.reference_area(tuple(topology), bits),
        "config": {
            "w_in": bits.w_in,
            "w_hidden": bits.w_hidden,
            "n_bits": bits.n_bits,
            "b_bits": bits.b_bits,
        },
        "entries": rows,
    }


def violation_front_to_dict(pop, fits, dataset, topology, ga, bits, name: str) -> dict:
    """Fallback archive when nothing was ever feasible: the final
    population's smallest-violation front, flagged infeasible."""
    from .qarith import mlp_to_dict

    fronts = nondominated_sort(fits)
    feats_t = dataset.features[dataset.test_idx]
    labels_t = dataset.labels[dataset.test_idx]
    rows = []
    seen = set()
    for i in sorted(fronts[0], key=lambda i: (fits[i].violation, fits[i].area, i)):
        key = pop[i].tobytes()
        if key in seen:
            continue
        seen.add(key)
        theta = decode(pop[i], tuple(topology), bits)
        test_acc = float(np.mean(predict_batch(theta, feats_t) == labels_t))
        rows.append(
            {
                "area_fa": int(fits[i].area),
                "error": fits[i].error,
                "train_acc": 1.0 - fits[i].error,
                "test_acc": test_acc,
                "generation": -1,
                "feasible": bool(fits[i].feasible),
                "violation": fits[i].violation,
                "model": mlp_to_dict(theta),
            }
        )
    d = archive_to_dict(ParetoArchive(), dataset, topology, ga, bits, name)
    d["entries"] = rows
    return d


def knee_index(entries: list[dict]) -> int:
    """Archive row maximizing normalized accuracy gain minus normalized
    area cost; ties go to lower area, then lower index."""
    if not entries:
        raise ValueError("empty archive")
    accs = [e["test_acc"] for e in entries]
    areas = [e["area_fa"] for e in entries]
    alo, ahi = min(accs), max(accs)
    rlo, rhi = min(areas), max(areas)
    best, best_key = 0, None
    for i, e in enumerate(entries):
        na = (accs[i] - alo) / (ahi - alo) if ahi > alo else 0.0
        nr = (areas[i] - rlo) / (rhi - rlo) if rhi > rlo else 0.0
        key = (-(na - nr), areas[i], i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best
