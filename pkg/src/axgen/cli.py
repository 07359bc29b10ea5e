"""Command line front end: prepare / train / report / emit.

Exit codes: 0 success, 2 usage or data problems, 3 when a run finishes
with an empty feasible archive (the smallest-violation front is still
written so the run is inspectable).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import __version__, datio, evolver, netlist, qarith
from .qarith import BitConfig, canonical_json, mlp_from_dict


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _parse_topology(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"bad topology {text!r}; expected e.g. 10,3,2") from None
    if len(parts) < 2 or any(p < 1 for p in parts):
        raise ValueError(f"bad topology {text!r}; need >= 2 positive widths")
    return parts


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# defaults that --config files and flags may override, keyed by arg dest
_CONFIG_KEYS = (
    "topology",
    "seed",
    "pop",
    "gens",
    "mut",
    "cx",
    "dope",
    "baseline_acc",
    "w_in",
    "w_hidden",
    "n_bits",
    "train_frac",
)


def _merge_config(args) -> None:
    """Fill unset flags from --config; explicit flags win."""
    if not getattr(args, "config", None):
        return
    cfg = _load_config_file(args.config)
    unknown = set(cfg) - set(_CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, val in cfg.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)


def _write_manifest(path, command, args_dict, outputs, seconds, dataset_sha=None):
    man = {
        "version": __version__,
        "command": command,
        "args": {k: v for k, v in sorted(args_dict.items()) if k != "func"},
        "dataset_sha256": dataset_sha,
        "seed": args_dict.get("seed"),
        "outputs": [os.path.basename(p) for p in outputs],
        "timings": {"seconds": round(seconds, 3)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_prepare(args) -> int:
    t0 = time.perf_counter()
    name = args.name or os.path.splitext(os.path.basename(args.csv))[0]
    raw = datio.load_csv(args.csv, label_col=args.label_col)
    ds = datio.prepare_dataset(
        raw, name, w_in=args.w_in, train_frac=args.train_frac, seed=args.seed
    )
    os.makedirs(args.out_dir, exist_ok=True)
    out = os.path.join(args.out_dir, f"{name}.json")
    datio.save_dataset(ds, out)
    man = os.path.join(args.out_dir, f"{name}.manifest.json")
    _write_manifest(
        man,
        "prepare",
        vars(args),
        [out],
        time.perf_counter() - t0,
        dataset_sha=datio.file_sha256(args.csv),
    )
    print(
        f"prepared {name}: {ds.features.shape[0]} rows, "
        f"{ds.n_features} features, {ds.n_classes} classes, "
        f"{len(ds.train_idx)} train / {len(ds.test_idx)} test -> {out}"
    )
    return 0


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    ds = datio.load_dataset(args.dataset)

    topology = args.topology
    if topology is None:
        topology = evolver.TOPOLOGY.get(ds.name)
        if topology is None:
            raise ValueError(
                f"no default topology for dataset {ds.name!r}; pass --topology"
            )
    elif isinstance(topology, str):
        topology = _parse_topology(topology)
    else:
        topology = tuple(int(v) for v in topology)

    baseline = args.baseline_acc
    if baseline is None:
        baseline = evolver.BASELINE_ACCURACY.get(ds.name)
        if baseline is None:
            raise ValueError(
                f"no reference accuracy for dataset {ds.name!r}; pass --baseline-acc"
            )

    ga = evolver.GaConfig(
        population_size=args.pop if args.pop is not None else 100,
        generations=args.gens if args.gens is not None else 1000,
        mutation_prob=args.mut if args.mut is not None else 0.2,
        crossover_prob=args.cx if args.cx is not None else 0.7,
        dope_fraction=args.dope if args.dope is not None else 0.10,
        seed=args.seed if args.seed is not None else 0,
        baseline_accuracy=float(baseline),
    )
    ga.validate()
    bits = BitConfig(
        w_in=ds.w_in,
        w_hidden=args.w_hidden if args.w_hidden is not None else 8,
        n_bits=args.n_bits if args.n_bits is not None else 8,
    )

    out_dir = args.out_dir or f"runs/{ds.name}_s{ga.seed}"
    os.makedirs(out_dir, exist_ok=True)
    progress_path = os.path.join(out_dir, "progress.ndjson")

    with open(progress_path, "w", encoding="utf-8") as plog:

        def progress(rec):
            plog.write(json.dumps(rec, sort_keys=True) + "\n")
            if not args.quiet and rec["generation"] % args.log_every == 0:
                print(
                    f"gen {rec['generation']:5d}  best_err {rec['best_error']:.4f}  "
                    f"min_area {rec['min_area']:6d}  archive {rec['archive_size']:3d}  "
                    f"hv {rec['hypervolume']:.1f}",
                    file=sys.stderr,
                )

        archive, history, (pop, fits) = evolver.evolve(
            ds, topology, ga, bits, progress=progress
        )

    feasible = bool(archive.entries)
    if feasible:
        doc = evolver.archive_to_dict(archive, ds, topology, ga, bits, ds.name)
    else:
        doc = evolver.violation_front_to_dict(pop, fits, ds, topology, ga, bits, ds.name)
    arc_path = os.path.join(out_dir, "archive.json")
    with open(arc_path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")

    man = os.path.join(out_dir, "manifest.json")
    _write_manifest(
        man,
        "train",
        vars(args),
        [arc_path, progress_path],
        time.perf_counter() - t0,
        dataset_sha=datio.file_sha256(args.dataset),
    )
    n = len(doc["entries"])
    if feasible:
        best = max(e["test_acc"] for e in doc["entries"])
        small = min(e["area_fa"] for e in doc["entries"])
        print(
            f"archive: {n} entries, best test_acc {best:.3f}, "
            f"min area {small} FA -> {arc_path}"
        )
        return 0
    print(
        f"no feasible individuals; wrote smallest-violation front "
        f"({n} entries) -> {arc_path}",
        file=sys.stderr,
    )
    return 3


def _load_archive(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != 1 or "entries" not in doc:
        raise ValueError(f"{path}: not an archive file")
    return doc


def cmd_report(args) -> int:
    doc = _load_archive(args.archive)
    entries = doc["entries"]
    rows = sorted(entries, key=lambda e: (e["area_fa"], -e["test_acc"]))
    lines = ["area_fa,train_acc,test_acc,nonmono"]
    running = float("-inf")
    for e in rows:
        flag = 1 if e["test_acc"] < running else 0
        running = max(running, e["test_acc"])
        lines.append(
            f"{e['area_fa']},{e['train_acc']:.6f},{e['test_acc']:.6f},{flag}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        sys.stdout.write(text)
    if entries:
        k = evolver.knee_index(rows)
        e = rows[k]
        print(
            f"knee: area_fa={e['area_fa']} test_acc={e['test_acc']:.3f} "
            f"train_acc={e['train_acc']:.3f}"
        )
    return 0


def cmd_emit(args) -> int:
    t0 = time.perf_counter()
    doc = _load_archive(args.archive)
    entries = doc["entries"]
    if not entries:
        raise ValueError("archive has no entries to emit")
    if args.index is not None:
        if not 0 <= args.index < len(entries):
            raise ValueError(f"--index {args.index} outside 0..{len(entries) - 1}")
        pick = args.index
    else:
        pick = evolver.knee_index(entries)
    entry = entries[pick]
    theta = mlp_from_dict(entry["model"])
    net = netlist.build(theta)
    text = netlist.emit_hdl(net, module_name=args.module)
    os.makedirs(args.out_dir, exist_ok=True)
    acc_pct = 100.0 * entry["test_acc"]
    fname = f"{doc['dataset']}_{entry['area_fa']}_{acc_pct:.1f}.v"
    out = os.path.join(args.out_dir, fname)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    man = os.path.join(args.out_dir, f"{os.path.splitext(fname)[0]}.manifest.json")
    _write_manifest(
        man,
        "emit",
        vars(args),
        [out],
        time.perf_counter() - t0,
        dataset_sha=datio.file_sha256(args.archive),
    )
    counts = net.meta
    print(
        f"emitted {out}: {counts['fa_count_reduction']} reduce FA, "
        f"{counts['fa_count_final_adder']} final FA, "
        f"{counts['ha_count_final_adder']} HA, {counts['not_count']} NOT"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="axgen",
        description="evolve approximate shift-add classifier circuits",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="quantize a CSV into a dataset JSON")
    p.add_argument("csv")
    p.add_argument("--name", help="dataset name (default: CSV basename)")
    p.add_argument("--label-col", default="class")
    p.add_argument("--w-in", type=int, default=4)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="data")
    p.set_defaults(func=cmd_prepare)

    t = sub.add_parser("train", help="run the evolutionary search")
    t.add_argument("dataset", help="prepared dataset JSON")
    t.add_argument("--topology", help="comma list, e.g. 10,3,2")
    t.add_argument("--seed", type=int)
    t.add_argument("--pop", type=int)
    t.add_argument("--gens", type=int)
    t.add_argument("--mut", type=float, help="per-gene mutation probability")
    t.add_argument("--cx", type=float, help="crossover probability")
    t.add_argument("--dope", type=float, help="all-ones-mask seeding fraction")
    t.add_argument("--baseline-acc", type=float, dest="baseline_acc")
    t.add_argument("--w-hidden", type=int, dest="w_hidden")
    t.add_argument("--n-bits", type=int, dest="n_bits")
    t.add_argument("--config", help="TOML or JSON file with the above keys")
    t.add_argument("--out-dir")
    t.add_argument("--quiet", action="store_true")
    t.add_argument("--log-every", type=int, default=50)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="summarize an archive as CSV")
    r.add_argument("archive")
    r.add_argument("--out", help="write CSV here instead of stdout")
    r.set_defaults(func=cmd_report)

    e = sub.add_parser("emit", help="write gate-level HDL for one archive entry")
    e.add_argument("archive")
    e.add_argument("--index", type=int, help="archive row (default: knee point)")
    e.add_argument("--module", default="axgen_top")
    e.add_argument("--out-dir", default="hdl")
    e.set_defaults(func=cmd_emit)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "train":
            _merge_config(args)
        return args.func(args)
    except (datio.DataError, ValueError, OSError) as e:
        return _fail(str(e))


if __name__ == "__main__":
    raise SystemExit(main())
