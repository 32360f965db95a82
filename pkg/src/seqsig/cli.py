"""Command-line entry point: features, gram, graph, and fit pipelines.

Every command reads CSV inputs, writes a CSV output plus a ``<output>.meta``
sidecar holding the fully resolved configuration (enough to re-run the job),
and is deterministic byte-for-byte given (config, inputs, seed) in
sequential mode.  A ``--config`` JSON file supplies defaults; explicit flags
win.  Exit codes: 0 success, 2 input error, 3 capacity refusal, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__, graphdiff, lowrank, randomfeatures, seqdata, sigfeatures, sigkernels
from .errors import (
    CapacityError,
    ConfigurationError,
    InputError,
    NumericError,
    SeqsigError,
)

EXIT_INPUT = 2
EXIT_CAPACITY = 3
EXIT_NUMERIC = 4


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_meta(output_path: str, entries: dict) -> None:
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    with open(str(output_path) + ".meta", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Overlay JSON config values under explicit flags (flags win)."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"config {args.config} must hold a JSON object")
    defaults = {a.dest: a.default for a in parser._actions}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in defaults:
            raise ConfigurationError(f"config key {key!r} is not a recognized option")
        if getattr(args, dest) == defaults[dest]:
            setattr(args, dest, value)
    return args


def _augmentations(spec: str | None) -> tuple:
    if not spec:
        return ()
    return tuple(seqdata.parse_augmentation(tok) for tok in spec.split(",") if tok.strip())


def _static_spec(args) -> sigkernels.StaticKernelSpec:
    kind = args.static
    if kind == "linear":
        if args.sigma is not None or args.alpha is not None:
            raise ConfigurationError("--sigma/--alpha apply to the rbf static kernel only")
        return sigkernels.StaticKernelSpec("linear")
    if args.sigma is not None and args.alpha is not None:
        raise ConfigurationError("give either --sigma or --alpha, not both")
    return sigkernels.StaticKernelSpec("rbf", sigma=args.sigma, median_scale=args.alpha)


def _resolve_sigma(spec, batch):
    resolved = spec.resolve(batch)
    return resolved


def _write_feature_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _feature_names(block_dims: list[int]) -> list[str]:
    names = []
    for m, width in enumerate(block_dims):
        names.extend(f"m{m}_{i}" for i in range(width))
    return names


# ---------------------------------------------------------------- features

def cmd_features(args) -> int:
    batch, ids = seqdata.read_sequence_csv(args.input)
    augs = _augmentations(args.augment)
    meta = {
        "command": "features",
        "version": __version__,
        "input": args.input,
        "output": args.output,
        "mode": args.mode,
        "trunc": args.trunc,
        "order": args.order,
        "augment": args.augment or "",
        "normalize": int(args.normalize),
        "seed": args.seed,
        "jobs": args.jobs,
        "stream": int(args.stream),
    }

    if args.mode == "sig":
        cfg = sigfeatures.SignatureConfig(
            trunc=args.trunc, order=args.order, augmentations=augs, normalize=args.normalize
        )
        lifted_dim = seqdata.augment_batch(batch, list(augs)).dim if augs else batch.dim
        header = ["id"] + sigfeatures.feature_header(lifted_dim, args.trunc)
        if args.stream:
            rows = []
            for sid, seq in zip(ids, batch):
                for step, series in enumerate(sigfeatures.signature_stream(seq, cfg)):
                    rows.append([sid, step] + [_fmt(v) for v in series.flatten()])
            _write_feature_rows(args.output, ["id", "step"] + header[1:], rows)
        else:
            feats = sigfeatures.signature_batch(batch, cfg, jobs=args.jobs)
            rows = [[sid] + [_fmt(v) for v in f.flatten()] for sid, f in zip(ids, feats)]
            _write_feature_rows(args.output, header, rows)
        _write_meta(args.output, meta)
        return 0

    if args.mode in ("ls2t-independent", "ls2t-recursive"):
        if not args.weights:
            raise ConfigurationError(f"mode {args.mode} needs --weights")
        weights = lowrank.read_weights_csv(args.weights)
        expected = "independent" if args.mode.endswith("independent") else "recursive"
        if weights.variant != expected:
            raise ConfigurationError(f"weight file holds the {weights.variant} variant")
        aug_batch = seqdata.augment_batch(batch, list(augs))
        fn = lowrank.ls2t_independent if expected == "independent" else lowrank.ls2t_recursive
        outputs = fn(aug_batch, weights, last_only=not args.stream)
        names = []
        for m in range(1, weights.trunc + 1):
            names.extend(f"m{m}_{j}" for j in range(weights.width))
        meta["weights"] = args.weights
        if args.stream:
            rows = []
            L = outputs[0].shape[1]
            for i, sid in enumerate(ids):
                for step in range(L):
                    vals = np.concatenate([y[i, step] for y in outputs])
                    rows.append([sid, step + 1] + [_fmt(v) for v in vals])
            _write_feature_rows(args.output, ["id", "step"] + names, rows)
        else:
            rows = []
            for i, sid in enumerate(ids):
                vals = np.concatenate([y[i] for y in outputs])
                rows.append([sid] + [_fmt(v) for v in vals])
            _write_feature_rows(args.output, ["id"] + names, rows)
        _write_meta(args.output, meta)
        return 0

    # random-feature modes below share the rbf sampler
    spec = _static_spec(args)
    if spec.kind != "rbf":
        raise ConfigurationError(f"mode {args.mode} needs the rbf static kernel (--static rbf)")
    aug_batch = seqdata.augment_batch(batch, list(augs))
    spec = _resolve_sigma(spec, aug_batch)
    meta["sigma"] = _fmt(spec.sigma)
    if args.alpha is not None:
        meta["alpha"] = _fmt(args.alpha)

    streamed = args.mode == "rfdsf" or (args.stream and args.mode == "rfsf")
    params = randomfeatures.sample_params(
        spec,
        aug_batch.dim,
        args.rff_dim,
        args.trunc,
        args.seed,
        phase_variant=streamed,
        projections=args.mode == "rfsf-trp",
    )
    if args.params_out:
        randomfeatures.write_params_csv(args.params_out, params)
        meta["params_out"] = args.params_out

    if streamed:
        decay = randomfeatures.DecaySpec(
            lam=np.full(args.rff_dim, args.decay),
            frac_orders=np.full(args.rff_dim, args.frac_order),
            window=args.window,
        )
        meta.update(decay=_fmt(args.decay), frac_order=_fmt(args.frac_order), window=args.window)
        names = ["m0_0"]
        for m in range(1, args.trunc + 1):
            names.extend(f"m{m}_{i}" for i in range(args.rff_dim))
        rows = []
        for sid, seq in zip(ids, aug_batch):
            if args.mode == "rfdsf":
                levels = randomfeatures.rfdsf(seq, params, decay, normalize=args.normalize)
            else:
                levels = randomfeatures.rfsf_stream(seq, params, decay=decay, normalize=args.normalize)
            flat = randomfeatures.flatten_levels(levels)
            for step in range(flat.shape[0]):
                rows.append([sid, step + 1, _fmt(1.0)] + [_fmt(v) for v in flat[step]])
        _write_feature_rows(args.output, ["id", "step"] + names, rows)
        _write_meta(args.output, meta)
        return 0

    if args.stream:
        raise ConfigurationError(f"--stream is not supported for mode {args.mode}")
    if args.mode == "rfsf":
        levels = randomfeatures.rfsf(aug_batch, params)
    elif args.mode == "rfsf-dp":
        levels = randomfeatures.rfsf_dp(aug_batch, params)
    elif args.mode == "rfsf-trp":
        levels = randomfeatures.rfsf_trp(aug_batch, params)
    else:
        raise ConfigurationError(f"unknown mode {args.mode!r}")
    if args.normalize:
        levels = [levels[0]] + randomfeatures.normalize_levels(levels[1:], prepend_constant=False)
    flat = randomfeatures.flatten_levels(levels)
    names = _feature_names([lv.shape[1] for lv in levels])
    rows = [[sid] + [_fmt(v) for v in flat[i]] for i, sid in enumerate(ids)]
    _write_feature_rows(args.output, ["id"] + names, rows)
    _write_meta(args.output, meta)
    return 0


# -------------------------------------------------------------------- gram

def _write_gram_csv(path, matrix, row_ids, col_ids):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + list(col_ids))
        for rid, row in zip(row_ids, matrix):
            writer.writerow([rid] + [_fmt(v) for v in row])


def cmd_gram(args) -> int:
    X, ids_x = seqdata.read_sequence_csv(args.input)
    if args.input2:
        Y, ids_y = seqdata.read_sequence_csv(args.input2)
    else:
        Y, ids_y = None, ids_x
    spec = _static_spec(args)
    augs = _augmentations(args.augment)
    if spec.kind == "rbf" and spec.sigma is None:
        spec = spec.resolve(seqdata.augment_batch(X, list(augs)))
    cfg = sigkernels.GramConfig(
        trunc=args.trunc,
        order=args.order,
        static=spec,
        normalize=args.normalize,
        augmentations=augs,
        cell_cap=args.cell_cap,
    )
    result = sigkernels.gram(X, Y, cfg, jobs=args.jobs)
    _write_gram_csv(args.output, result.combined, ids_x, ids_y)
    if args.per_level:
        stem, dot, ext = args.output.rpartition(".")
        base = stem if dot else args.output
        ext = ext if dot else "csv"
        for m, mat in enumerate(result.levels, start=1):
            _write_gram_csv(f"{base}_m{m}.{ext}", mat, ids_x, ids_y)
    meta = {
        "command": "gram",
        "version": __version__,
        "input": args.input,
        "input2": args.input2 or "",
        "output": args.output,
        "trunc": args.trunc,
        "order": args.order,
        "static": spec.kind,
        "normalize": int(args.normalize),
        "augment": args.augment or "",
        "per_level": int(args.per_level),
        "jobs": args.jobs,
        "cell_cap": args.cell_cap,
    }
    if spec.kind == "rbf":
        meta["sigma"] = _fmt(spec.sigma)
        if args.alpha is not None:
            meta["alpha"] = _fmt(args.alpha)
    _write_meta(args.output, meta)
    return 0


# ------------------------------------------------------------------- graph

def _sample_functionals(dim: int, trunc: int, width: int, seed: int):
    out = []
    for j in range(width):
        comps = []
        for m in range(1, trunc + 1):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j, m)))
            comps.append([rng.standard_normal(dim) / np.sqrt(dim) for _ in range(m)])
        out.append(graphdiff.Rank1Element(dim, trunc, 1.0, comps))
    return tuple(out)


def cmd_graph(args) -> int:
    g, node_ids = graphdiff.read_graph_csv(args.edges, args.nodes, undirected=args.undirected)
    functionals = _sample_functionals(g.dim, args.trunc, args.width, args.seed)
    cfg = graphdiff.WalkFeatureConfig(
        walk_length=args.walk_length,
        trunc=args.trunc,
        functionals=functionals,
        zero_start=args.zero_start,
        increments=not args.no_increments,
    )
    values = graphdiff.hypoelliptic_features(g, cfg, jobs=args.jobs)
    meta = {
        "command": "graph",
        "version": __version__,
        "edges": args.edges,
        "nodes": args.nodes,
        "output": args.output,
        "walk_length": args.walk_length,
        "trunc": args.trunc,
        "width": args.width,
        "seed": args.seed,
        "zero_start": int(args.zero_start),
        "increments": int(not args.no_increments),
        "undirected": int(args.undirected),
        "pooled": int(args.pooled),
        "jobs": args.jobs,
    }
    if args.oracle_check:
        oracle = graphdiff.walk_oracle(g, cfg)
        deviation = float(np.max(np.abs(values - oracle))) if oracle.size else 0.0
        meta["oracle_max_deviation"] = _fmt(deviation)
        print(f"oracle max deviation: {deviation:.3e}", file=sys.stderr)
    names = []
    for m in range(args.trunc + 1):
        names.extend(f"m{m}_f{j}" for j in range(args.width))
    rows = []
    for i, nid in enumerate(node_ids):
        rows.append([nid] + [_fmt(v) for v in values[i].reshape(-1)])
    if args.pooled:
        pooled = graphdiff.mean_pool(values)
        rows.append(["__pooled__"] + [_fmt(v) for v in pooled.reshape(-1)])
    _write_feature_rows(args.output, ["node"] + names, rows)
    _write_meta(args.output, meta)
    return 0


# --------------------------------------------------------------------- fit

def _read_feature_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise InputError(f"{path}: expected an 'id'-keyed feature CSV")
        has_step = len(header) > 1 and header[1] == "step"
        rows: dict[str, list[float]] = {}
        order: list[str] = []
        for row in reader:
            if not row:
                continue
            sid = row[0]
            vals = [float(v) for v in row[(2 if has_step else 1):]]
            # streamed files keep only the last step per id
            if sid not in rows:
                order.append(sid)
            rows[sid] = vals
    if not order:
        raise InputError(f"{path}: no feature rows")
    return order, np.array([rows[sid] for sid in order])


def _read_targets_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2 or header[0] != "id":
            raise InputError(f"{path}: expected header 'id,<target>'")
        out = {}
        for row in reader:
            if not row:
                continue
            out[row[0]] = float(row[1])
    if not out:
        raise InputError(f"{path}: no target rows")
    return out


def cmd_fit(args) -> int:
    ids, X = _read_feature_csv(args.features)
    targets = _read_targets_csv(args.targets)
    missing = [sid for sid in ids if sid not in targets]
    if missing:
        raise InputError(f"targets missing for ids: {missing[:5]}")
    extra = set(targets) - set(ids)
    if extra:
        raise InputError(f"targets reference unknown ids: {sorted(extra)[:5]}")
    if args.ridge <= 0:
        raise ConfigurationError("ridge penalty must be positive")
    # canonical order: sort by id so row order in the inputs cannot matter
    perm = np.argsort(np.array(ids, dtype=object))
    ids = [ids[i] for i in perm]
    X = X[perm]
    y = np.array([targets[sid] for sid in ids])

    n = len(ids)
    n_test = int(round(args.test_frac * n))
    shuffled = np.random.default_rng(args.seed).permutation(n)
    test_mask = np.zeros(n, dtype=bool)
    test_mask[shuffled[:n_test]] = True
    train_mask = ~test_mask
    if train_mask.sum() == 0:
        raise InputError("test fraction leaves no training rows")

    x_mean = X[train_mask].mean(axis=0)
    y_mean = y[train_mask].mean()
    Xc = X[train_mask] - x_mean
    yc = y[train_mask] - y_mean
    k = Xc.shape[1]
    w = np.linalg.solve(Xc.T @ Xc + args.ridge * np.eye(k), Xc.T @ yc)
    preds = (X - x_mean) @ w + y_mean
    if not np.all(np.isfinite(preds)):
        raise NumericError("nonfinite predictions from the ridge solve")

    def rmse(mask):
        if mask.sum() == 0:
            return float("nan")
        return float(np.sqrt(np.mean((preds[mask] - y[mask]) ** 2)))

    metrics = {"rmse_train": rmse(train_mask), "rmse_test": rmse(test_mask)}
    if set(np.unique(y)) <= {-1.0, 1.0}:
        signs = np.where(preds >= 0, 1.0, -1.0)
        metrics["accuracy_train"] = float(np.mean(signs[train_mask] == y[train_mask]))
        if test_mask.sum():
            metrics["accuracy_test"] = float(np.mean(signs[test_mask] == y[test_mask]))

    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "split", "target", "prediction"])
        for i, sid in enumerate(ids):
            writer.writerow(
                [sid, "test" if test_mask[i] else "train", _fmt(y[i]), _fmt(preds[i])]
            )
    stem, dot, ext = args.output.rpartition(".")
    metrics_path = f"{stem if dot else args.output}_metrics.{ext if dot else 'csv'}"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(metrics):
            writer.writerow([key, _fmt(metrics[key])])
    meta = {
        "command": "fit",
        "version": __version__,
        "features": args.features,
        "targets": args.targets,
        "output": args.output,
        "metrics": metrics_path,
        "ridge": _fmt(args.ridge),
        "test_frac": _fmt(args.test_frac),
        "seed": args.seed,
    }
    meta.update({k: _fmt(v) for k, v in metrics.items()})
    _write_meta(args.output, meta)
    return 0


# ------------------------------------------------------------------ parser

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with option defaults (flags win)")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("--jobs", type=int, default=1, help="worker cap; 1 is the reference")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqsig",
        description="Signature features, kernels, and random approximations for sequences and graphs.",
    )
    parser.add_argument("--version", action="version", version=f"seqsig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("features", help="extract sequence features to CSV")
    pf.add_argument("--input", required=True, help="long-format sequence CSV (id,step,c0,...)")
    pf.add_argument("--output", required=True)
    pf.add_argument(
        "--mode",
        default="sig",
        choices=["sig", "ls2t-independent", "ls2t-recursive", "rfsf", "rfsf-dp", "rfsf-trp", "rfdsf"],
    )
    pf.add_argument("--trunc", type=int, default=4)
    pf.add_argument("--order", type=int, default=1)
    pf.add_argument("--augment", default=None, help="comma list: time[:tau],basepoint,leadlag")
    pf.add_argument("--normalize", action="store_true")
    pf.add_argument("--static", default="rbf", choices=["linear", "rbf"])
    pf.add_argument("--sigma", type=float, default=None)
    pf.add_argument("--alpha", type=float, default=None, help="median-heuristic rescaling")
    pf.add_argument("--rff-dim", type=int, default=64)
    pf.add_argument("--decay", type=float, default=1.0)
    pf.add_argument("--frac-order", type=float, default=1.0)
    pf.add_argument("--window", type=int, default=32)
    pf.add_argument("--stream", action="store_true", help="emit one row per (id, step)")
    pf.add_argument("--weights", default=None, help="LS2T weight CSV")
    pf.add_argument("--params-out", default=None, help="write sampled RFF parameters here")
    _add_common(pf)
    pf.set_defaults(fn=cmd_features, _subparser=pf)

    pg = sub.add_parser("gram", help="signature-kernel Gram matrix to CSV")
    pg.add_argument("--input", required=True)
    pg.add_argument("--input2", default=None, help="second batch for rectangular Gram")
    pg.add_argument("--output", required=True)
    pg.add_argument("--trunc", type=int, default=4)
    pg.add_argument("--order", type=int, default=1)
    pg.add_argument("--static", default="linear", choices=["linear", "rbf"])
    pg.add_argument("--sigma", type=float, default=None)
    pg.add_argument("--alpha", type=float, default=None)
    pg.add_argument("--normalize", action="store_true")
    pg.add_argument("--augment", default=None)
    pg.add_argument("--per-level", action="store_true", help="also write per-level matrices")
    pg.add_argument("--cell-cap", type=int, default=sigkernels.DEFAULT_CELL_CAP)
    _add_common(pg)
    pg.set_defaults(fn=cmd_gram, _subparser=pg)

    pn = sub.add_parser("graph", help="hypo-elliptic diffusion node features to CSV")
    pn.add_argument("--edges", required=True, help="edge CSV: src,dst,weight")
    pn.add_argument("--nodes", required=True, help="node-feature CSV: node,c0,...")
    pn.add_argument("--output", required=True)
    pn.add_argument("--walk-length", type=int, default=3)
    pn.add_argument("--trunc", type=int, default=2)
    pn.add_argument("--width", type=int, default=8, help="number of random rank-1 functionals")
    pn.add_argument("--zero-start", action="store_true")
    pn.add_argument("--no-increments", action="store_true")
    pn.add_argument("--undirected", action="store_true")
    pn.add_argument("--pooled", action="store_true", help="append a mean-pooled row")
    pn.add_argument("--oracle-check", action="store_true", help="cross-check against walk enumeration")
    _add_common(pn)
    pn.set_defaults(fn=cmd_graph, _subparser=pn)

    pr = sub.add_parser("fit", help="closed-form ridge readout on feature CSVs")
    pr.add_argument("--features", required=True)
    pr.add_argument("--targets", required=True, help="CSV: id,<target>")
    pr.add_argument("--output", required=True)
    pr.add_argument("--ridge", type=float, default=1e-3)
    pr.add_argument("--test-frac", type=float, default=0.25)
    _add_common(pr)
    pr.set_defaults(fn=cmd_fit, _subparser=pr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, args._subparser)
        return args.fn(args)
    except CapacityError as exc:
        print(f"seqsig: capacity refused: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NumericError as exc:
        print(f"seqsig: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, SeqsigError, OSError) as exc:
        print(f"seqsig: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
