"""``hadr`` command line: train, eval, bench, ablate, inspect.

Every command writes deterministic JSON (sorted keys, no timestamps) into
``--out`` together with ``config.json`` (the effective configuration) and a
timestamped ``log.txt``; ``eval`` uses ``eval_config.json`` / ``eval_log.txt``
so it can share a directory with the model it scores.  Exit codes: 0 ok, 1 usage, 2 data error, 3 training
failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import datasets, dbc
from .data import DataError, Dataset, load, load_dataset_json, save_dataset, stratified_split
from .ensemble import BlockTrainingError, HadrConfig, HadrModel, evaluate, train_hadr
from .numerics import make_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3

METRICS = ("recall", "g_mean", "auc")
MODES = ("full", "dr_mlp", "dbc_mlp")
CITATION = {"auc": "Table 2", "recall": "Table 3", "g_mean": "Table 4"}

# published single-split results of the method, keyed by dataset name
PUBLISHED = {
    "pc1": {"auc": 0.900, "recall": 0.913, "g_mean": 0.848},
    "pc3": {"auc": 0.770, "recall": 0.781, "g_mean": 0.781},
    "pc4": {"auc": 0.921, "recall": 0.970, "g_mean": 0.890},
    "mw1": {"auc": 0.847, "recall": 1.000, "g_mean": 0.816},
    "wine3vs5": {"auc": 0.820, "recall": 1.000, "g_mean": 0.778},
    "abalone9vs18": {"auc": 0.950, "recall": 0.875, "g_mean": 0.854},
    "abalone19": {"auc": 0.900, "recall": 1.000, "g_mean": 0.840},
    "abalone20": {"auc": 0.990, "recall": 1.000, "g_mean": 0.933},
}
BENCH_DEFAULT = tuple(PUBLISHED)
ABLATE_DEFAULT = ("pc1", "wine3vs5")

log = logging.getLogger("hadr")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration

def default_run_config():
    return {"data": [], "format": None, "label_col": -1, "positive": None,
            "train_fraction": 0.7, "seeds": 10, "jobs": 1, "hadr": HadrConfig().to_json()}


def _deep_update(base, upd):
    for k, v in upd.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def _label_col(text):
    try:
        return int(text)
    except ValueError:
        return text


def _layers(text):
    try:
        sizes = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--layers expects comma-separated ints, got {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("--layers needs at least one positive width")
    return sizes


def resolve_config(args):
    """Built-in defaults < config file < HADR_SEED < command-line flags."""
    cfg = default_run_config()
    if getattr(args, "config", None):
        try:
            _deep_update(cfg, json.loads(Path(args.config).read_text()))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {args.config} is not valid JSON: {e}")
    h = cfg["hadr"]
    env_seed = os.environ.get("HADR_SEED")
    if env_seed is not None:
        try:
            h["seed"] = int(env_seed)
        except ValueError:
            raise UsageError(f"HADR_SEED must be an integer, got {env_seed!r}")
    flags = {"data": "data", "format": "format", "label_col": "label_col",
             "positive": "positive", "train_frac": "train_fraction", "seeds": "seeds",
             "jobs": "jobs"}
    for attr, key in flags.items():
        v = getattr(args, attr, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "seed", None) is not None:
        h["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        h["mode"] = args.mode.replace("-", "_")
    if getattr(args, "rounding", None) is not None:
        h["rounding"] = args.rounding
    if getattr(args, "mlkr_dim", None) is not None:
        h["mlkr"]["out_dim"] = args.mlkr_dim
    if getattr(args, "hidden_activation", None) is not None:
        h["mlp"]["hidden_activation"] = args.hidden_activation
    if getattr(args, "layers", None) is not None:
        h["mlp"]["hidden"] = list(args.layers)
    if getattr(args, "epochs", None) is not None:
        h["mlp"]["epochs"] = args.epochs
    if isinstance(cfg["data"], str):
        cfg["data"] = [cfg["data"]]
    if not 0.0 < float(cfg["train_fraction"]) <= 1.0:
        raise UsageError("--train-frac must be in (0, 1]")
    if int(cfg["seeds"]) < 1:
        raise UsageError("--seeds must be at least 1")
    try:
        hadr_config(cfg)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid configuration: {e}")
    return cfg


def hadr_config(cfg, **overrides):
    overrides.setdefault("n_jobs", int(cfg.get("jobs", 1)))
    return replace(HadrConfig.from_json(copy.deepcopy(cfg["hadr"])), **overrides)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _setup_output(out, cfg, prefix=""):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / f"{prefix}config.json", cfg)
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    fh = logging.FileHandler(out / f"{prefix}log.txt", mode="w")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(fh)
    log.setLevel(logging.INFO)
    log.propagate = False
    log.info("effective config: %s", json.dumps(cfg, sort_keys=True))
    return out


# ---------------------------------------------------------------------------
# datasets

def load_data(source, cfg):
    """``source`` is a file path or the name of a bundled / HADR_DATA_DIR dataset."""
    p = Path(source)
    if p.is_file():
        fmt = cfg["format"]
        if fmt is None and p.suffix.lower() == ".arff":
            fmt = "keel"
        d = load(p, fmt, cfg["label_col"], cfg["positive"])
        return d if d.name else Dataset(d.features, d.labels, d.feature_names, p.stem)
    if datasets.find(source) is not None:
        return datasets.load_named(source, cfg["label_col"], cfg["positive"])
    if source in PUBLISHED or source in datasets.BUNDLED:
        return datasets.load_named(source)  # raises with the HADR_DATA_DIR hint
    raise DataError(f"no such file: {source}")


def split_or_all(d, fraction, seed):
    if fraction >= 1.0:
        return d, None
    sp = stratified_split(d, fraction, seed)
    return sp.train, sp


def canonical_name(d, source):
    stem = Path(source).stem.lower()
    for name in (d.name.lower(), stem):
        if name in PUBLISHED:
            return name
    return d.name or stem


# ---------------------------------------------------------------------------
# commands

def _with_profile(hc, d, source):
    name = canonical_name(d, source)
    prof = datasets.profiled_config(hc, name)
    if prof != hc:
        log.info("dataset profile for %s: mlkr out_dim=%s", name, prof.mlkr.out_dim)
    return prof


def _only_data(cfg):
    if len(cfg["data"]) != 1:
        raise UsageError("this command takes exactly one --data argument")
    return cfg["data"][0]


def _member_log(model):
    for m in model.members:
        parts = [f"block {m.block_id}: rows={m.n_rows} pos={m.n_pos}"]
        if m.transform is not None and m.transform.trace:
            t = m.transform.trace
            parts.append(f"mlkr loss {t[0]:.6g} -> {t[-1]:.6g} in {len(t) - 1} steps")
        hist = m.mlp.history
        parts.append(f"mlp epochs={len(hist['train_loss'])} best_epoch={m.mlp.best_epoch} "
                     f"validated={m.mlp.validated}")
        if hist["train_loss"]:
            parts.append(f"final train loss {hist['train_loss'][-1]:.6g}")
        log.info("; ".join(parts))


def cmd_train(args, cfg):
    source = _only_data(cfg)
    out = _setup_output(args.out, cfg)
    hc = hadr_config(cfg)
    d = load_data(source, cfg)
    hc = _with_profile(hc, d, source)
    train, sp = split_or_all(d, float(cfg["train_fraction"]), hc.seed)
    log.info("dataset %s: n=%d m=%d pos=%d neg=%d; training on %d rows",
             d.name, d.n, d.m, d.n_pos, d.n_neg, train.n)
    model = train_hadr(train, hc, log=log.info)
    _member_log(model)
    model.save(out / "model.json")
    if sp is not None:
        save_dataset(sp.test, out / "test.json")
        write_json(out / "split.json", {"seed": sp.seed, "train_fraction": sp.train_fraction,
                                        "train_index": sp.train_index.tolist(),
                                        "test_index": sp.test_index.tolist()})
    log.info("wrote %d members to %s", model.n_members, out / "model.json")
    print(f"trained {model.n_members} members on {train.n} rows -> {out / 'model.json'}")
    return EXIT_OK


def cmd_eval(args, cfg):
    model_path = Path(args.model)
    if not model_path.is_file():
        raise DataError(f"no such file: {model_path}")
    try:
        model = HadrModel.load(model_path)
    except (ValueError, KeyError) as e:
        raise DataError(f"cannot read model {model_path}: {e}")
    if cfg["data"]:
        test = load_data(_only_data(cfg), cfg)
    else:
        held_out = model_path.parent / "test.json"
        if not held_out.is_file():
            raise UsageError("--data is required (no held-out test.json next to the model)")
        test = load_dataset_json(held_out)
    if test.m != model.n_features:
        raise DataError(f"model expects {model.n_features} features, data has {test.m}")
    run = {"model": str(model_path), "data": cfg["data"], "format": cfg["format"],
           "label_col": cfg["label_col"], "positive": cfg["positive"],
           "model_config": model.config.to_json()}
    out = _setup_output(args.out or model_path.parent, run, prefix="eval_")
    report = evaluate(model, test)
    write_json(out / "report.json", report.to_json())
    (out / "roc.csv").write_text(report.roc_csv())
    log.info("%s on %s: %s", model_path, test.name, report.summary())
    print(report.summary())
    return EXIT_OK


def _cell(source, seed, cfg, mode=None):
    """One (dataset, seed[, mode]) run; errors are returned, not raised."""
    try:
        d = load_data(source, cfg)
        hc = _with_profile(hadr_config(cfg, seed=seed, n_jobs=1), d, source)
        if mode is not None:
            hc = replace(hc, mode=mode)
        sp = stratified_split(d, float(cfg["train_fraction"]), seed)
        r = evaluate(train_hadr(sp.train, hc), sp.test)
        return {"recall": r.recall, "g_mean": r.g_mean, "auc": r.auc}
    except (DataError, BlockTrainingError, ValueError, FloatingPointError) as e:
        return {"error": f"{type(e).__name__}: {e}"}


def _summarize(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "values": values}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "values": values}


def _seed_list(cfg):
    base = int(cfg["hadr"]["seed"])
    return [base + i for i in range(int(cfg["seeds"]))]


def _run_cells(cfg, specs, modes):
    seeds = _seed_list(cfg)
    jobs = [(source, s, m) for source in specs for m in modes for s in seeds]
    n_jobs = int(cfg.get("jobs", 1))
    if n_jobs == 1:
        results = [_cell(source, s, cfg, m) for source, s, m in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_cell)(source, s, cfg, m) for source, s, m in jobs)
    return seeds, dict(zip(jobs, results))


def _dataset_name(source, cfg):
    try:
        return canonical_name(load_data(source, cfg), source)
    except DataError:
        return Path(source).stem.lower()


def _collect(source, seeds, cells, mode):
    runs = [cells[(source, s, mode)] for s in seeds]
    errors = [r["error"] for r in runs if "error" in r]
    if errors:
        return {"error": errors[0], "failed_seeds": len(errors)}
    return {k: _summarize([r[k] for r in runs]) for k in METRICS}


def _fmt(stat):
    if stat is None or stat.get("mean") is None:
        return "n/a"
    return f"{stat['mean']:.3f} ± {stat['std']:.3f}"


def cmd_bench(args, cfg):
    specs = cfg["data"] or list(BENCH_DEFAULT)
    out = _setup_output(args.out, cfg)
    seeds, cells = _run_cells(cfg, specs, [None])
    rows = []
    for source in specs:
        name = _dataset_name(source, cfg)
        row = {"dataset": name, "source": source, "seeds": seeds}
        row.update(_collect(source, seeds, cells, None))
        pub = PUBLISHED.get(name)
        row["published"] = None if pub is None else {
            k: {"value": pub[k], "citation": CITATION[k]} for k in METRICS}
        if "error" in row:
            log.warning("bench %s failed: %s", name, row["error"])
        else:
            log.info("bench %s: %s", name, "; ".join(f"{k} {_fmt(row[k])}" for k in METRICS))
        rows.append(row)
    write_json(out / "bench.json", {"seeds": seeds, "train_fraction": cfg["train_fraction"],
                                    "rows": rows})
    md = bench_markdown(rows, seeds)
    (out / "bench.md").write_text(md)
    print(md, end="")
    return EXIT_OK


def bench_markdown(rows, seeds):
    lines = [f"Mean ± std over {len(seeds)} seeds ({seeds[0]}..{seeds[-1]}); "
             "published single-split values alongside.", "",
             "| dataset | recall | published | g_mean | published | auc | published |",
             "|---|---|---|---|---|---|---|"]
    for row in rows:
        if "error" in row:
            lines.append(f"| {row['dataset']} | error: {row['error']} | | | | | |")
            continue
        cells = [row["dataset"]]
        for k in METRICS:
            pub = row["published"]
            cells += [_fmt(row[k]),
                      "-" if pub is None else f"{pub[k]['value']:.3f} ({pub[k]['citation']})"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def cmd_ablate(args, cfg):
    specs = cfg["data"] or list(ABLATE_DEFAULT)
    out = _setup_output(args.out, cfg)
    seeds, cells = _run_cells(cfg, specs, MODES)
    rows = []
    for source in specs:
        name = _dataset_name(source, cfg)
        for mode in MODES:
            row = {"dataset": name, "mode": mode, "seeds": seeds}
            row.update(_collect(source, seeds, cells, mode))
            rows.append(row)
            log.info("ablate %s %s: %s", name, mode,
                     row.get("error") or "; ".join(f"{k} {_fmt(row[k])}" for k in METRICS))
    write_json(out / "ablation.json", {"seeds": seeds, "rows": rows})
    (out / "ablation.csv").write_text(ablation_csv(rows))
    (out / "ablation.svg").write_text(ablation_svg(rows))
    md = ablation_markdown(rows, seeds)
    (out / "ablation.md").write_text(md)
    print(md, end="")
    return EXIT_OK


def ablation_csv(rows):
    lines = ["dataset,mode,metric,mean,std"]
    for r in rows:
        for k in METRICS:
            if "error" in r or r[k]["mean"] is None:
                lines.append(f"{r['dataset']},{r['mode']},{k},,")
            else:
                lines.append(f"{r['dataset']},{r['mode']},{k},{r[k]['mean']!r},{r[k]['std']!r}")
    return "\n".join(lines) + "\n"


def ablation_markdown(rows, seeds):
    lines = [f"Mean ± std over {len(seeds)} seeds; every mode uses the same seeds and splits.", ""]
    for name in dict.fromkeys(r["dataset"] for r in rows):
        lines += [f"### {name}", "", "| metric | " + " | ".join(MODES) + " |",
                  "|---" * (len(MODES) + 1) + "|"]
        by_mode = {r["mode"]: r for r in rows if r["dataset"] == name}
        for k in METRICS:
            cells = [("error" if "error" in by_mode[m] else _fmt(by_mode[m][k])) for m in MODES]
            lines.append(f"| {k} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def ablation_svg(rows):
    """Grouped bars: one panel per dataset, metric groups, one bar per mode."""
    colors = {"full": "#1f77b4", "dr_mlp": "#ff7f0e", "dbc_mlp": "#2ca02c"}
    names = list(dict.fromkeys(r["dataset"] for r in rows))
    pw, ph, pad, bw = 360, 200, 40, 24
    width, height = pad + len(names) * (pw + pad), ph + 2 * pad + 20
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">']
    for i, name in enumerate(names):
        x0, y0 = pad + i * (pw + pad), pad
        out.append(f'<text x="{x0}" y="{y0 - 12}" font-size="13">{name}</text>')
        out.append(f'<line x1="{x0}" y1="{y0 + ph}" x2="{x0 + pw}" y2="{y0 + ph}" stroke="black"/>')
        by_mode = {r["mode"]: r for r in rows if r["dataset"] == name}
        group = pw / len(METRICS)
        for j, k in enumerate(METRICS):
            gx = x0 + j * group + (group - bw * len(MODES)) / 2
            for b, mode in enumerate(MODES):
                r = by_mode.get(mode, {})
                v = r.get(k, {}).get("mean") if "error" not in r else None
                h = 0.0 if v is None else v * ph
                out.append(f'<rect x="{gx + b * bw:.1f}" y="{y0 + ph - h:.1f}" width="{bw - 2}" '
                           f'height="{h:.1f}" fill="{colors[mode]}"/>')
            out.append(f'<text x="{x0 + j * group + group / 2:.1f}" y="{y0 + ph + 14}" '
                       f'text-anchor="middle">{k}</text>')
    lx = pad
    for mode in MODES:
        out.append(f'<rect x="{lx}" y="{height - 16}" width="10" height="10" fill="{colors[mode]}"/>')
        out.append(f'<text x="{lx + 14}" y="{height - 7}">{mode}</text>')
        lx += 90
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_inspect(args, cfg):
    source = _only_data(cfg)
    hc = hadr_config(cfg)
    d = load_data(source, cfg)
    train, _ = split_or_all(d, float(cfg["train_fraction"]), hc.seed)
    stats = dbc.compute_stats(train, hc.rounding)
    blocks = dbc.construct_blocks(train, stats, make_rng(hc.seed, "dbc"))
    info = {"dataset": d.name, "n": d.n, "m": d.m, "n_pos": d.n_pos, "n_neg": d.n_neg,
            "train_rows": train.n, "ir": stats.ir, "ir_star": stats.ir_star,
            "rounding": stats.rounding, "n_min": stats.n_min, "n_maj": stats.n_maj,
            "blocks": dbc.block_membership(blocks)}
    if args.out:
        out = _setup_output(args.out, cfg)
        write_json(out / "inspect.json", info)
    brief = {k: v for k, v in info.items() if k != "blocks"}
    brief["block_sizes"] = [b.data.n for b in blocks]
    print(json.dumps(brief, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("data")
    g.add_argument("--data", nargs="+", help="data file(s) or dataset names (e.g. pc1)")
    g.add_argument("--format", choices=["csv", "keel", "json"])
    g.add_argument("--label-col", type=_label_col, help="label column name or index")
    g.add_argument("--positive", help="label value of the positive (minority) class")
    g.add_argument("--train-frac", type=float, help="training fraction of each split (0.7)")
    h = common.add_argument_group("model")
    h.add_argument("--config", help="JSON config file (flags override it)")
    h.add_argument("--seed", type=int, help="master seed (fallback: $HADR_SEED, then 0)")
    h.add_argument("--mlkr-dim", type=int, help="MLKR output dimension l")
    h.add_argument("--rounding", choices=["floor", "ceil", "nearest"])
    h.add_argument("--mode", choices=["full", "dr-mlp", "dbc-mlp"])
    h.add_argument("--hidden-activation", choices=["relu", "sigmoid"])
    h.add_argument("--layers", type=_layers, help="hidden widths, e.g. 10,10")
    h.add_argument("--epochs", type=int, help="MLP training epochs")
    h.add_argument("--jobs", type=int, help="parallel worker processes")

    p = _Parser(prog="hadr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    t = sub.add_parser("train", parents=[common], help="train a model bundle")
    t.add_argument("--out", required=True)
    e = sub.add_parser("eval", parents=[common], help="evaluate a model bundle")
    e.add_argument("--model", required=True)
    e.add_argument("--out")
    b = sub.add_parser("bench", parents=[common], help="multi-seed benchmark table")
    b.add_argument("--seeds", type=int, help="number of seeds (10)")
    b.add_argument("--out", required=True)
    a = sub.add_parser("ablate", parents=[common], help="compare full / dr-mlp / dbc-mlp")
    a.add_argument("--seeds", type=int, help="number of seeds (10)")
    a.add_argument("--out", required=True)
    i = sub.add_parser("inspect", parents=[common], help="imbalance and block statistics")
    i.add_argument("--out")
    return p


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "bench": cmd_bench,
            "ablate": cmd_ablate, "inspect": cmd_inspect}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"hadr: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"hadr: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (BlockTrainingError, FloatingPointError) as e:
        print(f"hadr: training failed: {e}", file=sys.stderr)
        return EXIT_TRAIN
    finally:
        for hd in list(log.handlers):
            log.removeHandler(hd)
            hd.close()


if __name__ == "__main__":
    sys.exit(main())
