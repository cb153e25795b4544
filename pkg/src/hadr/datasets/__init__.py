"""Benchmark datasets shipped with the package.

The files are the public KEEL / PROMISE distributions:

==============  ================================  =====  ==  =====
name            file                              n      m   ir
==============  ================================  =====  ==  =====
pc1             pc1.arff                          1109   21  13.4
wine3vs5        winequality-red-3_vs_5.dat        691    11  68.1
abalone9vs18    abalone9-18.dat                   731    8   16.4
abalone20       abalone-20_vs_8-9-10.dat          1916   8   72.7
==============  ================================  =====  ==  =====

``PROFILES`` holds per-dataset settings that replace automatic defaults (an
explicit setting always wins); see :func:`profiled_config`.

Other datasets (e.g. pc3, pc4, mw1, abalone19) are looked up in the directory
named by ``HADR_DATA_DIR`` under ``<name>.dat``, ``<name>.arff`` or
``<name>.csv``.
"""

import os
from pathlib import Path

from ..data import DataError, load

HERE = Path(__file__).parent

BUNDLED = {
    "pc1": "pc1.arff",
    "wine3vs5": "winequality-red-3_vs_5.dat",
    "abalone9vs18": "abalone9-18.dat",
    "abalone20": "abalone-20_vs_8-9-10.dat",
}


# Wine3vs5 training splits hold 7 positives, so each block has 14 rows and 11
# features; a 2-D projection overfits far less than the half-width default.
PROFILES = {
    "wine3vs5": {"mlkr": {"out_dim": 2}},
}


def profiled_config(cfg, name):
    """``cfg`` (a :class:`~hadr.ensemble.HadrConfig`) with the dataset profile
    filled into settings that are still automatic (``None``)."""
    from dataclasses import replace

    prof = PROFILES.get(name, {})
    out_dim = prof.get("mlkr", {}).get("out_dim")
    if out_dim is not None and cfg.mlkr.out_dim is None:
        cfg = replace(cfg, mlkr=replace(cfg.mlkr, out_dim=out_dim))
    return cfg


def find(name):
    """Path of dataset ``name`` or ``None`` if it is not available."""
    data_dir = os.environ.get("HADR_DATA_DIR")
    if data_dir:
        for suffix in (".dat", ".arff", ".csv", ".json"):
            p = Path(data_dir) / f"{name}{suffix}"
            if p.is_file():
                return p
    if name in BUNDLED:
        return HERE / BUNDLED[name]
    return None


def load_named(name, label_column=-1, positive_label=None):
    path = find(name)
    if path is None:
        raise DataError(f"dataset {name!r} is not bundled and was not found in "
                        f"HADR_DATA_DIR={os.environ.get('HADR_DATA_DIR', '')!r}")
    fmt = "csv" if path.suffix == ".csv" else ("json" if path.suffix == ".json" else "keel")
    d = load(path, fmt, label_column, positive_label)
    return d if d.name == name else type(d)(d.features, d.labels, d.feature_names, name)
