"""Train / predict / evaluate the block ensemble.

Training: standardise, split the training set into nearly balanced blocks,
fit one MLKR transform per block, embed the block and fit one MLP on it.
Prediction: every member embeds the (standardised) rows with its own
transform and scores them with its own MLP; labels come from a majority vote
over members thresholded at 0.5, and the mean member probability serves as a
continuous score for ROC AUC.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import dbc
from .data import DataError, Dataset, Standardizer, fit_standardizer
from .metrics import evaluate_predictions
from .mlkr import MlkrConfig, MlkrTransform, embed, project_by_m_eigvecs, train_mlkr
from .mlp import MlpModel, MlpTrainConfig, train_mlp
from .numerics import derive_seed, make_rng

MODES = ("full", "dr_mlp", "dbc_mlp")


class BlockTrainingError(RuntimeError):
    """A member failed to train; ``block`` is its block index."""

    def __init__(self, block, cause):
        super().__init__(f"block {block}: {cause}")
        self.block = block
        self.cause = cause


@dataclass(frozen=True)
class HadrConfig:
    seed: int = 0
    mode: str = "full"
    rounding: str = "nearest"
    standardize: str = "zscore"  # 'zscore' | 'whiten' | 'none'
    mlkr: MlkrConfig = field(default_factory=MlkrConfig)
    mlp: MlpTrainConfig = field(default_factory=MlpTrainConfig)
    projection: str = "embed"  # 'embed' (x -> A x) | 'eigvecs' (top eigvecs of M)
    shared_transform: bool = False
    vote_threshold: float = 0.5
    tie_rule: str = "positive"
    n_jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tie_rule not in ("positive", "negative"):
            raise ValueError("tie_rule must be 'positive' or 'negative'")
        if self.projection not in ("embed", "eigvecs"):
            raise ValueError("projection must be 'embed' or 'eigvecs'")

    def to_json(self):
        d = asdict(self)
        d["mlp"]["hidden"] = list(self.mlp.hidden)
        d.pop("n_jobs")
        return d

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        obj["mlkr"] = MlkrConfig(**obj["mlkr"])
        mlp = dict(obj["mlp"])
        mlp["hidden"] = tuple(mlp["hidden"])
        obj["mlp"] = MlpTrainConfig(**mlp)
        return cls(**obj)


@dataclass
class Member:
    block_id: int
    transform: MlkrTransform | None
    mlp: MlpModel
    projection: str = "embed"
    out_dim: int | None = None
    n_rows: int = 0
    n_pos: int = 0

    def features(self, X):
        if self.transform is None:
            return X
        if self.projection == "eigvecs":
            return project_by_m_eigvecs(self.transform, X, self.out_dim)
        return embed(self.transform, X)

    def predict_proba(self, X):
        return self.mlp.predict_proba(self.features(X))

    def to_json(self):
        return {"block_id": self.block_id, "projection": self.projection,
                "out_dim": self.out_dim, "n_rows": self.n_rows, "n_pos": self.n_pos,
                "transform": None if self.transform is None else self.transform.to_json(),
                "mlp": self.mlp.to_json()}

    @classmethod
    def from_json(cls, obj):
        t = obj["transform"]
        return cls(obj["block_id"], None if t is None else MlkrTransform.from_json(t),
                   MlpModel.from_json(obj["mlp"]), obj["projection"], obj["out_dim"],
                   obj["n_rows"], obj["n_pos"])


@dataclass(frozen=True)
class Prediction:
    member_probabilities: np.ndarray
    vote_label: int
    mean_score: float
    positive_votes: int

    @property
    def vote_margin(self):
        """Positive minus negative votes; near zero flags an unstable sample."""
        return 2 * self.positive_votes - self.member_probabilities.size


@dataclass
class Predictions:
    """Column-wise ensemble output; iterating yields :class:`Prediction`."""

    member_probabilities: np.ndarray  # (n_samples, n_members)
    vote_labels: np.ndarray
    mean_scores: np.ndarray
    positive_votes: np.ndarray

    def __len__(self):
        return self.vote_labels.size

    def __getitem__(self, i):
        return Prediction(self.member_probabilities[i], int(self.vote_labels[i]),
                          float(self.mean_scores[i]), int(self.positive_votes[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def majority_vote(probs, threshold=0.5, tie_rule="positive"):
    """Combine an ``(n_samples, n_members)`` probability matrix.

    Returns ``(labels, mean_scores, positive_votes)``.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    n_members = probs.shape[1]
    votes = np.sum(probs >= threshold, axis=1)
    twice = 2 * votes
    labels = twice > n_members
    if tie_rule == "positive":
        labels |= twice == n_members
    return labels.astype(np.int64), probs.mean(axis=1), votes


@dataclass
class HadrModel:
    standardizer: Standardizer | None
    members: list
    config: HadrConfig
    n_features: int
    stats: dbc.ImbalanceStats | None = None
    shared: MlkrTransform | None = None

    @property
    def n_members(self):
        return len(self.members)

    def _prep(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X if self.standardizer is None else self.standardizer.transform(X)

    def predict(self, X):
        if isinstance(X, Dataset):
            X = X.features
        Z = self._prep(X)
        P = np.column_stack([m.predict_proba(Z) for m in self.members])
        labels, scores, votes = majority_vote(P, self.config.vote_threshold, self.config.tie_rule)
        return Predictions(P, labels, scores, votes)

    def to_json(self):
        return {"format": "hadr-model/1", "seed": self.config.seed,
                "n_features": self.n_features,
                "config": self.config.to_json(),
                "standardizer": None if self.standardizer is None else self.standardizer.to_json(),
                "stats": None if self.stats is None else asdict(self.stats),
                "members": [m.to_json() for m in self.members]}

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != "hadr-model/1":
            raise ValueError("not a hadr model bundle")
        s = obj["standardizer"]
        return cls(None if s is None else Standardizer.from_json(s),
                   [Member.from_json(m) for m in obj["members"]],
                   HadrConfig.from_json(obj["config"]), obj["n_features"],
                   None if obj["stats"] is None else dbc.ImbalanceStats(**obj["stats"]))

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def _seed_int(master, tag, i):
    return int(derive_seed(master, tag, i).generate_state(1)[0])


def _fit_member(i, X, y, cfg, shared, log):
    mlkr_cfg = replace(cfg.mlkr, seed=_seed_int(cfg.seed, "mlkr", i))
    transform, out_dim = None, None
    if cfg.mode != "dbc_mlp":
        if shared is not None:
            transform = shared
        elif cfg.projection == "eigvecs":
            out_dim = mlkr_cfg.resolve_dim(X.shape[1])
            transform = train_mlkr(X, y, replace(mlkr_cfg, out_dim=X.shape[1]))
        else:
            transform = train_mlkr(X, y, mlkr_cfg)
        if cfg.projection == "eigvecs" and out_dim is None:
            out_dim = mlkr_cfg.resolve_dim(X.shape[1])
    member = Member(i, transform, None, cfg.projection, out_dim, int(y.size), int(y.sum()))
    notes = []
    member.mlp = train_mlp(member.features(X), y, cfg.mlp, make_rng(cfg.seed, "mlp", i),
                           log=notes.append)
    if log is not None:
        for msg in notes:
            log(f"block {i}: {msg}")
    return member


def train_hadr(train, cfg=HadrConfig(), log=None):
    """Fit the ensemble on a training :class:`Dataset`.

    ``cfg.mode`` selects the full pipeline or one of the ablations:
    ``'dr_mlp'`` (one MLKR + one MLP on the whole imbalanced set) and
    ``'dbc_mlp'`` (blocks, but no dimensionality reduction).
    """
    train.require_both_classes()
    std = None
    X = train.features
    if cfg.standardize != "none":
        std = fit_standardizer(train, cfg.standardize)
        X = std.transform(X)
    y = train.labels

    shared = None
    if cfg.shared_transform and cfg.mode != "dbc_mlp":
        sq = cfg.projection == "eigvecs"
        scfg = replace(cfg.mlkr, seed=_seed_int(cfg.seed, "mlkr-shared", 0),
                       out_dim=X.shape[1] if sq else cfg.mlkr.out_dim)
        shared = train_mlkr(X, y, scfg)

    if cfg.mode == "dr_mlp":
        stats = None
        parts = [(np.arange(y.size))]
    else:
        stats = dbc.compute_stats(train, cfg.rounding)
        blocks = dbc.construct_blocks(train.with_features(X), stats, make_rng(cfg.seed, "dbc"))
        parts = [b.source_row_ids for b in blocks]
        if log is not None:
            log(f"{stats.ir_star} blocks (ir={stats.ir:.2f}, n_min={stats.n_min}, "
                f"n_maj={stats.n_maj}, rounding={stats.rounding})")

    def job(i, rows):
        try:
            return _fit_member(i, X[rows], y[rows], cfg, shared, log if cfg.n_jobs == 1 else None)
        except (ValueError, FloatingPointError, RuntimeError) as e:
            raise BlockTrainingError(i, e) from e

    if cfg.n_jobs == 1:
        members = [job(i, rows) for i, rows in enumerate(parts)]
    else:
        members = Parallel(n_jobs=cfg.n_jobs)(delayed(job)(i, rows) for i, rows in enumerate(parts))
    return HadrModel(std, members, cfg, train.m, stats, shared)


def predict(model, X):
    return model.predict(X)


def evaluate(model, test, seed=None):
    """Score ``model`` on ``test``: vote labels for Recall / G-mean, mean
    member probability for AUC."""
    if test.n_pos == 0 or test.n_neg == 0:
        raise DataError(f"AUC is undefined: test set {test.name!r} has a single class "
                        f"(pos={test.n_pos}, neg={test.n_neg})")
    pred = model.predict(test.features)
    return evaluate_predictions(test.labels, pred.vote_labels, pred.mean_scores,
                                seed=model.config.seed if seed is None else seed,
                                dataset=test.name)


def ablate(train, test, mode, cfg=HadrConfig(), log=None):
    model = train_hadr(train, replace(cfg, mode=mode), log=log)
    return evaluate(model, test)
