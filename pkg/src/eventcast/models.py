"""Uniform build / fit / predict / save layer over every model family.

Model kinds: "random" (constant 0.5 score, the tie-aware chance
baseline), "rf", "ada", and the nets "ffnn1", "ffnn2", "lstm" (gated
recurrent), "rnn" (plain tanh recurrence).

Input handling: flat-matrix representations feed nets as-is (nets that
want sequences see them as length-1 sequences); stacked tensors are
flattened for "ffnn1" and passed through for the rest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ensemble import (BoostModel, ForestModel, ada_predict, ada_train,
                       rf_predict, rf_train)
from .neural import NetSpec, OptimizerConfig, predict_proba as net_predict, train_net
from .trees import DecisionTree

MODEL_KINDS = ("random", "rf", "ada", "ffnn1", "ffnn2", "lstm", "rnn")
_NEURAL = ("ffnn1", "ffnn2", "lstm", "rnn")
_FORMAT_TAG = "eventcast-model-v1"


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    estimators: int = 200           # rf
    iterations: int = 50            # ada
    hidden: int = 64                # nets
    per_feature_hidden: int = 8     # ffnn2
    subspace: int | None = None     # rf; None = ceil(sqrt(m))
    opt: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.estimators < 1 or self.iterations < 1:
            raise ValueError("estimators and iterations must be >= 1")

    @property
    def is_neural(self) -> bool:
        return self.kind in _NEURAL

    def net_spec(self) -> NetSpec:
        if self.kind == "ffnn1":
            return NetSpec("ffnn1", hidden=self.hidden)
        if self.kind == "ffnn2":
            return NetSpec("ffnn2", hidden=self.hidden,
                           per_feature_hidden=self.per_feature_hidden)
        if self.kind == "lstm":
            return NetSpec("recurrent", hidden=self.hidden, cell="gated")
        if self.kind == "rnn":
            return NetSpec("recurrent", hidden=self.hidden, cell="simple")
        raise ValueError(f"{self.kind} has no network architecture")

    def fingerprint(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "rf":
            d["estimators"] = self.estimators
            d["subspace"] = self.subspace
        elif self.kind == "ada":
            d["iterations"] = self.iterations
        elif self.is_neural:
            d["hidden"] = self.hidden
            if self.kind == "ffnn2":
                d["per_feature_hidden"] = self.per_feature_hidden
            d["optimizer"] = {
                "learning_rate": self.opt.learning_rate,
                "decay": self.opt.decay, "batch_size": self.opt.batch_size,
                "epochs": self.opt.epochs, "momentum": self.opt.momentum,
                "schedule": "inverse_time"}
        return d


def _shape_input(spec: ModelSpec, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if spec.kind == "ffnn1":
        return X.reshape(X.shape[0], -1) if X.ndim == 3 else X
    if spec.kind in ("ffnn2", "lstm", "rnn") and X.ndim == 2:
        return X[:, None, :]  # length-1 sequence per row
    if not spec.is_neural and X.ndim == 3:
        return X.reshape(X.shape[0], -1)  # trees take flattened sequences
    return X


@dataclass
class FittedModel:
    spec: ModelSpec
    seed: int
    payload: object = None          # family-specific trained state
    train_alpha: float | None = None
    epoch_losses: list = field(default_factory=list)

    def predict_proba(self, X) -> np.ndarray:
        X = _shape_input(self.spec, X)
        if self.spec.kind == "random":
            return np.full(X.shape[0], 0.5)
        if self.spec.kind == "rf":
            return rf_predict(self.payload, X)
        if self.spec.kind == "ada":
            return ada_predict(self.payload, X)
        net, params = self.payload
        return net_predict(net, params, X)


def fit_model(spec: ModelSpec, X, y, seed, workers=1) -> FittedModel:
    """Train one model on already-represented rows."""
    X = _shape_input(spec, np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    if spec.kind == "random":
        return FittedModel(spec=spec, seed=seed)
    if spec.kind == "rf":
        forest = rf_train(X, y, spec.estimators, seed,
                          subspace=spec.subspace, workers=workers)
        return FittedModel(spec=spec, seed=seed, payload=forest)
    if spec.kind == "ada":
        boost = ada_train(X, y, spec.iterations, seed)
        return FittedModel(spec=spec, seed=seed, payload=boost)
    alpha = float(np.mean(y == 1))
    if not 0.0 < alpha < 1.0:
        raise ValueError("neural training needs both classes present")
    net = spec.net_spec()
    params, losses = train_net(net, X, y, alpha, spec.opt, seed)
    return FittedModel(spec=spec, seed=seed, payload=(net, params),
                       train_alpha=alpha, epoch_losses=losses)


def _spec_to_json(spec: ModelSpec) -> str:
    return json.dumps({
        "kind": spec.kind, "estimators": spec.estimators,
        "iterations": spec.iterations, "hidden": spec.hidden,
        "per_feature_hidden": spec.per_feature_hidden,
        "subspace": spec.subspace,
        "opt": [spec.opt.learning_rate, spec.opt.decay, spec.opt.batch_size,
                spec.opt.epochs, spec.opt.momentum]}, sort_keys=True)


def _spec_from_json(text: str) -> ModelSpec:
    d = json.loads(text)
    lr, decay, bs, ep, mu = d.pop("opt")
    return ModelSpec(opt=OptimizerConfig(learning_rate=lr, decay=decay,
                                         batch_size=int(bs), epochs=int(ep),
                                         momentum=mu), **d)


def save_model(model: FittedModel, path) -> None:
    """Serialize to one .npz with a format tag; round-trip stable."""
    arrays: dict[str, np.ndarray] = {
        "format": np.array(_FORMAT_TAG),
        "spec": np.array(_spec_to_json(model.spec)),
        "seed": np.array(model.seed, dtype=np.int64),
    }
    kind = model.spec.kind
    if kind == "rf":
        forest: ForestModel = model.payload
        _pack_trees(arrays, [t for t in forest.trees], "tree")
        arrays["tree_seeds"] = forest.tree_seeds
        arrays["subspace"] = np.array(forest.subspace, dtype=np.int64)
        arrays["bootstrap"] = np.array(int(forest.bootstrap), dtype=np.int64)
    elif kind == "ada":
        boost: BoostModel = model.payload
        _pack_trees(arrays, [s for s, _ in boost.stumps], "stump")
        arrays["alphas"] = np.array([a for _, a in boost.stumps])
        arrays["iterations"] = np.array(boost.iterations, dtype=np.int64)
        arrays["discarded"] = np.array(boost.discarded, dtype=np.int64)
    elif kind != "random":
        net, params = model.payload
        arrays["alpha"] = np.array(model.train_alpha)
        arrays["epoch_losses"] = np.array(model.epoch_losses)
        for name, value in params.items():
            arrays[f"param_{name}"] = value
    np.savez(path, **arrays)


def _pack_trees(arrays: dict, trees: list[DecisionTree], prefix: str) -> None:
    counts = np.array([t.n_nodes for t in trees], dtype=np.int64)
    arrays[f"{prefix}_counts"] = counts
    if trees:
        arrays[f"{prefix}_feature"] = np.concatenate([t.feature for t in trees])
        arrays[f"{prefix}_threshold"] = np.concatenate([t.threshold for t in trees])
        arrays[f"{prefix}_left"] = np.concatenate([t.left for t in trees])
        arrays[f"{prefix}_right"] = np.concatenate([t.right for t in trees])
        arrays[f"{prefix}_leaf"] = np.concatenate([t.leaf_p1 for t in trees])


def _unpack_trees(data, prefix: str) -> list[DecisionTree]:
    counts = data[f"{prefix}_counts"]
    trees = []
    offset = 0
    for c in counts:
        c = int(c)
        sl = slice(offset, offset + c)
        trees.append(DecisionTree(
            feature=np.ascontiguousarray(data[f"{prefix}_feature"][sl]),
            threshold=np.ascontiguousarray(data[f"{prefix}_threshold"][sl]),
            left=np.ascontiguousarray(data[f"{prefix}_left"][sl]),
            right=np.ascontiguousarray(data[f"{prefix}_right"][sl]),
            leaf_p1=np.ascontiguousarray(data[f"{prefix}_leaf"][sl])))
        offset += c
    return trees


def load_model(path) -> FittedModel:
    with np.load(path, allow_pickle=False) as data:
        if str(data["format"]) != _FORMAT_TAG:
            raise ValueError(f"unrecognized model file format in {path}")
        spec = _spec_from_json(str(data["spec"]))
        seed = int(data["seed"])
        if spec.kind == "random":
            return FittedModel(spec=spec, seed=seed)
        if spec.kind == "rf":
            forest = ForestModel(trees=_unpack_trees(data, "tree"),
                                 tree_seeds=data["tree_seeds"].copy(),
                                 subspace=int(data["subspace"]),
                                 bootstrap=bool(int(data["bootstrap"])))
            return FittedModel(spec=spec, seed=seed, payload=forest)
        if spec.kind == "ada":
            stumps = list(zip(_unpack_trees(data, "stump"),
                              [float(a) for a in data["alphas"]]))
            boost = BoostModel(stumps=stumps,
                               iterations=int(data["iterations"]),
                               discarded=int(data["discarded"]))
            return FittedModel(spec=spec, seed=seed, payload=boost)
        params = {key[len("param_"):]: data[key].copy()
                  for key in data.files if key.startswith("param_")}
        return FittedModel(spec=spec, seed=seed,
                           payload=(spec.net_spec(), params),
                           train_alpha=float(data["alpha"]),
                           epoch_losses=[float(v) for v in data["epoch_losses"]])
