"""Two-stage balance simulator: balance-type classifier followed by per-type regressors."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..portfolio import CustomerRecord, PortfolioError, read_records, write_records
from .metrics import rmse, wape, weighted_f1
from .smote import smote_nc
from .trees import CLASSIFICATION, REGRESSION, NotFittedError, TreeModel

DEFAULT_CUTOFF = 75.81

SMALL_MEDIUM, LARGE, INACTIVE_OR_FULL_PAYER = 0, 1, 2
N_BALANCE_CLASSES = 3

FEATURE_NAMES = (
    "tc_1", "tc_2", "tc_3", "ob_1", "ob_2", "ob_3", "pay_1", "pay_2", "pay_3",
    "mp_r", "limit", "int_annual", "bureau_score", "months_on_book", "limit_post", "ha_p",
)
CATEGORICAL_FEATURES = ("mp_r", "ha_p")
TRAINING_EXTRA_COLUMNS = ("limit_post", "ha_p", "target_rbar")

MODEL_FORMAT = "creditrl.two-stage-balance-model"
MODEL_VERSION = 1


class PredictorError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingRow:
    record: CustomerRecord
    limit_post: float
    ha_p: int
    target_rbar: float


def class_of(rbar: float, cutoff: float = DEFAULT_CUTOFF) -> int:
    if rbar < 0:
        raise ValueError("balance must be >= 0")
    if rbar == 0:
        return INACTIVE_OR_FULL_PAYER
    return SMALL_MEDIUM if rbar <= cutoff else LARGE


def classes_of(rbar: np.ndarray, cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    rbar = np.asarray(rbar, dtype=float)
    return np.where(rbar == 0, INACTIVE_OR_FULL_PAYER, np.where(rbar <= cutoff, SMALL_MEDIUM, LARGE))


def predictor_matrix(records: Sequence[CustomerRecord], limit_post, ha_p) -> np.ndarray:
    limit_post = np.broadcast_to(np.asarray(limit_post, dtype=float), (len(records),))
    ha_p = np.broadcast_to(np.asarray(ha_p, dtype=float), (len(records),))
    X = np.empty((len(records), len(FEATURE_NAMES)))
    for i, r in enumerate(records):
        X[i, :14] = (*r.tc, *r.ob, *r.pay, r.mp_r, r.limit, r.int_annual, r.bureau_score, r.months_on_book)
    X[:, 14] = limit_post
    X[:, 15] = ha_p
    return X


def training_arrays(rows: Sequence[TrainingRow]) -> tuple[np.ndarray, np.ndarray]:
    X = predictor_matrix([r.record for r in rows], [r.limit_post for r in rows], [r.ha_p for r in rows])
    return X, np.array([r.target_rbar for r in rows], dtype=float)


@dataclass
class TwoStageConfig:
    cutoff: float = DEFAULT_CUTOFF
    smote: bool = True
    smote_k: int = 5
    max_depth: int = 8
    min_samples_leaf: int = 5
    regressor_max_depth: int = 8
    regressor_min_samples_leaf: int = 5
    n_estimators: int = 1
    min_rows_per_class: int = 50
    seed: int = 0


@dataclass
class TwoStageBalanceModel:
    classifier: TreeModel
    regressors: dict  # class label -> TreeModel or None
    cutoff: float = DEFAULT_CUTOFF
    feature_names: tuple = FEATURE_NAMES
    config: dict = field(default_factory=dict)

    def predict_class(self, X: np.ndarray) -> np.ndarray:
        if not self.classifier.fitted:
            raise NotFittedError("two-stage model is not fitted")
        return self.classifier.predict(np.asarray(X, dtype=float))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        cls = self.predict_class(X)
        out = np.zeros(len(X))
        for c in (SMALL_MEDIUM, LARGE):
            mask = cls == c
            if mask.any():
                reg = self.regressors.get(c)
                if reg is None:
                    raise PredictorError(f"classifier predicted class {c} but no regressor was fitted for it")
                out[mask] = np.maximum(reg.predict(X[mask]), 0.0)
        return out

    def predict_response(self, records: Sequence[CustomerRecord], action: int, beta: float) -> np.ndarray:
        """Predicted balance for every record after taking ``action`` on its limit."""
        limits = np.array([r.limit for r in records], dtype=float)
        limit_post = limits * (1.0 + beta) if action else limits
        return self.predict(predictor_matrix(records, limit_post, int(action)))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "cutoff": self.cutoff,
            "feature_names": list(self.feature_names),
            "config": self.config,
            "classifier": self.classifier.to_dict(),
            "regressors": {str(c): (m.to_dict() if m is not None else None) for c, m in self.regressors.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoStageBalanceModel":
        if d.get("format") != MODEL_FORMAT:
            raise PredictorError(f"not a two-stage model file (format={d.get('format')!r})")
        if d.get("version") != MODEL_VERSION:
            raise PredictorError(f"unsupported model version {d.get('version')!r}")
        return cls(
            classifier=TreeModel.from_dict(d["classifier"]),
            regressors={int(c): (TreeModel.from_dict(m) if m is not None else None)
                        for c, m in d["regressors"].items()},
            cutoff=d["cutoff"],
            feature_names=tuple(d["feature_names"]),
            config=d.get("config", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TwoStageBalanceModel":
        path = Path(path)
        if not path.exists():
            raise PredictorError(f"missing model file: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def predict_rbar(model: TwoStageBalanceModel, X: np.ndarray) -> np.ndarray:
    return model.predict(X)


def fit_two_stage(X: np.ndarray, target_rbar: np.ndarray,
                  config: Optional[TwoStageConfig] = None) -> TwoStageBalanceModel:
    """Fit the balance-type classifier (SMOTE-NC balanced if enabled) and the class 0/1 regressors.

    Regressors see only the original rows of their true class. A portfolio where
    every target is zero yields a model that predicts zero everywhere.
    """
    cfg = config or TwoStageConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(target_rbar, dtype=float)
    if len(X) != len(y) or len(y) == 0:
        raise PredictorError("insufficient rows: need a non-empty table with one target per row")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise PredictorError("targets must be finite and >= 0")
    labels = classes_of(y, cfg.cutoff)
    present = sorted(set(labels.tolist()))

    classifier = TreeModel(CLASSIFICATION, cfg.max_depth, cfg.min_samples_leaf, cfg.n_estimators,
                           n_classes=N_BALANCE_CLASSES, seed=cfg.seed)
    if present == [INACTIVE_OR_FULL_PAYER]:
        classifier.fit(X, labels)
        return TwoStageBalanceModel(classifier, {SMALL_MEDIUM: None, LARGE: None}, cfg.cutoff, config=asdict(cfg))
    if len(present) == 1:
        raise PredictorError(f"degenerate single-class data: every row is balance class {present[0]}")

    Xc, yc = X, labels
    if cfg.smote:
        cat = [FEATURE_NAMES.index(c) for c in CATEGORICAL_FEATURES] if X.shape[1] == len(FEATURE_NAMES) else []
        res = smote_nc(X, labels, categorical=cat, k=cfg.smote_k, seed=cfg.seed)
        Xc, yc = res.X, res.y
    counts = np.bincount(yc, minlength=N_BALANCE_CLASSES)
    short = [c for c in present if counts[c] < cfg.min_rows_per_class]
    if short:
        raise PredictorError(f"insufficient rows: classes {short} have fewer than {cfg.min_rows_per_class} rows")
    classifier.fit(Xc, yc)

    regressors = {}
    for c in (SMALL_MEDIUM, LARGE):
        mask = labels == c
        if not mask.any():
            regressors[c] = None
            continue
        regressors[c] = TreeModel(REGRESSION, cfg.regressor_max_depth, cfg.regressor_min_samples_leaf,
                                  cfg.n_estimators, seed=cfg.seed + 1 + c).fit(X[mask], y[mask])
    return TwoStageBalanceModel(classifier, regressors, cfg.cutoff, config=asdict(cfg))


def evaluate_two_stage(model: TwoStageBalanceModel, X: np.ndarray, target_rbar: np.ndarray,
                       train_mean: Optional[float] = None) -> dict:
    """Held-out metrics; ``train_mean`` adds the constant-mean baseline's errors."""
    y = np.asarray(target_rbar, dtype=float)
    pred = model.predict(X)
    out = {
        "weighted_f1": weighted_f1(classes_of(y, model.cutoff), model.predict_class(X)),
        "rmse": rmse(y, pred),
        "wape": wape(y, pred),
    }
    if train_mean is not None:
        const = np.full_like(y, train_mean)
        out["mean_rmse"] = rmse(y, const)
        out["mean_wape"] = wape(y, const)
    return out


def split_indices(n: int, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def read_training_table(path: str | Path) -> list[TrainingRow]:
    records, extras = read_records(path, TRAINING_EXTRA_COLUMNS)
    rows = []
    for lineno, (rec, (lp, ha, tgt)) in enumerate(zip(records, extras), start=2):
        try:
            row = TrainingRow(rec, float(lp), int(ha), float(tgt))
        except ValueError:
            raise PortfolioError(f"row {lineno}: cannot parse limit_post/ha_p/target_rbar") from None
        if row.ha_p not in (0, 1) or row.target_rbar < 0 or row.limit_post <= 0:
            raise PortfolioError(f"row {lineno}: ha_p must be 0/1, target_rbar >= 0, limit_post > 0")
        rows.append(row)
    return rows


def write_training_table(path: str | Path, rows: Sequence[TrainingRow]) -> None:
    write_records(path, [r.record for r in rows], TRAINING_EXTRA_COLUMNS,
                  [[repr(float(r.limit_post)), str(r.ha_p), repr(float(r.target_rbar))] for r in rows])
