"""Train/evaluate the classifier and run classify-then-segment on images.

These functions back the CLI verbs. They print their results as stable
`key value` lines (floats in shortest round-trip form) so that runs are
byte-reproducible under a fixed seed, and they write one output file per
image so batch runs never contend on a writer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boosting import (
    BoostedModel,
    Dataset,
    GbmConfig,
    fit_xgboost,
    get_loss,
    load_model,
    predict_score,
    save_model,
)
from .errors import ConfigError, NoLesionRegionError
from .fcm import FcmConfig, select_lesion_cluster
from .features import DESCRIPTOR_DIM, builtin_descriptor, read_features
from .imaging import ImageGrid, SegMask, dice, load_image, normalize, save_image
from .levelset import LevelSetParams, derive_params, fuzzy_level_set_segment


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def correct(self) -> int:
        return self.tp + self.tn


def confusion_from_predictions(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).astype(int)
    p = np.asarray(y_pred).astype(int)
    if t.shape != p.shape:
        raise ValueError("prediction and truth lengths differ")
    return ConfusionMatrix(
        tp=int(((t == 1) & (p == 1)).sum()),
        fp=int(((t == 0) & (p == 1)).sum()),
        tn=int(((t == 0) & (p == 0)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()),
    )


def metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, sensitivity, specificity, precision. Ratios with a zero
    denominator are reported as None rather than 0."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")

    def ratio(num, den):
        return None if den == 0 else num / den

    return {
        "accuracy": cm.correct / cm.total,
        "sensitivity": ratio(cm.tp, cm.tp + cm.fn),
        "specificity": ratio(cm.tn, cm.tn + cm.fp),
        "precision": ratio(cm.tp, cm.tp + cm.fp),
    }


# --- configuration -----------------------------------------------------------

@dataclass
class PipelineConfig:
    fcm_clusters: int = 3
    fcm_fuzzifier: float = 2.0
    fcm_tolerance: float = 1e-6
    fcm_max_iter: int = 100
    fcm_window: int = 3
    levelset_auto: bool = True
    levelset_overrides: dict = field(default_factory=dict)
    edge_sigma: float = 1.5
    booster_rounds: int = 50
    booster_learning_rate: float = 0.3
    booster_max_depth: int = 3
    booster_min_samples_leaf: int = 1
    booster_lambda_reg: float = 1.0
    booster_gamma: float = 0.0
    features_source: str = "builtin"
    features_dim: int | None = None
    classify_threshold: float = 0.5
    seed: int = 0
    out_dir: str = "."

    def fcm_config(self, seed: int | None = None) -> FcmConfig:
        return FcmConfig(
            clusters=self.fcm_clusters,
            fuzzifier=self.fcm_fuzzifier,
            tolerance=self.fcm_tolerance,
            max_iter=self.fcm_max_iter,
            seed=self.seed if seed is None else seed,
        )

    def gbm_config(self, seed: int | None = None) -> GbmConfig:
        return GbmConfig(
            rounds=self.booster_rounds,
            learning_rate=self.booster_learning_rate,
            max_depth=self.booster_max_depth,
            min_samples_leaf=self.booster_min_samples_leaf,
            lambda_reg=self.booster_lambda_reg,
            gamma=self.booster_gamma,
            seed=self.seed if seed is None else seed,
        )


_LEVELSET_KEYS = {
    "iterations": int,
    "dirac_eps": float,
    "time_step": float,
    "contour_weight": float,
    "reg_weight": float,
    "balloon_weight": float,
    "init_amplitude": float,
}

_CONFIG_KEYS = {
    "fcm.clusters": ("fcm_clusters", int),
    "fcm.fuzzifier": ("fcm_fuzzifier", float),
    "fcm.tolerance": ("fcm_tolerance", float),
    "fcm.max_iter": ("fcm_max_iter", int),
    "fcm.window": ("fcm_window", int),
    "levelset.auto": ("levelset_auto", bool),
    "levelset.edge_sigma": ("edge_sigma", float),
    "booster.rounds": ("booster_rounds", int),
    "booster.learning_rate": ("booster_learning_rate", float),
    "booster.max_depth": ("booster_max_depth", int),
    "booster.min_samples_leaf": ("booster_min_samples_leaf", int),
    "booster.lambda_reg": ("booster_lambda_reg", float),
    "booster.gamma": ("booster_gamma", float),
    "features.source": ("features_source", str),
    "features.dim": ("features_dim", int),
    "classify.threshold": ("classify_threshold", float),
    "seed": ("seed", int),
    "out": ("out_dir", str),
}


def _parse_value(raw: str, kind, key: str):
    if kind is bool:
        if raw in ("true", "false"):
            return raw == "true"
        raise ConfigError(f"key {key!r}: expected true or false, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as e:
        raise ConfigError(f"key {key!r}: {e}") from e


def parse_config(text: str) -> PipelineConfig:
    """Parse `key = value` lines; blank lines and # comments are skipped.
    Unknown keys are rejected to catch typos."""
    cfg = PipelineConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected `key = value`")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key.startswith("levelset.") and key[len("levelset."):] in _LEVELSET_KEYS:
            name = key[len("levelset."):]
            cfg.levelset_overrides[name] = _parse_value(raw, _LEVELSET_KEYS[name], key)
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, kind = _CONFIG_KEYS[key]
        setattr(cfg, attr, _parse_value(raw, kind, key))
    if cfg.features_source not in ("file", "builtin"):
        raise ConfigError(f"features.source must be file or builtin, got {cfg.features_source!r}")
    return cfg


def load_config(path) -> PipelineConfig:
    with open(path, "r") as f:
        return parse_config(f.read())


# --- commands ----------------------------------------------------------------

def _metric_lines(cm: ConfusionMatrix) -> list[str]:
    lines = [f"confusion tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}"]
    for name, value in metrics(cm).items():
        lines.append(f"{name} {'n/a' if value is None else repr(value)}")
    return lines


def stratified_split(labels, test_frac: float, seed: int):
    """Deterministic per-class shuffle; each class with two or more samples
    contributes at least one holdout sample."""
    labels = np.asarray(labels).astype(int)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for value in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == value)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(test_frac * idx.size)) if idx.size >= 2 else 0
        n_test = min(max(n_test, 1 if idx.size >= 2 else 0), idx.size - 1)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _labeled_matrix(ff):
    for r in ff.records:
        if r.label is None:
            raise ValueError(f"record {r.id!r} is unlabeled")
    x = np.stack([r.vector for r in ff.records])
    y = np.array([r.label for r in ff.records], dtype=np.float64)
    if np.unique(y).size < 2:
        raise ValueError("degenerate labels: training needs both classes")
    return x, y


def cmd_train(features_path, config: PipelineConfig, out_dir=None,
              seed: int | None = None) -> int:
    """Fit the booster on a stratified 80/20 split and report holdout
    metrics; writes `model.txt` under the output directory."""
    seed = config.seed if seed is None else seed
    out = Path(out_dir if out_dir is not None else config.out_dir)
    ff = read_features(features_path)
    if config.features_dim is not None and ff.dim != config.features_dim:
        raise ConfigError(
            f"feature file dim {ff.dim} does not match configured dim {config.features_dim}"
        )
    x, y = _labeled_matrix(ff)
    train_idx, test_idx = stratified_split(y, 0.2, seed)
    model = fit_xgboost(Dataset(x[train_idx], y[train_idx]),
                        config.gbm_config(seed), get_loss("logistic"))
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.txt"
    save_model(model, model_path)
    held_pred = [
        1 if predict_score(model, x[i]) >= config.classify_threshold else 0
        for i in test_idx
    ]
    cm = confusion_from_predictions(y[test_idx], held_pred)
    for line in _metric_lines(cm):
        print(line)
    print(f"model {model_path}")
    return 0


def _descriptor_from_path(path) -> np.ndarray:
    return builtin_descriptor(normalize(load_image(path)))


def _classify_one(model: BoostedModel, rid: str, vector, threshold: float) -> int:
    score = predict_score(model, vector)
    cls = 1 if score >= threshold else 0
    print(f"{rid} {cls} {score!r}")
    return cls


def cmd_classify(model_path, features_path=None, image_paths=(),
                 builtin: bool = False,
                 config: PipelineConfig | None = None) -> int:
    """Emit one `<id> <class> <score>` line per sample."""
    config = config or PipelineConfig()
    model = load_model(model_path)
    if features_path is not None:
        ff = read_features(features_path)
        if model.dim and ff.dim != model.dim:
            raise ConfigError(f"feature dim {ff.dim} does not match model dim {model.dim}")
        for r in ff.records:
            _classify_one(model, r.id, r.vector, config.classify_threshold)
    elif builtin and image_paths:
        if model.dim and model.dim != DESCRIPTOR_DIM:
            raise ConfigError(
                f"builtin descriptor is {DESCRIPTOR_DIM}-dimensional "
                f"but the model expects {model.dim}"
            )
        for p in image_paths:
            _classify_one(model, Path(p).stem, _descriptor_from_path(p),
                          config.classify_threshold)
    else:
        raise ConfigError("classify needs --features or --builtin-features with images")
    return 0


def _interface_pixels(mask: SegMask) -> np.ndarray:
    """Mask pixels with at least one 4-neighbor outside the mask."""
    bits = mask.bits
    padded = np.pad(bits, 1, mode="edge")
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return bits & ~interior


def _write_segmentation(image: ImageGrid, mask: SegMask, out: Path, stem: str):
    out.mkdir(parents=True, exist_ok=True)
    mask_path = out / f"{stem}.mask.pgm"
    overlay_path = out / f"{stem}.overlay.pgm"
    save_image(mask, mask_path)
    overlay = np.rint(image.values * 255.0)
    overlay[_interface_pixels(mask)] = 255.0
    save_image(ImageGrid(image.width, image.height, overlay), overlay_path)
    return mask_path, overlay_path


def cmd_segment(image_path, config: PipelineConfig, out_dir=None,
                truth_path=None, seed: int | None = None) -> int:
    """Segment one image; writes `<stem>.mask.pgm` and `<stem>.overlay.pgm`
    and prints the iteration count, final area, and Dice when truth given."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    image = normalize(load_image(image_path))
    mask, result, _ = fuzzy_level_set_segment(
        image,
        config.fcm_config(seed),
        auto=config.levelset_auto,
        overrides=config.levelset_overrides,
        window=config.fcm_window,
        edge_sigma=config.edge_sigma,
    )
    stem = Path(image_path).stem
    mask_path, overlay_path = _write_segmentation(image, mask, out, stem)
    area = int(mask.bits.sum())
    k = select_lesion_cluster(result)
    seed_area = int((result.memberships.mu[:, k] >= 0.5).sum())
    if config.levelset_auto:
        params = derive_params(seed_area, config.levelset_overrides)
    else:
        params = LevelSetParams(**config.levelset_overrides)
    print(f"iterations {params.iterations}")
    print(f"area {area}")
    print(f"mask {mask_path}")
    print(f"overlay {overlay_path}")
    if truth_path is not None:
        truth_img = load_image(truth_path)
        truth = SegMask(truth_img.width, truth_img.height, truth_img.values >= 128)
        print(f"dice {dice(mask, truth)!r}")
    return 0


def cmd_pipeline(model_path, image_paths, config: PipelineConfig,
                 out_dir=None, seed: int | None = None) -> int:
    """Classify every image with the builtin descriptor; segment only the
    positives. Negatives produce a classification line and no mask file."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    model = load_model(model_path)
    if model.dim and model.dim != DESCRIPTOR_DIM:
        raise ConfigError(
            f"builtin descriptor is {DESCRIPTOR_DIM}-dimensional "
            f"but the model expects {model.dim}"
        )
    exit_code = 0
    for p in image_paths:
        image = normalize(load_image(p))
        cls = _classify_one(model, Path(p).stem, builtin_descriptor(image),
                            config.classify_threshold)
        if cls != 1:
            continue
        try:
            mask, _, _ = fuzzy_level_set_segment(
                image,
                config.fcm_config(seed),
                auto=config.levelset_auto,
                overrides=config.levelset_overrides,
                window=config.fcm_window,
                edge_sigma=config.edge_sigma,
            )
        except NoLesionRegionError as e:
            print(f"error {Path(p).stem}: {e}")
            exit_code = 2
            continue
        mask_path, _ = _write_segmentation(image, mask, out, Path(p).stem)
        print(f"mask {mask_path}")
    return exit_code


def cmd_eval(model_path, features_path, config: PipelineConfig | None = None) -> int:
    """Confusion matrix and metrics of a saved model on a labeled file."""
    config = config or PipelineConfig()
    model = load_model(model_path)
    ff = read_features(features_path)
    if model.dim and ff.dim != model.dim:
        raise ConfigError(f"feature dim {ff.dim} does not match model dim {model.dim}")
    x, y = _labeled_matrix(ff)
    preds = [
        1 if predict_score(model, row) >= config.classify_threshold else 0 for row in x
    ]
    for line in _metric_lines(confusion_from_predictions(y, preds)):
        print(line)
    return 0
