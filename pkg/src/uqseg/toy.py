"""Desk-scale trainer: synthetic blob scenes and a linear softmax pixel model.

The model maps six per-pixel features (bias, normalized intensity, 3x3
local mean and variance, normalized row/column) to class logits. That is
enough to learn blob segmentation while leaving genuine disagreement
between checkpoints at class boundaries, which is what the downstream
uncertainty pipeline needs to see.

Training is plain full-batch SGD under the warm-restart schedule with a
soft Dice loss (smoothing 1.0); everything is deterministic given
(seed, config).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrays import zscore_normalize
from .arrayio import read_array, write_array
from .errors import NumericError, ValidationError
from .metrics import dice
from .scheduler import SgdrConfig, _cycle_iter, lr_at
from .selection import SelectionPolicy, TraceRecord, TrainingTrace

FEATURE_COUNT = 6
DICE_SMOOTHING = 1.0


@dataclass(frozen=True)
class Blob:
    class_id: int
    center: tuple
    radius: int
    intensity_mean: float


@dataclass(frozen=True)
class SyntheticScene:
    """Recipe for one case; rendering is a pure function of the recipe."""

    seed: int
    shape: tuple
    blobs: tuple
    noise_std: float

    def render(self):
        h, w = self.shape
        image = np.zeros((h, w), dtype=np.float64)
        labels = np.zeros((h, w), dtype=np.uint8)
        yy, xx = np.mgrid[0:h, 0:w]
        for blob in self.blobs:
            cy, cx = blob.center
            dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
            # feathered rim: intensity ramps over ~1 px at the blob edge, the
            # partial-volume effect that makes true boundaries ambiguous
            weight = np.clip(blob.radius + 0.5 - dist, 0.0, 1.0)
            image = image * (1.0 - weight) + blob.intensity_mean * weight
            labels[dist <= blob.radius] = blob.class_id
        if self.noise_std > 0.0:
            rng = np.random.default_rng(self.seed)
            image = image + rng.normal(0.0, self.noise_std, size=image.shape)
        return image, labels


@dataclass(frozen=True)
class ToyCase:
    case_id: str
    image: np.ndarray
    labels: np.ndarray
    class_count: int
    noise_std: float


@dataclass(frozen=True)
class ToyModel:
    """Linear per-pixel classifier: six features to one logit per class."""

    weights: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != FEATURE_COUNT:
            raise ValidationError(
                f"weights must be (classes, {FEATURE_COUNT}), got {W.shape}"
            )
        if not np.all(np.isfinite(W)):
            raise ValidationError("model parameters must be finite")
        object.__setattr__(self, "weights", W)

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    def predict(self, image) -> np.ndarray:
        return predict(self.weights, image)


def generate_dataset(
    seed: int,
    n_cases: int,
    shape=(64, 64),
    class_count: int = 3,
    noise_std: float = 0.1,
    *,
    grade_noise: bool = True,
) -> list:
    """Deterministically generate blob cases; every class appears somewhere.

    With ``grade_noise`` the per-case noise level ramps from 0.5x to 1.5x of
    ``noise_std`` across the dataset, giving a spread of difficulty.
    """
    if n_cases < 1:
        raise ValidationError(f"n_cases must be >= 1, got {n_cases}")
    if class_count < 2:
        raise ValidationError(f"class_count must be >= 2, got {class_count}")
    if n_cases < class_count - 1:
        raise ValidationError(
            f"{n_cases} cases cannot cover {class_count - 1} foreground classes"
        )
    h, w = shape
    m = min(h, w)
    r_lo, r_hi = max(2, m // 7), max(2, m // 5)
    if m < 8 or r_hi < r_lo:
        raise ValidationError(f"shape {shape} too small for blob radii >= {r_lo}")

    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        if grade_noise and n_cases > 1:
            level = noise_std * (0.5 + i / (n_cases - 1))
        else:
            level = noise_std
        # one blob per foreground class in a narrow size range keeps per-case
        # intensity statistics comparable, so per-case normalization maps
        # classes to stable bands a shared linear model can separate;
        # alternating signs (class 1 dark, class 2 bright, ...) keep every
        # foreground band one-sided instead of squeezed between neighbors
        blob_classes = list(range(1, class_count))
        blobs = []
        for k in blob_classes:
            radius = int(rng.integers(r_lo, r_hi + 1))
            cy = int(rng.integers(radius, h - radius))
            cx = int(rng.integers(radius, w - radius))
            jitter = float(rng.uniform(-0.2, 0.2))
            magnitude = 2.0 * ((k + 1) // 2)
            sign = -1.0 if k % 2 else 1.0
            blobs.append(Blob(k, (cy, cx), radius, sign * magnitude + jitter))
        scene = SyntheticScene(
            seed=int(rng.integers(0, 2**31)),
            shape=(h, w),
            blobs=tuple(blobs),
            noise_std=level,
        )
        image, labels = scene.render()
        cases.append(ToyCase(f"case{i:04d}", image, labels, class_count, level))

    present = set()
    for case in cases:
        present.update(int(v) for v in np.unique(case.labels))
    missing = set(range(1, class_count)) - present
    if missing:
        raise ValidationError(f"generated dataset is missing classes {sorted(missing)}")
    return cases


def case_features(image) -> np.ndarray:
    """Per-pixel feature matrix (P, 6) from a raw intensity image."""
    z = zscore_normalize(image)
    h, w = z.shape
    padded = np.pad(z, 1, mode="edge")
    neigh = np.stack(
        [padded[dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)]
    )
    local_mean = neigh.mean(axis=0)
    local_var = neigh.var(axis=0)
    yy, xx = np.mgrid[0:h, 0:w]
    feats = np.stack(
        [
            np.ones_like(z),
            z,
            local_mean,
            local_var,
            yy / max(h - 1, 1),
            xx / max(w - 1, 1),
        ],
        axis=-1,
    )
    return feats.reshape(-1, FEATURE_COUNT)


def predict(weights, image) -> np.ndarray:
    """Softmax posterior (c, H, W) of the pixel model on one case image."""
    W = np.asarray(weights, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != FEATURE_COUNT:
        raise ValidationError(f"weights must be (classes, {FEATURE_COUNT}), got {W.shape}")
    feats = case_features(image)
    logits = feats @ W.T
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    h, w = np.asarray(image).shape
    return probs.T.reshape(W.shape[0], h, w)


def predict_checkpoint(store, checkpoint_id, image) -> np.ndarray:
    """Predict with a stored checkpoint; unknown ids are an error."""
    if checkpoint_id not in store:
        raise ValidationError(f"unknown checkpoint id {checkpoint_id!r}")
    return predict(store[checkpoint_id], image)


def _dice_loss_grad(probs, onehot):
    """Soft Dice loss and its gradient w.r.t. the probabilities (P, C)."""
    s = DICE_SMOOTHING
    num = 2.0 * (probs * onehot).sum(axis=0) + s
    den = probs.sum(axis=0) + onehot.sum(axis=0) + s
    loss = 1.0 - (num / den).mean()
    n_classes = probs.shape[1]
    grad = -(2.0 * onehot * den - num) / (den**2) / n_classes
    return loss, grad


def _case_gradient(feats, onehot, W):
    logits = feats @ W.T
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss, gp = _dice_loss_grad(probs, onehot)
    gz = probs * (gp - (gp * probs).sum(axis=1, keepdims=True))
    return loss, gz.T @ feats


def checkpoint_epochs(cfg: SgdrConfig, policy: SelectionPolicy) -> list:
    """Epochs falling inside any cycle's selection window."""
    epochs = []
    for cyc in _cycle_iter(cfg):
        if cyc.cycle_start >= cfg.total_epochs:
            break
        start = max(cyc.cycle_start, cyc.cycle_end - policy.window_epochs(cyc.t_i))
        epochs.extend(range(start, min(cyc.cycle_end, cfg.total_epochs)))
    return epochs


def validation_dice(weights, cases) -> float:
    """Mean foreground Dice of argmax predictions over validation cases."""
    per_case = []
    for case in cases:
        pred = predict(weights, case.image).argmax(axis=0).astype(np.uint8)
        scores = [
            dice(pred, case.labels, k).dice for k in range(1, case.class_count)
        ]
        per_case.append(float(np.mean(scores)))
    return float(np.mean(per_case))


def train(train_cases, val_cases, cfg: SgdrConfig, policy=None, *, seed: int = 0):
    """Run the schedule; returns (TrainingTrace, {checkpoint_id: weights})."""
    if not train_cases or not val_cases:
        raise ValidationError("need at least one training case and one validation case")
    policy = policy or SelectionPolicy()
    class_count = train_cases[0].class_count

    feats = [case_features(c.image) for c in train_cases]
    onehots = [
        np.eye(class_count)[c.labels.reshape(-1)] for c in train_cases
    ]
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, 0.01, size=(class_count, FEATURE_COUNT))

    save_at = set(checkpoint_epochs(cfg, policy))
    records = []
    checkpoints = {}
    for epoch in range(cfg.total_epochs):
        lr = lr_at(epoch, cfg)
        grad = np.zeros_like(W)
        loss_total = 0.0
        for X, Y in zip(feats, onehots):
            loss, g = _case_gradient(X, Y, W)
            loss_total += loss
            grad += g
        loss_mean = loss_total / len(feats)
        if not np.isfinite(loss_mean):
            raise NumericError(f"training diverged: non-finite loss at epoch {epoch}")
        W = W - lr * (grad / len(feats))
        metric = validation_dice(W, val_cases)
        cid = None
        if epoch in save_at:
            cid = f"ep{epoch:05d}"
            checkpoints[cid] = W.copy()
        records.append(TraceRecord(epoch, lr, metric, cid))
    return TrainingTrace(tuple(records)), checkpoints


def boundary_band(labels) -> np.ndarray:
    """Pixels whose 3x3 neighborhood contains a different label (both sides
    of every class boundary, one pixel deep)."""
    lab = np.asarray(labels)
    h, w = lab.shape
    padded = np.pad(lab, 1, mode="edge")
    band = np.zeros((h, w), dtype=bool)
    for dy in range(3):
        for dx in range(3):
            band |= padded[dy : dy + h, dx : dx + w] != lab
    return band.astype(np.uint8)


def inject_label_noise(labels, class_count, rng, flip_fraction=0.25) -> np.ndarray:
    """Corrupt a fraction of boundary-band pixels to a different class."""
    if not 0.0 <= flip_fraction <= 1.0:
        raise ValidationError(f"flip_fraction must be in [0, 1], got {flip_fraction}")
    lab = np.asarray(labels).copy()
    band = np.argwhere(boundary_band(lab) == 1)
    if band.size == 0 or flip_fraction == 0.0:
        return lab
    n_flip = int(round(flip_fraction * len(band)))
    chosen = band[rng.choice(len(band), size=n_flip, replace=False)]
    for y, x in chosen:
        current = lab[y, x]
        options = [k for k in range(class_count) if k != current]
        lab[y, x] = options[int(rng.integers(0, len(options)))]
    return lab


def run_toy_training(
    outdir,
    *,
    seed: int,
    n_train: int,
    n_test: int,
    shape=(64, 64),
    class_count: int = 3,
    cfg: SgdrConfig,
    policy=None,
    noise_std: float = 0.1,
):
    """Generate data, train, and write every artifact the pipeline consumes.

    Layout under ``outdir``: cases/<id>_image.uqsg and <id>_labels.uqsg for
    all cases, trace.csv, checkpoints/<cid>.uqsg (model weights), and
    predictions/<case>/<cid>.uqsg posteriors for each test case and saved
    checkpoint. Test cases are the last ``n_test`` and double as the
    validation split for the trace.
    """
    policy = policy or SelectionPolicy()
    out = Path(outdir)
    cases = generate_dataset(
        seed, n_train + n_test, shape=shape, class_count=class_count, noise_std=noise_std
    )
    train_cases, test_cases = cases[:n_train], cases[n_train:]

    cases_dir = out / "cases"
    cases_dir.mkdir(parents=True, exist_ok=True)
    for case in cases:
        write_array(cases_dir / f"{case.case_id}_image.uqsg", case.image.astype(np.float32))
        write_array(cases_dir / f"{case.case_id}_labels.uqsg", case.labels)

    trace, checkpoints = train(train_cases, test_cases, cfg, policy, seed=seed)
    trace.to_csv(out / "trace.csv")

    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for cid, weights in checkpoints.items():
        write_array(ckpt_dir / f"{cid}.uqsg", weights.astype(np.float32))

    pred_dir = out / "predictions"
    for case in test_cases:
        case_dir = pred_dir / case.case_id
        case_dir.mkdir(parents=True, exist_ok=True)
        for cid, weights in checkpoints.items():
            probs = predict(weights, case.image)
            write_array(case_dir / f"{cid}.uqsg", probs.astype(np.float32))
    return trace, checkpoints, cases


def load_checkpoint_store(checkpoint_dir):
    """Read back checkpoint weight files written by run_toy_training."""
    store = {}
    for path in sorted(Path(checkpoint_dir).glob("*.uqsg")):
        store[path.stem] = read_array(path).astype(np.float64)
    return store
