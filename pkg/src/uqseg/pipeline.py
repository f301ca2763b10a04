"""End-to-end analysis driver: select, fuse, entropy, score, metrics, report.

run_pipeline consumes artifacts of a finished training run (a trace CSV,
per-checkpoint posterior files, ground-truth labels) and produces the
manifest, fused posteriors, entropy maps, per-class scores, Dice/ECE
tables, and a single summary CSV. Stages run in order; a failure aborts
with the stage name and removes files created by this run.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import reports
from .arrayio import entropy_to_gray, read_array, write_array, write_pgm
from .ensemble import argmax_labels, ensemble_mean
from .errors import StageError, ValidationError
from .metrics import CalibrationAccumulator, dice, uncertainty_dice_table
from .scheduler import SgdrConfig
from .selection import SelectionPolicy, TrainingTrace, export_selection, find_cycle_peaks
from .uncertainty import pixel_entropy, uncertainty_score

_SCHEMA = {
    "trace": str,
    "predictions_dir": str,
    "cases_dir": str,
    "outdir": str,
    "t0": int,
    "eta": float,
    "lr_max": float,
    "lr_min": float,
    "total_epochs": int,
    "per_cycle": int,
    "window_fraction": float,
    "min_peak_ratio": float,
    "classes": "classes",
    "bins": int,
    "entropy_region": "region",
    "ece_foreground_only": "bool",
}

_REQUIRED = ("trace", "predictions_dir", "cases_dir", "outdir", "t0", "total_epochs")


@dataclass
class PipelineConfig:
    trace: str
    predictions_dir: str
    cases_dir: str
    outdir: str
    t0: int
    total_epochs: int
    eta: float = 2.0
    lr_max: float = 0.1
    lr_min: float = 1e-4
    per_cycle: int = 3
    window_fraction: float = 0.5
    min_peak_ratio: float = 0.9
    classes: tuple = ()  # empty: every foreground class found in the data
    bins: int = 10
    entropy_region: str = "image"  # or "contour"
    ece_foreground_only: bool = False

    def __post_init__(self):
        if self.entropy_region not in ("image", "contour"):
            raise ValidationError(
                f"entropy_region must be 'image' or 'contour', got {self.entropy_region!r}"
            )
        if self.bins < 1:
            raise ValidationError(f"bins must be >= 1, got {self.bins}")
        # construction of these validates the numeric ranges
        self.schedule()
        self.policy()

    def schedule(self) -> SgdrConfig:
        return SgdrConfig(
            t0=self.t0,
            eta=self.eta,
            lr_max=self.lr_max,
            lr_min=self.lr_min,
            total_epochs=self.total_epochs,
        )

    def policy(self) -> SelectionPolicy:
        return SelectionPolicy(
            per_cycle=self.per_cycle,
            window_fraction=self.window_fraction,
            min_peak_ratio=self.min_peak_ratio,
        )

    @classmethod
    def from_file(cls, path):
        """Parse a flat key=value config; unknown keys are rejected."""
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _SCHEMA:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ValidationError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = _parse(key, value, path, lineno)
        missing = [k for k in _REQUIRED if k not in values]
        if missing:
            raise ValidationError(f"{path}: missing required keys {missing}")
        return cls(**values)


def _parse(key, value, path, lineno):
    kind = _SCHEMA[key]
    try:
        if kind is str:
            return value
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        if kind == "bool":
            if value.lower() in ("1", "true", "yes"):
                return True
            if value.lower() in ("0", "false", "no"):
                return False
            raise ValueError(value)
        if kind == "classes":
            return tuple(int(v) for v in value.split(",") if v.strip())
        if kind == "region":
            return value
    except ValueError:
        pass
    raise ValidationError(f"{path}:{lineno}: bad value {value!r} for key {key!r}")


@dataclass
class PipelineResult:
    summary_path: Path
    ece_percent: float
    avg_entropy_bits: float
    spearman: float | None
    case_count: int


class _Workspace:
    """Tracks files created by this run so a failure can clean them up."""

    def __init__(self):
        self.created_files: list = []
        self.created_dirs: list = []

    def mkdir(self, path):
        path = Path(path)
        to_create = []
        probe = path
        while not probe.exists():
            to_create.append(probe)
            probe = probe.parent
        path.mkdir(parents=True, exist_ok=True)
        self.created_dirs.extend(reversed(to_create))
        return path

    def track(self, path):
        self.created_files.append(Path(path))
        return path

    def cleanup(self):
        for f in self.created_files:
            try:
                f.unlink(missing_ok=True)
            except OSError:
                pass
        for d in reversed(self.created_dirs):
            try:
                d.rmdir()
            except OSError:
                pass


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    ws = _Workspace()
    state = {}
    stages = [
        ("select-checkpoints", _stage_select),
        ("fuse", _stage_fuse),
        ("entropy", _stage_entropy),
        ("score", _stage_score),
        ("metrics", _stage_metrics),
        ("report", _stage_report),
    ]
    try:
        for name, fn in stages:
            try:
                fn(cfg, ws, state)
            except Exception as exc:
                raise StageError(name, exc) from exc
    except StageError:
        ws.cleanup()
        raise
    return state["result"]


def _stage_select(cfg, ws, state):
    trace_path = Path(cfg.trace)
    if not trace_path.exists():
        raise ValidationError(f"trace file {trace_path} does not exist")
    trace = TrainingTrace.from_csv(trace_path)
    selection = find_cycle_peaks(trace, cfg.schedule(), cfg.policy())
    outdir = ws.mkdir(cfg.outdir)
    manifest = outdir / "manifest.csv"
    export_selection(selection, ws.track(manifest))
    state["selection"] = selection


def _stage_fuse(cfg, ws, state):
    pred_root = Path(cfg.predictions_dir)
    if not pred_root.is_dir():
        raise ValidationError(f"predictions dir {pred_root} does not exist")
    case_ids = sorted(d.name for d in pred_root.iterdir() if d.is_dir())
    if not case_ids:
        raise ValidationError(f"no case directories under {pred_root}")
    mean_dir = ws.mkdir(Path(cfg.outdir) / "mean")
    means = {}
    for case_id in case_ids:
        members = []
        for cid in state["selection"].checkpoint_ids:
            member_path = pred_root / case_id / f"{cid}.uqsg"
            if not member_path.exists():
                raise ValidationError(
                    f"missing member posterior {member_path} for checkpoint {cid}"
                )
            members.append(read_array(member_path))
        mean = ensemble_mean(members)
        write_array(ws.track(mean_dir / f"{case_id}.uqsg"), mean.astype(np.float32))
        means[case_id] = mean
    state["case_ids"] = case_ids
    state["means"] = means


def _stage_entropy(cfg, ws, state):
    entropy_dir = ws.mkdir(Path(cfg.outdir) / "entropy")
    maps = {}
    for case_id in state["case_ids"]:
        mean = state["means"][case_id]
        h = pixel_entropy(mean)
        write_array(ws.track(entropy_dir / f"{case_id}.uqsg"), h.astype(np.float32))
        gray = entropy_to_gray(h, mean.shape[0])
        if gray.ndim == 2:
            write_pgm(ws.track(entropy_dir / f"{case_id}.pgm"), gray)
        else:
            for k in range(gray.shape[0]):
                write_pgm(ws.track(entropy_dir / f"{case_id}_z{k:03d}.pgm"), gray[k])
        maps[case_id] = h
    state["entropies"] = maps


def _classes_for(cfg, class_count):
    if cfg.classes:
        bad = [k for k in cfg.classes if not 1 <= k < class_count]
        if bad:
            raise ValidationError(
                f"classes {bad} out of range for {class_count}-class posteriors"
            )
        return list(cfg.classes)
    return list(range(1, class_count))


def _stage_score(cfg, ws, state):
    lines = ["case_id," + reports.SCORE_HEADER]
    scores = {}
    for case_id in state["case_ids"]:
        mean = state["means"][case_id]
        for k in _classes_for(cfg, mean.shape[0]):
            s = uncertainty_score(
                mean, k, restrict_to_contour=(cfg.entropy_region == "contour")
            )
            scores[(case_id, k)] = s
            lines.append(reports.score_row(s, case_id=case_id))
    reports.write_lines(ws.track(Path(cfg.outdir) / "scores.csv"), lines)
    state["scores"] = scores


def _stage_metrics(cfg, ws, state):
    cases_dir = Path(cfg.cases_dir)
    acc = CalibrationAccumulator(cfg.bins)
    dice_lines = ["case_id," + reports.DICE_HEADER]
    dices = {}
    entropy_sum = 0.0
    entropy_count = 0
    for case_id in state["case_ids"]:
        gt_path = cases_dir / f"{case_id}_labels.uqsg"
        if not gt_path.exists():
            raise ValidationError(f"missing ground truth {gt_path}")
        gt = read_array(gt_path)
        mean = state["means"][case_id]
        if gt.shape != mean.shape[1:]:
            raise ValidationError(
                f"{case_id}: labels shape {gt.shape} does not match posterior {mean.shape}"
            )
        pred = argmax_labels(mean)
        for k in _classes_for(cfg, mean.shape[0]):
            d = dice(pred, gt, k)
            dices[(case_id, k)] = d
            dice_lines.append(reports.dice_row(d, case_id=case_id))
        acc.add(mean, gt, foreground_only=cfg.ece_foreground_only)
        h = state["entropies"][case_id]
        entropy_sum += float(h.sum())
        entropy_count += h.size
    reports.write_lines(ws.track(Path(cfg.outdir) / "dice.csv"), dice_lines)
    calibration = acc.report()
    reports.write_ece_csv(ws.track(Path(cfg.outdir) / "ece.csv"), calibration)
    state["dices"] = dices
    state["calibration"] = calibration
    state["avg_entropy"] = entropy_sum / entropy_count


def _stage_report(cfg, ws, state):
    case_rows = []
    pairs = []
    for case_id in state["case_ids"]:
        mean = state["means"][case_id]
        for k in _classes_for(cfg, mean.shape[0]):
            s = state["scores"][(case_id, k)]
            d = state["dices"][(case_id, k)]
            pairs.append((s, d))
            case_rows.append(
                reports.summary_case_row(case_id, k, "uncertainty_score", s.score)
            )
            case_rows.append(reports.summary_case_row(case_id, k, "dice", d.dice))
    table = uncertainty_dice_table(pairs)
    dataset_rows = []
    if table.spearman is None:
        dataset_rows.append(reports.summary_dataset_row("spearman_note", table.note))
    else:
        dataset_rows.append(
            reports.summary_dataset_row("spearman_score_dice", table.spearman)
        )
    dataset_rows.append(
        reports.summary_dataset_row("ece_percent", state["calibration"].ece)
    )
    dataset_rows.append(
        reports.summary_dataset_row("avg_entropy_bits", state["avg_entropy"])
    )
    dataset_rows.append(
        reports.summary_dataset_row("h_total_region", cfg.entropy_region)
    )
    summary = Path(cfg.outdir) / "summary.csv"
    reports.write_summary_csv(ws.track(summary), case_rows, dataset_rows)
    state["result"] = PipelineResult(
        summary_path=summary,
        ece_percent=state["calibration"].ece,
        avg_entropy_bits=state["avg_entropy"],
        spearman=table.spearman,
        case_count=len(state["case_ids"]),
    )
