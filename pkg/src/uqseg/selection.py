"""Pick ensemble checkpoints from the validation-metric peaks of each cycle.

Each cycle is searched over its final stretch (default: last 50% of the
cycle, where the rate has annealed). A cycle contributes checkpoints only
if its best windowed metric reaches ``min_peak_ratio`` of the best metric
seen anywhere in the trace; flat cycles are skipped entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .scheduler import SgdrConfig, _cycle_iter

_FMT = ".9g"


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    lr: float
    val_metric: float
    checkpoint_id: str | None = None


@dataclass(frozen=True)
class TrainingTrace:
    """Per-epoch training records; epochs strictly increasing."""

    records: tuple

    def __post_init__(self):
        recs = tuple(self.records)
        object.__setattr__(self, "records", recs)
        prev = None
        for r in recs:
            if prev is not None and r.epoch <= prev:
                raise ValidationError(
                    f"trace epochs must be strictly increasing, got {prev} then {r.epoch}"
                )
            if not math.isfinite(r.val_metric) or not 0.0 <= r.val_metric <= 1.0:
                raise ValidationError(
                    f"val_metric must be finite in [0, 1], got {r.val_metric} at epoch {r.epoch}"
                )
            prev = r.epoch

    def to_csv(self, path):
        lines = ["epoch,lr,val_metric,checkpoint_id"]
        for r in self.records:
            cid = r.checkpoint_id or ""
            lines.append(f"{r.epoch},{format(r.lr, _FMT)},{format(r.val_metric, _FMT)},{cid}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != "epoch,lr,val_metric,checkpoint_id":
            raise ValidationError(f"{path}: not a trace CSV (bad header)")
        records = []
        for ln in lines[1:]:
            if not ln:
                continue
            parts = ln.split(",")
            if len(parts) != 4:
                raise ValidationError(f"{path}: malformed trace row {ln!r}")
            epoch, lr, metric, cid = parts
            records.append(
                TraceRecord(int(epoch), float(lr), float(metric), cid or None)
            )
        return cls(tuple(records))


@dataclass(frozen=True)
class SelectionPolicy:
    """How many checkpoints per cycle, where to look, and when to skip."""

    per_cycle: int = 3
    window_fraction: float = 0.5
    min_peak_ratio: float = 0.9

    def __post_init__(self):
        if self.per_cycle < 1:
            raise ValidationError(f"per_cycle must be >= 1, got {self.per_cycle}")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValidationError(
                f"window_fraction must be in (0, 1], got {self.window_fraction}"
            )
        if not 0.0 < self.min_peak_ratio <= 1.0:
            raise ValidationError(
                f"min_peak_ratio must be in (0, 1], got {self.min_peak_ratio}"
            )

    def window_epochs(self, span: int) -> int:
        """Search-window length in epochs for a cycle of ``span`` epochs."""
        return max(1, math.ceil(self.window_fraction * span))


@dataclass(frozen=True)
class SelectedCheckpoint:
    cycle: int
    epoch: int
    checkpoint_id: str
    val_metric: float


@dataclass(frozen=True)
class CheckpointSet:
    """Selected checkpoints, ordered by (cycle, metric desc, epoch desc)."""

    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        key = [(e.cycle, -e.val_metric, -e.epoch) for e in entries]
        if key != sorted(key):
            raise ValidationError("checkpoint entries out of canonical order")
        ids = [e.checkpoint_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate checkpoint_id in selection")

    @property
    def checkpoint_ids(self):
        return [e.checkpoint_id for e in self.entries]


def find_cycle_peaks(
    trace: TrainingTrace, cfg: SgdrConfig, policy: SelectionPolicy | None = None
) -> CheckpointSet:
    """Select up to ``per_cycle`` peak checkpoints from each qualifying cycle.

    Ties in the metric are broken toward the later epoch. Cycles whose best
    windowed metric falls below min_peak_ratio * global best are skipped.
    """
    policy = policy or SelectionPolicy()
    if not trace.records:
        raise ValidationError("empty trace")
    max_epoch = trace.records[-1].epoch
    if max_epoch >= cfg.total_epochs:
        raise ValidationError(
            f"trace epoch {max_epoch} exceeds schedule total_epochs {cfg.total_epochs}"
        )

    cycles = []
    for cyc in _cycle_iter(cfg):
        if cyc.cycle_start > max_epoch:
            break
        cycles.append(cyc)
    if max_epoch < cycles[0].cycle_end - 1:
        raise ValidationError(
            f"trace must span at least one full cycle (need epoch {cycles[0].cycle_end - 1})"
        )

    global_best = max(r.val_metric for r in trace.records)
    entries = []
    for cyc in cycles:
        window_start = cyc.cycle_end - policy.window_epochs(cyc.t_i)
        windowed = [
            r
            for r in trace.records
            if window_start <= r.epoch < cyc.cycle_end
        ]
        if not windowed:
            continue
        best = max(r.val_metric for r in windowed)
        if best < policy.min_peak_ratio * global_best:
            continue
        ranked = sorted(windowed, key=lambda r: (-r.val_metric, -r.epoch))
        for r in ranked[: policy.per_cycle]:
            cid = r.checkpoint_id or f"ep{r.epoch:05d}"
            entries.append(SelectedCheckpoint(cyc.cycle, r.epoch, cid, r.val_metric))

    entries.sort(key=lambda e: (e.cycle, -e.val_metric, -e.epoch))
    return CheckpointSet(tuple(entries))


def export_selection(selection: CheckpointSet, path):
    """Write the manifest CSV consumed by the fuse stage."""
    if not selection.entries:
        raise ValidationError("refusing to export an empty checkpoint selection")
    lines = ["cycle,epoch,checkpoint_id,metric"]
    for e in selection.entries:
        lines.append(f"{e.cycle},{e.epoch},{e.checkpoint_id},{format(e.val_metric, _FMT)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_selection(path) -> CheckpointSet:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "cycle,epoch,checkpoint_id,metric":
        raise ValidationError(f"{path}: not a selection manifest (bad header)")
    entries = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != 4:
            raise ValidationError(f"{path}: malformed manifest row {ln!r}")
        cycle, epoch, cid, metric = parts
        entries.append(SelectedCheckpoint(int(cycle), int(epoch), cid, float(metric)))
    return CheckpointSet(tuple(entries))
