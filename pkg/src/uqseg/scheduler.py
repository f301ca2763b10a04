"""Warm-restart cosine learning-rate schedule and cycle bookkeeping.

Cycle boundaries sit at t0 * eta**i, so with the default t0=100, eta=2 the
restarts land at epochs 100, 200, 400, 800 (cycle lengths 100, 100, 200,
400). For eta=1 this degenerates gracefully to equal cycles of t0 epochs.

Within a cycle the rate anneals from lr_max down toward lr_min:

    lr(e) = lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * (e - start) / span))

``lr_at(..., literal=True)`` instead evaluates the degenerate published
variant (amplitude lr_min/2, modulus of the absolute epoch); it exists only
for fidelity comparisons and is not used by the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class SgdrConfig:
    """Schedule parameters; defaults mirror the reference training setup."""

    t0: int = 100
    eta: float = 2.0
    lr_max: float = 0.1
    lr_min: float = 1e-4
    total_epochs: int = 800

    def __post_init__(self):
        if self.t0 < 1:
            raise ValidationError(f"t0 must be >= 1, got {self.t0}")
        if self.eta < 1.0:
            raise ValidationError(f"eta must be >= 1, got {self.eta}")
        # lr_min == lr_max is allowed for degenerate (e.g. zero-rate) runs
        if not (0.0 <= self.lr_min <= self.lr_max):
            raise ValidationError(
                f"need 0 <= lr_min <= lr_max, got lr_min={self.lr_min} lr_max={self.lr_max}"
            )
        if self.total_epochs < 1:
            raise ValidationError(f"total_epochs must be >= 1, got {self.total_epochs}")


@dataclass(frozen=True)
class CycleIndex:
    """One cycle: index, actual span in epochs, half-open epoch range."""

    cycle: int
    t_i: int
    cycle_start: int
    cycle_end: int


def _cycle_iter(cfg: SgdrConfig):
    """Yield CycleIndex values forever, starting at epoch 0."""
    prev = 0
    i = 0
    while True:
        t_i = cfg.t0 * cfg.eta**i
        # next zero of mod(t, t_i) strictly after the previous boundary
        mult = math.floor(prev / t_i) + 1
        end = max(prev + 1, int(round(mult * t_i)))
        yield CycleIndex(cycle=i, t_i=end - prev, cycle_start=prev, cycle_end=end)
        prev = end
        i += 1


def cycle_of(epoch: int, cfg: SgdrConfig) -> CycleIndex:
    """Return the unique cycle whose [cycle_start, cycle_end) contains epoch."""
    if not 0 <= epoch < cfg.total_epochs:
        raise ValidationError(
            f"epoch {epoch} outside [0, {cfg.total_epochs})"
        )
    for cyc in _cycle_iter(cfg):
        if epoch < cyc.cycle_end:
            return cyc
    raise AssertionError("unreachable")


def restart_epochs(cfg: SgdrConfig) -> list[int]:
    """Cycle-end epochs up to and including total_epochs."""
    out = []
    for cyc in _cycle_iter(cfg):
        if cyc.cycle_end > cfg.total_epochs:
            break
        out.append(cyc.cycle_end)
    return out


def lr_at(epoch: int, cfg: SgdrConfig, *, literal: bool = False) -> float:
    """Learning rate at the start of ``epoch``."""
    cyc = cycle_of(epoch, cfg)
    if literal:
        t_nominal = cfg.t0 * cfg.eta**cyc.cycle
        phase = math.fmod(epoch, t_nominal) / t_nominal
        return cfg.lr_min / 2.0 * (math.cos(math.pi * phase) + 1.0) + cfg.lr_min
    offset = epoch - cyc.cycle_start
    if offset == 0:
        return cfg.lr_max
    x = offset / cyc.t_i
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) / 2.0 * (1.0 + math.cos(math.pi * x))


def schedule_rows(cfg: SgdrConfig):
    """(epoch, cycle, lr) triples for the whole run; backs the CSV emitter."""
    rows = []
    for cyc in _cycle_iter(cfg):
        if cyc.cycle_start >= cfg.total_epochs:
            break
        for epoch in range(cyc.cycle_start, min(cyc.cycle_end, cfg.total_epochs)):
            rows.append((epoch, cyc.cycle, lr_at(epoch, cfg)))
    return rows
