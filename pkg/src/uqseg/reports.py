"""Deterministic CSV writers shared by the pipeline and the CLI.

Every float is rendered with 9 significant digits so outputs are stable
enough for byte-for-byte golden-file comparison.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ValidationError


def fmt9(value) -> str:
    return format(float(value), ".9g")


def write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


def score_row(score, case_id=None):
    fields = [
        str(score.class_id),
        fmt9(score.h_total),
        str(score.contour_pixels),
        fmt9(score.score),
        str(int(score.empty_contour)),
    ]
    if case_id is not None:
        fields.insert(0, case_id)
    return ",".join(fields)


SCORE_HEADER = "class,h_total,contour_pixels,score,empty_contour_flag"


def write_scores_csv(path, scores):
    write_lines(path, [SCORE_HEADER] + [score_row(s) for s in scores])


DICE_HEADER = "class,intersection,pred_size,gt_size,dice"


def dice_row(result, case_id=None):
    fields = [
        str(result.class_id),
        str(result.intersection),
        str(result.pred_size),
        str(result.gt_size),
        fmt9(result.dice),
    ]
    if case_id is not None:
        fields.insert(0, case_id)
    return ",".join(fields)


def write_dice_csv(path, results):
    write_lines(path, [DICE_HEADER] + [dice_row(r) for r in results])


def write_ece_csv(path, report):
    lines = ["record,lower,upper,count,mean_confidence,accuracy"]
    bins = report.bins
    for b in range(bins.n_bins):
        lines.append(
            ",".join(
                [
                    f"bin{b}",
                    fmt9(bins.lowers[b]),
                    fmt9(bins.uppers[b]),
                    str(int(bins.counts[b])),
                    fmt9(bins.mean_confidence[b]),
                    fmt9(bins.accuracy[b]),
                ]
            )
        )
    total = int(bins.counts.sum())
    lines.append(f"ece_percent,,,{total},,{fmt9(report.ece)}")
    write_lines(path, lines)


SUMMARY_HEADER = "kind,case_id,class_id,metric,value"


def summary_case_row(case_id, class_id, metric, value):
    return f"case,{case_id},{class_id},{metric},{fmt9(value)}"


def summary_dataset_row(metric, value):
    text = fmt9(value) if isinstance(value, (int, float)) else str(value)
    return f"dataset,,,{metric},{text}"


def write_summary_csv(path, case_rows, dataset_rows):
    write_lines(path, [SUMMARY_HEADER] + list(case_rows) + list(dataset_rows))


def read_cases_csv(path):
    """Read (case_id, class_id, score, dice) rows for the report command."""
    lines = Path(path).read_text().splitlines()
    header = "case_id,class_id,uncertainty_score,dice"
    if not lines or lines[0] != header:
        raise ValidationError(f"{path}: expected header {header!r}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != 4:
            raise ValidationError(f"{path}: malformed row {ln!r}")
        rows.append((parts[0], int(parts[1]), float(parts[2]), float(parts[3])))
    return rows
