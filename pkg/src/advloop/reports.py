"""Report persistence and batch aggregation tables.

Epoch results are stored as JSON Lines (one epoch per line, canonical key
order, so identical runs produce identical bytes). Batch aggregates follow
the familiar two-row layout: per-frame metric means, composite scores, and
completion rates, with and without the adversary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .harness import EpochResult
from .metrics import MetricWeights, SliceReport, compute_pdms, slice_completion

COLUMNS = ("NC", "DAC", "TTC", "C", "EP", "PDMS", "RC", "DS", "SC")


def epoch_json(result: EpochResult) -> str:
    return json.dumps(result.to_dict(), sort_keys=True, separators=(",", ":"))


def write_epochs_jsonl(results: Sequence[EpochResult], path: Union[str, Path]) -> None:
    text = "".join(epoch_json(r) + "\n" for r in results)
    Path(path).write_text(text, encoding="utf-8")


def read_epochs_jsonl(path: Union[str, Path]) -> list:
    results = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            results.append(EpochResult.from_dict(json.loads(line)))
    return results


@dataclass(frozen=True)
class MetricRow:
    nc: float
    dac: float
    ttc: float
    comfort: float
    ep: float
    pdms: float
    rc: float
    ds: float
    sc: float
    n_slices: int

    def values(self) -> tuple:
        return (self.nc, self.dac, self.ttc, self.comfort, self.ep,
                self.pdms, self.rc, self.ds, self.sc)


def aggregate_reports(reports: Sequence[SliceReport]) -> MetricRow:
    """Slice-mean of frame metrics, composite means, and completion fraction."""
    if not reports:
        raise ValueError("no reports to aggregate")

    def slice_mean(attr):
        per_slice = []
        for r in reports:
            if r.frames:
                per_slice.append(float(np.mean([getattr(f, attr) for f in r.frames])))
            else:
                per_slice.append(0.0)
        return float(np.mean(per_slice))

    return MetricRow(
        nc=slice_mean("nc"),
        dac=slice_mean("dac"),
        ttc=slice_mean("ttc"),
        comfort=slice_mean("comfort"),
        ep=slice_mean("ep"),
        pdms=float(np.mean([r.pdms_avg for r in reports])),
        rc=float(np.mean([r.rc for r in reports])),
        ds=float(np.mean([r.ds for r in reports])),
        sc=slice_completion(list(reports)),
        n_slices=len(reports),
    )


@dataclass(frozen=True)
class BatchSummary:
    without_adv: Optional[MetricRow]
    with_adv: Optional[MetricRow]

    @property
    def deltas(self) -> Optional[tuple]:
        if self.without_adv is None or self.with_adv is None:
            return None
        return tuple(a - b for a, b in zip(self.without_adv.values(), self.with_adv.values()))


def batch_summary(results: Sequence[EpochResult]) -> BatchSummary:
    ep1 = [r.episode1 for r in results if not r.failed]
    ep2 = [r.episode2 for r in results if not r.failed and r.episode2 is not None]
    return BatchSummary(
        without_adv=aggregate_reports(ep1) if ep1 else None,
        with_adv=aggregate_reports(ep2) if ep2 else None,
    )


def summary_csv(summary: BatchSummary) -> str:
    lines = ["condition," + ",".join(c.lower() for c in COLUMNS) + ",n_slices"]
    for label, row in (("without_adv", summary.without_adv), ("with_adv", summary.with_adv)):
        if row is None:
            continue
        lines.append(label + "," + ",".join(f"{v:.6f}" for v in row.values()) + f",{row.n_slices}")
    return "\n".join(lines) + "\n"


def summary_table(summary: BatchSummary) -> str:
    """Aligned text table: one row per traffic condition plus the drop row."""
    header = f"{'condition':<12}" + "".join(f"{c:>8}" for c in COLUMNS)
    lines = [header, "-" * len(header)]
    for label, row in (("w/o adv", summary.without_adv), ("w/ adv", summary.with_adv)):
        if row is None:
            continue
        lines.append(f"{label:<12}" + "".join(f"{v:8.3f}" for v in row.values()))
    if summary.deltas is not None:
        lines.append(f"{'drop':<12}" + "".join(f"{d:8.3f}" for d in summary.deltas))
    lines.append("DS = per-slice mean PDMS x RC, averaged over slices; "
                 "SC = fraction of slices completed")
    return "\n".join(lines)


def rescore_epoch(result: EpochResult, weights: MetricWeights) -> EpochResult:
    """Recompute PDMS/DS from the stored per-frame submetrics with new weights."""

    def rescore_report(report: Optional[SliceReport]) -> Optional[SliceReport]:
        if report is None:
            return None
        data = report.to_dict()
        for frame in data["frames"]:
            frame["pdms"] = compute_pdms(
                frame["nc"], frame["dac"], frame["ep"], frame["ttc"], frame["comfort"], weights
            )
        if data["frames"]:
            data["pdms_avg"] = float(np.mean([f["pdms"] for f in data["frames"]]))
        data["ds"] = data["pdms_avg"] * data["rc"]
        if data.get("config"):
            data["config"]["weights"] = {
                "ep": weights.ep, "ttc": weights.ttc, "comfort": weights.comfort,
            }
        return SliceReport.from_dict(data)

    episode1 = rescore_report(result.episode1)
    episode2 = rescore_report(result.episode2)
    deltas = None
    if episode2 is not None:
        deltas = {
            "pdms": episode1.pdms_avg - episode2.pdms_avg,
            "rc": episode1.rc - episode2.rc,
            "ds": episode1.ds - episode2.ds,
        }
    data = result.to_dict()
    rescored = EpochResult.from_dict(data)
    rescored.episode1 = episode1
    rescored.episode2 = episode2
    rescored.deltas = deltas
    return rescored
