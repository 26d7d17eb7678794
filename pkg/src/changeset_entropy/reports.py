"""Report and plot-data files for the three analyses.

Floats are written with ``repr`` and JSON with sorted keys so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from .energy import EnergyProfile
from .pipeline import STREAMS, EntropyRecord, Part1Result, Part3Result, WindowResult, defined_points
from .stats import band


def _num(x: float | int | None) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def write_profile_plot(out_dir: Path, profile: EnergyProfile) -> Path:
    rows = ((i, e.revision, _num(e.mean_watts)) for i, e in enumerate(profile.entries))
    return _write_csv(out_dir / "plot_energy_profile.csv", ("index", "revision", "mean_watts"), rows)


def write_records(out_dir: Path, records: Sequence[EntropyRecord]) -> Path:
    header = (
        "revision",
        "added_entropy_bits",
        "removed_entropy_bits",
        "delta_watts",
        "added_token_count",
        "removed_token_count",
        "skipped_reason",
    )
    rows = (
        (
            r.revision,
            _num(r.added_entropy_bits),
            _num(r.removed_entropy_bits),
            _num(r.delta_watts),
            r.added_token_count,
            r.removed_token_count,
            r.skipped_reason or "",
        )
        for r in records
    )
    return _write_csv(out_dir / "part1_records.csv", header, rows)


def write_part1(out_dir: Path, result: Part1Result, config: dict) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_records(out_dir, result.records)]
    summary = {
        "corpus_revision": result.corpus_revision,
        "order": result.order,
        "n_records": len(result.records),
        "outlier_policy": result.outliers,
        "seed": result.seed,
        "permutations": result.permutations,
        "added": result.added.as_dict(),
        "removed": result.removed.as_dict(),
        "config": config,
    }
    written.append(_write_json(out_dir / "part1_summary.json", summary))
    for stream, summ in (("added", result.added), ("removed", result.removed)):
        flagged = set(summ.outlier_revisions)
        rows = (
            (rev, _num(d), _num(h), int(rev in flagged)) for rev, h, d in defined_points(result.records, stream)
        )
        written.append(
            _write_csv(
                out_dir / f"plot_{stream}_entropy_vs_delta.csv",
                ("revision", "delta_watts", "cross_entropy_bits", "outlier"),
                rows,
            )
        )
    return written


def write_part2(out_dir: Path, windows: Sequence[WindowResult], config: dict) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    header = (
        "corpus_index",
        "corpus_revision",
        "window_size",
        "added_correlation",
        "removed_correlation",
        "n_points",
        "n_added_points",
        "n_removed_points",
        "error",
    )
    rows = (
        (
            w.corpus_index,
            w.corpus_revision,
            w.window_size,
            _num(w.added_correlation),
            _num(w.removed_correlation),
            w.n_points,
            w.n_added_points,
            w.n_removed_points,
            w.error or "",
        )
        for w in windows
    )
    written = [_write_csv(out_dir / "part2_windows.csv", header, rows)]
    for stream in STREAMS:
        rows = (
            (w.corpus_index, w.corpus_revision, _num(getattr(w, f"{stream}_correlation")), getattr(w, f"n_{stream}_points"))
            for w in windows
        )
        written.append(
            _write_csv(
                out_dir / f"plot_{stream}_window_correlation.csv",
                ("corpus_index", "corpus_revision", "correlation", "n_points"),
                rows,
            )
        )
    written.append(
        _write_json(out_dir / "part2_summary.json", {"n_windows": len(windows), "config": config})
    )
    return written


def write_part3(out_dir: Path, result: Part3Result, records: Sequence[EntropyRecord], config: dict) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    deltas = {r.revision: r.delta_watts for r in records}
    payload: dict = {"config": config}
    written = []
    for stream in STREAMS:
        g = getattr(result, stream)
        payload[stream] = {
            "mean_abs_delta": g.mean_abs_delta,
            "std_abs_delta": g.std_abs_delta,
            "groups": {
                name: {
                    "count": len(members),
                    "revisions": [rev for rev, _ in members],
                    "box": box.as_dict() if (box := result.boxes[stream][name]) is not None else None,
                }
                for name, members in g.groups().items()
            },
            "medians": {
                name: (box.median if (box := result.boxes[stream][name]) is not None else None)
                for name in ("low", "medium", "high")
            },
        }
        rows = (
            (band(g.z_scores[rev]), rev, _num(h), _num(abs(deltas[rev])), _num(g.z_scores[rev]))
            for name, members in g.groups().items()
            for rev, h in members
        )
        written.append(
            _write_csv(
                out_dir / f"plot_{stream}_groups.csv",
                ("group", "revision", "cross_entropy_bits", "abs_delta_watts", "z_score"),
                rows,
            )
        )
    written.insert(0, _write_json(out_dir / "part3_groups.json", payload))
    return written
