"""The three analyses: static corpus, sliding corpora, and |delta| bands."""

from __future__ import annotations

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .energy import EnergyDelta
from .lexer import TokenStream, tokenize_lines
from .lm import EmptyTextError, NGramModel, build_model, cross_entropy
from .stats import (
    BoxSummary,
    GroupedEntropies,
    box_summary,
    filter_entropy_outliers,
    group_by_abs_delta,
    mean,
    pearson_or_none,
)
from .vcs import Changeset

log = logging.getLogger(__name__)

DEFAULT_ORDER = 3
DEFAULT_WINDOW = 35
DEFAULT_PERMUTATIONS = 100
STREAMS = ("added", "removed")
OUTLIER_POLICIES = ("on", "off", "both")

CorpusLoader = Callable[[str], TokenStream]


class PipelineError(ValueError):
    pass


@dataclass
class EntropyRecord:
    revision: str
    delta_watts: float
    added_entropy_bits: float | None = None
    removed_entropy_bits: float | None = None
    added_token_count: int = 0
    removed_token_count: int = 0
    added_skipped_reason: str | None = None
    removed_skipped_reason: str | None = None

    def entropy(self, stream: str) -> float | None:
        return getattr(self, f"{stream}_entropy_bits")

    @property
    def skipped_reason(self) -> str | None:
        reasons = [r for r in (self.added_skipped_reason, self.removed_skipped_reason) if r]
        return ";".join(reasons) if reasons else None


@dataclass
class CorrelationSummary:
    """Pearson r for one stream, with and without entropy outliers."""

    stream: str
    n_points: int
    n_skipped: int
    r: float | None = None
    r_without_outliers: float | None = None
    n_without_outliers: int | None = None
    outlier_revisions: list[str] = field(default_factory=list)
    permutation_mean_abs_r: float | None = None

    def as_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "n_skipped": self.n_skipped,
            "r": self.r,
            "r_without_outliers": self.r_without_outliers,
            "n_without_outliers": self.n_without_outliers,
            "outlier_revisions": self.outlier_revisions,
            "permutation_mean_abs_r": self.permutation_mean_abs_r,
        }


@dataclass
class Part1Result:
    corpus_revision: str
    order: int
    records: list[EntropyRecord]
    added: CorrelationSummary
    removed: CorrelationSummary
    seed: int
    permutations: int
    outliers: str

    @property
    def added_r(self) -> float | None:
        return self.added.r

    @property
    def removed_r(self) -> float | None:
        return self.removed.r


@dataclass
class WindowResult:
    corpus_index: int
    corpus_revision: str
    window_size: int
    added_correlation: float | None = None
    removed_correlation: float | None = None
    n_points: int = 0
    n_added_points: int = 0
    n_removed_points: int = 0
    error: str | None = None


@dataclass
class Part3Result:
    added: GroupedEntropies
    removed: GroupedEntropies
    boxes: dict[str, dict[str, BoxSummary | None]]


# -- scoring ----------------------------------------------------------------


def score_changeset(model: NGramModel, changeset: Changeset, delta_watts: float) -> EntropyRecord:
    rec = EntropyRecord(changeset.revision, delta_watts)
    for stream, lines in (("added", changeset.added_lines), ("removed", changeset.removed_lines)):
        if not lines:
            setattr(rec, f"{stream}_skipped_reason", f"no-{stream}-lines")
            continue
        tokens = tokenize_lines(lines, f"{changeset.revision}:{stream}")
        try:
            res = cross_entropy(model, tokens)
        except EmptyTextError:
            setattr(rec, f"{stream}_skipped_reason", "empty-after-lexing")
            continue
        setattr(rec, f"{stream}_entropy_bits", res.cross_entropy_bits)
        setattr(rec, f"{stream}_token_count", res.token_count)
    return rec


_WORKER_MODEL: NGramModel | None = None


def _init_worker(model: NGramModel) -> None:
    global _WORKER_MODEL
    _WORKER_MODEL = model


def _score_in_worker(args: tuple[Changeset, float]) -> EntropyRecord:
    return score_changeset(_WORKER_MODEL, *args)


def score_changesets(
    model: NGramModel, changesets: Sequence[Changeset], deltas: Sequence[EnergyDelta], jobs: int = 1
) -> list[EntropyRecord]:
    """Score every changeset against ``model``; output follows changeset order."""
    pairs = list(zip(changesets, join_deltas(changesets, deltas)))
    if jobs > 1 and len(pairs) > 1:
        chunk = max(1, len(pairs) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(model,)) as pool:
            return list(pool.map(_score_in_worker, pairs, chunksize=chunk))
    return [score_changeset(model, cs, d) for cs, d in pairs]


def join_deltas(changesets: Sequence[Changeset], deltas: Sequence[EnergyDelta]) -> list[float]:
    """Delta value for each changeset, matched by revision (1:1 required)."""
    by_rev: dict[str, float] = {}
    for d in deltas:
        if d.revision in by_rev:
            raise PipelineError(f"revision {d.revision!r} has more than one delta")
        by_rev[d.revision] = d.delta_watts
    seen: set[str] = set()
    out = []
    for cs in changesets:
        if cs.revision in seen:
            raise PipelineError(f"revision {cs.revision!r} has more than one changeset")
        seen.add(cs.revision)
        if cs.revision not in by_rev:
            raise PipelineError(f"changeset {cs.revision!r} has no energy delta")
        out.append(by_rev[cs.revision])
    return out


def defined_points(records: Sequence[EntropyRecord], stream: str) -> list[tuple[str, float, float]]:
    """``(revision, entropy, delta)`` for records whose ``stream`` was scored."""
    return [(r.revision, r.entropy(stream), r.delta_watts) for r in records if r.entropy(stream) is not None]


def permutation_baseline(points: Sequence[tuple[str, float, float]], permutations: int, seed: int) -> float | None:
    """Mean |r| after randomly re-pairing deltas with entropies."""
    if len(points) < 2 or permutations <= 0:
        return None
    rng = random.Random(seed)
    hs = [p[1] for p in points]
    ds = [p[2] for p in points]
    rs = []
    for _ in range(permutations):
        shuffled = ds[:]
        rng.shuffle(shuffled)
        r = pearson_or_none(hs, shuffled)
        if r is not None:
            rs.append(abs(r))
    return mean(rs) if rs else None


def summarize_stream(
    records: Sequence[EntropyRecord], stream: str, outliers: str = "both", permutations: int = 0, seed: int = 0
) -> CorrelationSummary:
    points = defined_points(records, stream)
    summary = CorrelationSummary(stream, len(points), len(records) - len(points))
    if outliers in ("off", "both"):
        summary.r = pearson_or_none([p[1] for p in points], [p[2] for p in points])
    if outliers in ("on", "both"):
        kept, flagged = filter_entropy_outliers(points)
        summary.r_without_outliers = pearson_or_none([p[1] for p in kept], [p[2] for p in kept])
        summary.n_without_outliers = len(kept)
        summary.outlier_revisions = [p[0] for p in flagged]
    summary.permutation_mean_abs_r = permutation_baseline(points, permutations, seed)
    return summary


# -- the three analyses -----------------------------------------------------


def run_part1(
    corpus: TokenStream | NGramModel,
    changesets: Sequence[Changeset],
    deltas: Sequence[EnergyDelta],
    order: int = DEFAULT_ORDER,
    *,
    corpus_revision: str = "",
    outliers: str = "both",
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    jobs: int = 1,
) -> Part1Result:
    """Score all changesets against one static corpus model and correlate."""
    if outliers not in OUTLIER_POLICIES:
        raise ValueError(f"outliers must be one of {OUTLIER_POLICIES}")
    model = corpus if isinstance(corpus, NGramModel) else build_model(corpus, order)
    records = score_changesets(model, changesets, deltas, jobs)
    summaries = {}
    for stream in STREAMS:
        n = len(defined_points(records, stream))
        if n < 2:
            raise PipelineError(f"{stream} stream has {n} scorable records, need at least 2")
        summaries[stream] = summarize_stream(records, stream, outliers, permutations, seed)
    return Part1Result(
        corpus_revision or getattr(corpus, "source_id", ""),
        model.order,
        records,
        summaries["added"],
        summaries["removed"],
        seed,
        permutations,
        outliers,
    )


def window_starts(n_revisions: int, window: int, stride: int = 1) -> list[int]:
    """Corpus indices that have a full window of later revisions."""
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")
    return list(range(0, max(0, n_revisions - window), stride))


def _run_window(
    index: int,
    revisions: Sequence[str],
    changesets: Sequence[Changeset],
    deltas: Sequence[float],
    loader: CorpusLoader,
    window: int,
    order: int,
) -> WindowResult:
    corpus_rev = revisions[index]
    result = WindowResult(index, corpus_rev, window)
    try:
        model = build_model(loader(corpus_rev), order)
    except Exception as exc:  # annotate, never abort the whole run
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    # changesets[j] is the change into revisions[j + 1]
    span = range(index, index + window)
    records = [score_changeset(model, changesets[j], deltas[j]) for j in span]
    added = defined_points(records, "added")
    removed = defined_points(records, "removed")
    result.n_added_points = len(added)
    result.n_removed_points = len(removed)
    result.n_points = min(len(added), len(removed))
    result.added_correlation = pearson_or_none([p[1] for p in added], [p[2] for p in added])
    result.removed_correlation = pearson_or_none([p[1] for p in removed], [p[2] for p in removed])
    return result


def _run_window_star(args) -> WindowResult:
    return _run_window(*args)


def run_part2(
    revisions: Sequence[str],
    changesets: Sequence[Changeset],
    deltas: Sequence[EnergyDelta],
    corpus_loader: CorpusLoader,
    window: int = DEFAULT_WINDOW,
    order: int = DEFAULT_ORDER,
    stride: int = 1,
    jobs: int = 1,
) -> list[WindowResult]:
    """Correlate each corpus revision's model with the next ``window`` changesets.

    ``changesets[i]`` must be the change from ``revisions[i]`` to
    ``revisions[i+1]``.  ``corpus_loader`` must be picklable when ``jobs > 1``.
    """
    if len(changesets) != len(revisions) - 1:
        raise PipelineError(f"{len(revisions)} revisions need {len(revisions) - 1} changesets, got {len(changesets)}")
    for i, cs in enumerate(changesets):
        if cs.revision != revisions[i + 1]:
            raise PipelineError(f"changeset {i} is for {cs.revision!r}, expected {revisions[i + 1]!r}")
    delta_values = join_deltas(changesets, deltas)
    starts = window_starts(len(revisions), window, stride)
    if not starts:
        log.warning("window of %d exceeds the %d available changesets; no windows", window, len(changesets))
        return []
    tasks = [(i, revisions, changesets, delta_values, corpus_loader, window, order) for i in starts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_window_star, tasks))
    return [_run_window(*t) for t in tasks]


def run_part3(records: Sequence[EntropyRecord]) -> Part3Result:
    """Band changesets by |delta| z-score and summarize each band's entropies."""
    grouped = {}
    boxes: dict[str, dict[str, BoxSummary | None]] = {}
    for stream in STREAMS:
        points = defined_points(records, stream)
        if len(points) < 2:
            raise PipelineError(f"{stream} stream has {len(points)} scorable records, need at least 2")
        g = group_by_abs_delta(points)
        grouped[stream] = g
        boxes[stream] = {
            name: box_summary([h for _, h in members]) if members else None for name, members in g.groups().items()
        }
    return Part3Result(grouped["added"], grouped["removed"], boxes)

