"""Order-n language models with interpolated modified Kneser-Ney smoothing.

Counting follows the usual toolkit conventions: every sentence is framed as
``<s> w1 ... wk </s>``, the highest order keeps raw counts, lower orders use
continuation counts (number of distinct left extensions) except for n-grams
that begin with ``<s>``, which cannot be extended to the left and keep their
raw counts.  The unigram level interpolates with the uniform distribution over
the vocabulary (``<unk>`` included, ``<s>`` excluded).

A built model is stored in backoff form (log10 probability and log10 backoff
per n-gram), the same shape as an ARPA file, so built and imported models
score through one code path.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .lexer import BOS, EOS, TokenStream, decode_lexeme, encode_lexeme

log = logging.getLogger(__name__)

UNK = "<unk>"
SPECIAL = frozenset((BOS, EOS, UNK))
LOG10_ZERO = -99.0  # ARPA convention for "never predicted"
_LOG2_10 = math.log2(10.0)

NgramTable = dict[tuple[str, ...], tuple[float, float]]


class LanguageModelError(ValueError):
    pass


class EmptyCorpusError(LanguageModelError):
    pass


class EmptyTextError(LanguageModelError):
    pass


class ArpaFormatError(LanguageModelError):
    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Discount:
    """Modified Kneser-Ney discounts for one order."""

    d1: float
    d2: float
    d3plus: float
    fallback: bool = False

    def __call__(self, count: int | float) -> float:
        if count <= 0:
            return 0.0
        if count == 1:
            return self.d1
        if count == 2:
            return self.d2
        return self.d3plus


def estimate_discount(count_of_counts: Mapping[int, int]) -> Discount:
    """Closed-form discount estimates from count-of-counts n1..n4.

    ``D_j = j - (j+1) * Y * n_{j+1} / n_j`` with ``Y = n1 / (n1 + 2 n2)``.
    An undefined or non-positive estimate becomes 0.5 and one above ``j`` is
    clamped to ``j``, so every discount lies in ``(0, j]`` and every context
    keeps some backoff mass.
    """
    n = [count_of_counts.get(j, 0) for j in range(5)]
    fallback = False
    ds = []
    y_den = n[1] + 2 * n[2]
    y = n[1] / y_den if y_den else None
    for j in (1, 2, 3):
        if y is None or n[j] == 0:
            ds.append(0.5)
            fallback = True
            continue
        d = j - (j + 1) * y * n[j + 1] / n[j]
        clamped = 0.5 if d <= 0 else min(d, float(j))
        fallback |= clamped != d
        ds.append(clamped)
    return Discount(ds[0], ds[1], ds[2], fallback)


@dataclass(frozen=True)
class EntropyResult:
    cross_entropy_bits: float
    perplexity: float
    token_count: int
    oov_count: int

    @classmethod
    def from_log2_sum(cls, log2_sum: float, token_count: int, oov_count: int) -> "EntropyResult":
        h = -log2_sum / token_count
        return cls(h, 2.0**h, token_count, oov_count)


@dataclass(frozen=True, eq=False)
class NGramModel:
    """An immutable backoff n-gram model.

    ``tables[k-1]`` maps each k-gram to ``(log10 prob, log10 backoff)``.
    ``counts``, ``discounts`` and ``continuation_counts`` are only present on
    models built from a corpus; ARPA imports carry the tables alone.
    """

    order: int
    tables: tuple[NgramTable, ...]
    counts: tuple[dict[tuple[str, ...], int], ...] | None = None
    discounts: tuple[Discount, ...] | None = None
    continuation_counts: tuple[dict[tuple[str, ...], tuple[int, int, int]], ...] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(g[0] for g in self.tables[0])

    @property
    def predictable_vocabulary(self) -> list[str]:
        """Every word the model can predict, i.e. the vocabulary minus ``<s>``."""
        return sorted(g[0] for g in self.tables[0] if g[0] != BOS)

    def map_word(self, word: str) -> str:
        return word if (word,) in self.tables[0] else UNK

    def log10_prob(self, context: Sequence[str], word: str) -> float:
        """log10 P(word | context) with ARPA backoff semantics."""
        word = self.map_word(word)
        keep = self.order - 1
        ctx = tuple(self.map_word(w) for w in context[max(0, len(context) - keep) :]) if keep else ()
        acc = 0.0
        for start in range(len(ctx) + 1):
            hist = ctx[start:]
            entry = self.tables[len(hist)].get(hist + (word,))
            if entry is not None:
                return acc + entry[0]
            if hist:
                ctx_entry = self.tables[len(hist) - 1].get(hist)
                if ctx_entry is not None:
                    acc += ctx_entry[1]
        # map_word guarantees the unigram exists unless <unk> itself is absent
        return LOG10_ZERO


def _sentences(corpus) -> list[list[str]]:
    if isinstance(corpus, TokenStream):
        sents = corpus.sentences()
    else:
        sents = [list(s) for s in corpus]
    # markers inside a sentence carry no meaning for counting
    return [[w for w in s if w not in SPECIAL] for s in sents if any(w not in SPECIAL for w in s)]


def _count_of_counts(counts: Mapping[tuple[str, ...], int]) -> dict[int, int]:
    coc: dict[int, int] = defaultdict(int)
    for c in counts.values():
        if 1 <= c <= 4:
            coc[c] += 1
    return dict(coc)


def count_ngrams(sentences: Iterable[Sequence[str]], order: int) -> list[dict[tuple[str, ...], int]]:
    """Adjusted counts per order (index k-1 holds k-grams).

    Top order: raw counts.  Lower orders: continuation counts, except that
    n-grams starting with ``<s>`` carry raw counts.
    """
    adjusted: list[dict[tuple[str, ...], int]] = [defaultdict(int) for _ in range(order)]
    for words in sentences:
        toks = (BOS, *words, EOS)
        for i in range(1, len(toks)):
            start = max(0, i - order + 1)
            gram = toks[start : i + 1]
            adjusted[len(gram) - 1][gram] += 1
    for k in range(order - 1, 0, -1):
        lower = adjusted[k - 1]
        for gram in adjusted[k]:
            suffix = gram[1:]
            if suffix[0] != BOS:
                lower[suffix] += 1
    unigrams = adjusted[0]
    unigrams.setdefault((BOS,), 0)
    unigrams.setdefault((UNK,), 0)
    unigrams[(BOS,)] = 0
    unigrams[(UNK,)] = 0
    return [dict(t) for t in adjusted]


def build_model(corpus, order: int = 3, smoothing: bool = True) -> NGramModel:
    """Estimate an interpolated modified Kneser-Ney model from ``corpus``.

    ``corpus`` is a TokenStream or an iterable of sentences (lists of
    lexemes).  ``smoothing=False`` zeroes every discount, giving the
    maximum-likelihood estimate of the adjusted counts.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    sentences = _sentences(corpus)
    if not sentences:
        raise EmptyCorpusError("corpus contains no sentences")

    adjusted = count_ngrams(sentences, order)
    if smoothing:
        discounts = tuple(estimate_discount(_count_of_counts(adjusted[k])) for k in range(order))
    else:
        discounts = tuple(Discount(0.0, 0.0, 0.0) for _ in range(order))
    for k, d in enumerate(discounts, 1):
        if d.fallback:
            log.debug("order %d: degenerate count-of-counts, discounts %s", k, d)

    # per-context statistics: denominator and (N1, N2, N3+) continuation tallies
    context_stats: list[dict[tuple[str, ...], list[int]]] = []
    for k in range(order):
        stats: dict[tuple[str, ...], list[int]] = defaultdict(lambda: [0, 0, 0, 0])
        for gram, c in adjusted[k].items():
            s = stats[gram[:-1]]
            s[0] += c
            if c > 0:
                s[min(c, 3)] += 1
        context_stats.append(dict(stats))

    def gamma(k: int, ctx: tuple[str, ...]) -> float:
        den, n1, n2, n3 = context_stats[k][ctx]
        d = discounts[k]
        return (d.d1 * n1 + d.d2 * n2 + d.d3plus * n3) / den

    probs: list[dict[tuple[str, ...], float]] = []
    vocab_size = sum(1 for g in adjusted[0] if g[0] != BOS)
    uni_den = context_stats[0][()][0]
    uni_gamma = gamma(0, ())
    d = discounts[0]
    p1 = {}
    for gram, c in adjusted[0].items():
        if gram[0] == BOS:
            continue
        p1[gram] = (c - d(c)) / uni_den + uni_gamma / vocab_size
    probs.append(p1)
    for k in range(1, order):
        d = discounts[k]
        lower = probs[k - 1]
        pk = {}
        for gram, c in adjusted[k].items():
            ctx = gram[:-1]
            den = context_stats[k][ctx][0]
            # the suffix of a counted n-gram is always counted one order down
            pk[gram] = (c - d(c)) / den + gamma(k, ctx) * lower[gram[1:]]
        probs.append(pk)

    tables: list[NgramTable] = []
    for k in range(order):
        table: NgramTable = {}
        next_ctx = context_stats[k + 1] if k + 1 < order else {}
        for gram, p in probs[k].items():
            bo = _log10(gamma(k + 1, gram)) if gram in next_ctx else 0.0
            table[gram] = (_log10(p), bo)
        if k == 0:
            table[(BOS,)] = (LOG10_ZERO, _log10(gamma(1, (BOS,))) if (BOS,) in next_ctx else 0.0)
        tables.append(table)

    continuation = tuple(
        {ctx: (s[1], s[2], s[3]) for ctx, s in context_stats[k].items()} for k in range(order)
    )
    return NGramModel(
        order=order,
        tables=tuple(tables),
        counts=tuple(adjusted),
        discounts=discounts,
        continuation_counts=continuation,
        metadata={
            "smoothing": "modified-kneser-ney" if smoothing else "none",
            "sentences": len(sentences),
            "discount_fallback": [k + 1 for k, d in enumerate(discounts) if d.fallback],
        },
    )


def _log10(p: float) -> float:
    return math.log10(p) if p > 0 else -math.inf


def probability(model: NGramModel, context: Sequence[str], word: str) -> float:
    """P(word | context); ``context`` is truncated to the last n-1 tokens."""
    return 10.0 ** model.log10_prob(context, word)


def cross_entropy(model: NGramModel, text: TokenStream | Sequence[str]) -> EntropyResult:
    """Per-token cross-entropy in bits of ``text`` under ``model``.

    ``<s>`` resets the context and is never predicted; ``</s>`` is predicted
    like any other token.  Tokens before the first ``<s>`` are scored with an
    empty context.
    """
    words = text.texts if isinstance(text, TokenStream) else list(text)
    ctx: list[str] = []
    total = 0.0
    n = 0
    oov = 0
    for w in words:
        if w == BOS:
            ctx = [BOS]
            continue
        if model.map_word(w) == UNK:
            oov += 1
        total += model.log10_prob(ctx, w)
        n += 1
        ctx.append(w)
    if n == 0:
        raise EmptyTextError("text has no scorable tokens")
    return EntropyResult.from_log2_sum(total * _LOG2_10, n, oov)


# -- ARPA interchange -------------------------------------------------------


def _fmt(x: float) -> str:
    if x == -math.inf or x < LOG10_ZERO:
        x = LOG10_ZERO
    return repr(float(x))


def export_arpa(model: NGramModel, destination: str | Path | IO[str]) -> None:
    """Write ``model`` in ARPA format, entries sorted for byte-stable output."""
    lines = ["", "\\data\\"]
    for k, table in enumerate(model.tables, 1):
        lines.append(f"ngram {k}={len(table)}")
    for k, table in enumerate(model.tables, 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for gram in sorted(table):
            lp, bo = table[gram]
            row = f"{_fmt(lp)}\t{' '.join(map(encode_lexeme, gram))}"
            if k < model.order:
                row += f"\t{_fmt(bo)}"
            lines.append(row)
    lines.append("")
    lines.append("\\end\\")
    payload = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(payload)
    else:
        Path(destination).write_text(payload, encoding="utf-8")


def import_arpa(source: str | Path | IO[str]) -> NGramModel:
    """Read an ARPA file into a backoff model (probabilities and backoffs only)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    return parse_arpa(text)


def parse_arpa(text: str) -> NGramModel:
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        i += 1
    if i == len(lines):
        raise ArpaFormatError("missing \\data\\ header")
    i += 1
    declared: dict[int, int] = {}
    while i < len(lines):
        s = lines[i].strip()
        if not s:
            i += 1
            continue
        if not s.startswith("ngram "):
            break
        try:
            k_str, c_str = s[len("ngram ") :].split("=")
            declared[int(k_str)] = int(c_str)
        except ValueError:
            raise ArpaFormatError(f"bad count line {s!r}", i + 1) from None
        i += 1
    if not declared:
        raise ArpaFormatError("empty \\data\\ section", i + 1)
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise ArpaFormatError("n-gram orders in \\data\\ are not contiguous from 1", i + 1)

    tables: list[NgramTable] = [{} for _ in range(order)]
    current: int | None = None
    ended = False
    while i < len(lines):
        s = lines[i].strip()
        lineno = i + 1
        i += 1
        if not s:
            continue
        if s == "\\end\\":
            ended = True
            break
        if s.startswith("\\"):
            if not (s.endswith("-grams:") and s[1:-7].isdigit()):
                raise ArpaFormatError(f"malformed section header {s!r}", lineno)
            current = int(s[1:-7])
            if current not in declared:
                raise ArpaFormatError(f"section for undeclared order {current}", lineno)
            continue
        if current is None:
            raise ArpaFormatError("n-gram entry outside any section", lineno)
        parts = s.split()
        if len(parts) not in (current + 1, current + 2):
            raise ArpaFormatError(f"expected {current} words in {s!r}", lineno)
        try:
            lp = float(parts[0])
            bo = float(parts[current + 1]) if len(parts) == current + 2 else 0.0
        except ValueError:
            raise ArpaFormatError(f"non-numeric weight in {s!r}", lineno) from None
        tables[current - 1][tuple(decode_lexeme(w) for w in parts[1 : current + 1])] = (lp, bo)
    if not ended:
        raise ArpaFormatError("missing \\end\\ marker", len(lines))
    for k, n in declared.items():
        if len(tables[k - 1]) != n:
            raise ArpaFormatError(f"order {k}: declared {n} entries, found {len(tables[k - 1])}")
    if (UNK,) not in tables[0]:
        # closed-vocabulary file: give <unk> zero mass
        tables[0][(UNK,)] = (LOG10_ZERO, 0.0)
    return NGramModel(order=order, tables=tuple(tables), metadata={"source": "arpa"})


# -- native model files -----------------------------------------------------

MODEL_FORMAT = "changeset-entropy-model/1"


def save_model(model: NGramModel, destination: str | Path) -> None:
    """Write the full model (tables, counts, discounts) as JSON."""

    def grams(d):
        return [[list(g), *v] if isinstance(v, tuple) else [list(g), v] for g, v in sorted(d.items())]

    payload = {
        "format": MODEL_FORMAT,
        "order": model.order,
        "tables": [grams(t) for t in model.tables],
        "counts": [grams(c) for c in model.counts] if model.counts is not None else None,
        "discounts": [[d.d1, d.d2, d.d3plus, d.fallback] for d in model.discounts] if model.discounts else None,
        "metadata": model.metadata,
    }
    Path(destination).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_model(source: str | Path) -> NGramModel:
    """Load a model written by :func:`save_model`, or any ARPA file (``.arpa``)."""
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".arpa" or text.lstrip().startswith("\\data\\"):
        return parse_arpa(text)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LanguageModelError(f"{path}: not a model file ({exc})") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise LanguageModelError(f"{path}: unrecognised model format")

    def ungram(rows, pair: bool):
        return {tuple(r[0]): (r[1], r[2]) if pair else r[1] for r in rows}

    return NGramModel(
        order=payload["order"],
        tables=tuple(ungram(t, True) for t in payload["tables"]),
        counts=tuple(ungram(c, False) for c in payload["counts"]) if payload["counts"] is not None else None,
        discounts=tuple(Discount(*d) for d in payload["discounts"]) if payload["discounts"] else None,
        metadata=payload.get("metadata", {}),
    )
