"""Regenerate the frozen reference-toolkit fixtures in this directory.

Writes two fixture sets:

* ``markov``: a 200-sentence Zipf/Markov token corpus and five held-out texts.
* ``cpp``: a corpus lexed from generated C++ source and five held-out
  changeset texts (added lines of synthetic edits).

For each set, KenLM's ``lmplz`` (order 3, interpolated modified Kneser-Ney)
builds ``<set>.o3.arpa`` and the ``kenlm`` Python module scores every
held-out text.  Expected entropies (bits/token, ``</s>`` counted) go to
``expected.json``.

Usage: python make_reference.py [--lmplz PATH]
"""

from __future__ import annotations

import argparse
import json
import math
import random
import shutil
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parents[1] / "src"))

from changeset_entropy.lexer import tokenize_lines, tokenize_source  # noqa: E402


def markov_corpus(seed: int, n_sentences: int, oov: bool = False) -> list[str]:
    vocab_rng = random.Random(7)
    vocab = [f"w{i}" for i in range(400)]
    weights = [1 / (i + 1) ** 1.1 for i in range(len(vocab))]
    succ = {w: vocab_rng.choices(vocab, weights, k=5) for w in vocab}
    rng = random.Random(seed)
    words, wts = list(vocab), list(weights)
    if oov:
        words += ["zz1", "zz2"]
        wts += [0.2, 0.2]
    out = []
    for _ in range(n_sentences):
        sent = [rng.choices(words, wts)[0]]
        for _ in range(rng.randint(1, 14) - 1):
            if rng.random() < 0.6:
                sent.append(rng.choice(succ.get(sent[-1], vocab)))
            else:
                sent.append(rng.choices(words, wts)[0])
        out.append(" ".join(sent))
    return out


TYPES = ["int", "unsigned", "double", "bool", "char", "long"]
_STEMS = ["count", "index", "value", "size", "node", "buf", "len", "flags", "pos", "item", "tmp", "ptr"]
_SUFFIXES = ["", "Id", "Max", "Min", "Old", "New", "Ref", "Out", "In", "Cur", "Next", "Prev", "Tab", "List", "Map", "Key", "Val", "Len", "Ptr", "Buf"]
NAMES = [stem + suf for suf in _SUFFIXES for stem in _STEMS]
_NAME_WEIGHTS = [1 / (i + 1) ** 0.9 for i in range(len(NAMES))]


def _name(rng: random.Random) -> str:
    return rng.choices(NAMES, _NAME_WEIGHTS)[0]


def _cpp_function(rng: random.Random, k: int) -> list[str]:
    t = rng.choice(TYPES)
    a, b = _name(rng), _name(rng)
    lines = [f"{t} fn{k}({rng.choice(TYPES)} {a}, {rng.choice(TYPES)} {b}) {{"]
    for _ in range(rng.randint(1, 6)):
        c = _name(rng)
        form = rng.randrange(6)
        if form == 0:
            lines.append(f"  {c} = {a} + {b} * {rng.randint(0, 200)};")
        elif form == 1:
            lines.append(f"  if ({a} < {b}) {{ {c}++; }}")
        elif form == 2:
            lines.append(f"  for (int i = 0; i < {c}; ++i) {{ {b} += i; }}")
        elif form == 3:
            lines.append(f'  log("{c} is %d", {c});  // trace')
        elif form == 4:
            lines.append(f"  {c} = {a}->next ? {a}->next : {b};")
        else:
            lines.append(f"  /* keep */ {c} <<= {rng.randint(1, 31)};")
    lines.append(f"  return {rng.choice([a, b, '0'])};")
    lines.append("}")
    return lines


def cpp_corpus() -> str:
    rng = random.Random(11)
    lines = ["#include <stdio.h>", ""]
    for k in range(300):
        lines += _cpp_function(rng, k) + [""]
    return "\n".join(lines) + "\n"


def cpp_changesets() -> list[list[str]]:
    out = []
    for seed in range(5):
        rng = random.Random(100 + seed)
        added: list[str] = []
        for k in range(rng.randint(1, 3)):
            added += _cpp_function(rng, 500 + k)
        if seed % 2:
            added.append(f"  novelIdentifier{seed} = brandNewCall{seed}(x);")
        out.append(added)
    return out


def kenlm_entropy(arpa: Path, sentences: list[str]) -> dict:
    import kenlm

    model = kenlm.Model(str(arpa))
    log10_sum = 0.0
    tokens = 0
    oov = 0
    for s in sentences:
        words = s.split()
        log10_sum += model.score(s, bos=True, eos=True)
        tokens += len(words) + 1
        oov += sum(1 for w in words if w not in model)
    h = -log10_sum * math.log2(10) / tokens
    return {"cross_entropy_bits": h, "token_count": tokens, "oov_count": oov}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--lmplz", default=shutil.which("lmplz"))
    args = ap.parse_args()
    if not args.lmplz:
        sys.exit("lmplz not found; pass --lmplz")

    sets: dict[str, tuple[list[str], list[list[str]]]] = {}
    sets["markov"] = (
        markov_corpus(7, 200),
        [markov_corpus(8 + i, 4, oov=True) for i in range(5)],
    )
    cpp_train = tokenize_source(cpp_corpus()).to_corpus_text().splitlines()
    cpp_held = [tokenize_lines(lines).to_corpus_text().splitlines() for lines in cpp_changesets()]
    sets["cpp"] = (cpp_train, cpp_held)
    (HERE / "cpp_source.cpp").write_text(cpp_corpus(), encoding="utf-8")
    for i, lines in enumerate(cpp_changesets(), start=1):
        (HERE / f"cpp_changeset_{i}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    expected: dict = {}
    for name, (train, held) in sets.items():
        train_path = HERE / f"{name}_train.txt"
        train_path.write_text("\n".join(train) + "\n", encoding="utf-8")
        arpa = HERE / f"{name}.o3.arpa"
        with train_path.open("rb") as fin, arpa.open("wb") as fout:
            subprocess.run([args.lmplz, "-o", "3", "-S", "20%", "-T", "/tmp"], stdin=fin, stdout=fout, check=True, stderr=subprocess.DEVNULL)
        expected[name] = {}
        for i, text in enumerate(held, start=1):
            p = HERE / f"{name}_heldout_{i}.txt"
            p.write_text("\n".join(text) + "\n", encoding="utf-8")
            expected[name][p.name] = kenlm_entropy(arpa, text)
    expected["_toolkit"] = "KenLM lmplz -o 3 (interpolated modified Kneser-Ney), scored with kenlm.Model.score(bos=True, eos=True)"
    (HERE / "expected.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
