"""Command-line entry point.

Subcommands::

    changeset-entropy extract  (--repo PATH --vcs {hg,git} | --diff-dir DIR) --profile CSV --out DIR
    changeset-entropy analyze  {part1,part2,part3,all} (--repo ... | --diff-dir ...) --profile CSV --out DIR
    changeset-entropy lm build  CORPUS --out MODEL
    changeset-entropy lm score  TEXT --model MODEL
    changeset-entropy lm export --model MODEL --out ARPA

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .energy import ProfileError, compute_deltas, load_profile
from .lexer import DEFAULT_CPP_EXTENSIONS, TokenStream, cpp_filter, tokenize_lines, tokenize_source
from .lm import LanguageModelError, build_model, cross_entropy, export_arpa, load_model, save_model
from .pipeline import (
    DEFAULT_ORDER,
    DEFAULT_PERMUTATIONS,
    DEFAULT_WINDOW,
    OUTLIER_POLICIES,
    PipelineError,
    run_part1,
    run_part2,
    run_part3,
    window_starts,
)
from .reports import write_part1, write_part2, write_part3, write_profile_plot
from .stats import UndefinedCorrelationError, ZeroVarianceError
from .vcs import (
    CorpusDirLoader,
    DiffParseError,
    RepoCorpusLoader,
    VcsError,
    changeset_from_diff,
    changesets_from_diff_dir,
    diff_filename,
    extract_diffs,
    read_diff_dir,
)

log = logging.getLogger("changeset_entropy")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    repo_path: str | None = None
    diff_dir: str | None = None
    vcs_kind: str = "hg"
    profile_path: str | None = None
    corpus_revision: str | None = None
    corpus_dir: str | None = None
    order: int = DEFAULT_ORDER
    window_size: int = DEFAULT_WINDOW
    stride: int = 1
    cpp_extensions: tuple[str, ...] = DEFAULT_CPP_EXTENSIONS
    outlier_policy: str = "both"
    output_dir: str | None = None
    jobs: int = 1
    seed: int = 0
    permutations: int = DEFAULT_PERMUTATIONS

    def validate(self, need_source: bool = True) -> None:
        if need_source:
            if bool(self.repo_path) == bool(self.diff_dir):
                raise UsageError("exactly one of --repo or --diff-dir is required")
            src = self.repo_path or self.diff_dir
            if not Path(src).is_dir():
                raise UsageError(f"no such directory: {src}")
        if self.vcs_kind not in ("hg", "git"):
            raise UsageError(f"--vcs must be hg or git, got {self.vcs_kind!r}")
        if not self.profile_path:
            raise UsageError("--profile is required")
        if not Path(self.profile_path).is_file():
            raise UsageError(f"no such profile file: {self.profile_path}")
        if not self.output_dir:
            raise UsageError("--out is required")
        if self.order < 1:
            raise UsageError("--order must be >= 1")
        if self.window_size < 2:
            raise UsageError("--window must be >= 2")
        if self.stride < 1:
            raise UsageError("--stride must be >= 1")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if self.outlier_policy not in OUTLIER_POLICIES:
            raise UsageError(f"--outliers must be one of {', '.join(OUTLIER_POLICIES)}")

    def report_dict(self) -> dict:
        """Settings that affect results; paths, VCS kind and parallelism are excluded."""
        d = asdict(self)
        for k in ("repo_path", "diff_dir", "vcs_kind", "profile_path", "corpus_dir", "output_dir", "jobs"):
            d.pop(k)
        d["cpp_extensions"] = list(d["cpp_extensions"])
        return d


# argparse dest -> RunConfig field
_FLAG_FIELDS = {
    "repo": "repo_path",
    "diff_dir": "diff_dir",
    "vcs": "vcs_kind",
    "profile": "profile_path",
    "corpus_rev": "corpus_revision",
    "corpus_dir": "corpus_dir",
    "order": "order",
    "window": "window_size",
    "stride": "stride",
    "ext": "cpp_extensions",
    "outliers": "outlier_policy",
    "out": "output_dir",
    "jobs": "jobs",
    "seed": "seed",
    "permutations": "permutations",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by ``--config`` file values, overridden by flags."""
    valid = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            data = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {cfg_path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config file {cfg_path} must hold a JSON object")
        for key, value in data.items():
            name = _FLAG_FIELDS.get(key.replace("-", "_"), key)
            if name not in valid:
                raise UsageError(f"unknown config key {key!r}")
            merged[name] = value
    for dest, name in _FLAG_FIELDS.items():
        if hasattr(args, dest):
            merged[name] = getattr(args, dest)
    if "cpp_extensions" in merged:
        exts = merged["cpp_extensions"]
        if isinstance(exts, str):
            exts = exts.split(",")
        merged["cpp_extensions"] = tuple(e if e.startswith(".") else f".{e}" for e in exts)
    return RunConfig(**merged)


def _source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--repo", help="path to a local hg or git repository")
    p.add_argument("--diff-dir", help="directory of <index>_<revision>.diff files (offline mode)")
    p.add_argument("--vcs", choices=("hg", "git"), help="repository kind (default hg)")
    p.add_argument("--profile", help="energy profile CSV with header revision,mean_watts")
    p.add_argument("--ext", nargs="+", help="file extensions treated as C++ (default: %s)" % " ".join(DEFAULT_CPP_EXTENSIONS))
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes (default 1); results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changeset-entropy",
        description="Cross-entropy of code changesets against n-gram models of a codebase, "
        "correlated with per-revision energy deltas.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser(
        "extract",
        help="write per-revision diffs and changeset files",
        argument_default=argparse.SUPPRESS,
        description="For each consecutive profile pair, write <index>_<revision>.diff and "
        "changesets/<index>_<revision>.json into --out.",
    )
    _source_args(ex)
    ex.add_argument("--corpora", action="store_true", default=False, help="also write corpora/<revision>.txt for every profile revision")
    ex.set_defaults(handler=cmd_extract)

    an = sub.add_parser(
        "analyze",
        help="run an analysis and write its reports",
        argument_default=argparse.SUPPRESS,
        description="part1: one static corpus; part2: sliding corpora; part3: |delta| bands; all: every part.",
    )
    an.add_argument("part", choices=("part1", "part2", "part3", "all"))
    _source_args(an)
    an.add_argument("--corpus-rev", help="corpus revision for part1/part3 (default: first profile revision)")
    an.add_argument("--corpus-dir", help="offline corpora as <revision>.txt (default: <diff-dir>/corpora)")
    an.add_argument("--order", type=int, help=f"n-gram order (default {DEFAULT_ORDER})")
    an.add_argument("--window", type=int, help=f"part2 window size (default {DEFAULT_WINDOW})")
    an.add_argument("--stride", type=int, help="part2 corpus step (default 1)")
    an.add_argument("--outliers", choices=OUTLIER_POLICIES, help="report correlations with outliers removed (on), kept (off) or both (default)")
    an.add_argument("--seed", type=int, help="seed for the permutation baseline (default 0)")
    an.add_argument("--permutations", type=int, help=f"permutation baseline size (default {DEFAULT_PERMUTATIONS})")
    an.set_defaults(handler=cmd_analyze)

    lm = sub.add_parser("lm", help="build, score with, or export a language model")
    lm_sub = lm.add_subparsers(dest="lm_command", required=True)
    b = lm_sub.add_parser("build", help="estimate a model from a corpus file")
    b.add_argument("corpus", help="corpus text (one sentence per line) or C++ source with --lex")
    b.add_argument("--lex", action="store_true", help="treat the input as C++ source and tokenize it")
    b.add_argument("--order", type=int, default=DEFAULT_ORDER)
    b.add_argument("--out", required=True, help="model file to write (.arpa writes ARPA directly)")
    b.set_defaults(handler=cmd_lm)
    s = lm_sub.add_parser("score", help="cross-entropy of a text under a model")
    s.add_argument("text", help="text in corpus format, or C++ lines with --lex")
    s.add_argument("--model", required=True)
    s.add_argument("--lex", action="store_true", help="lex each input line as a C++ diff line")
    s.set_defaults(handler=cmd_lm)
    e = lm_sub.add_parser("export", help="write a model as ARPA")
    e.add_argument("--model", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(handler=cmd_lm)
    return parser


# -- extract ----------------------------------------------------------------


def _write_changeset_file(path: Path, cs) -> None:
    payload = {
        "revision": cs.revision,
        "parent": cs.parent,
        "added_lines": list(cs.added_lines),
        "removed_lines": list(cs.removed_lines),
        "added_tokens": tokenize_lines(cs.added_lines).to_corpus_text().splitlines(),
        "removed_tokens": tokenize_lines(cs.removed_lines).to_corpus_text().splitlines(),
    }
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_extract(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    cfg.validate()
    profile = load_profile(cfg.profile_path)
    revisions = profile.revisions
    out = Path(cfg.output_dir)
    (out / "changesets").mkdir(parents=True, exist_ok=True)
    path_filter = cpp_filter(cfg.cpp_extensions)

    if cfg.repo_path:
        diffs = extract_diffs(cfg.repo_path, cfg.vcs_kind, revisions, cfg.jobs)
    else:
        entries = read_diff_dir(cfg.diff_dir)
        got = [rev for _, rev, _ in entries]
        if got != revisions[1:]:
            raise VcsError(f"diff directory {cfg.diff_dir} does not cover the profile's revision pairs")
        diffs = [(rev, parent, text) for (_, rev, text), parent in zip(entries, revisions[:-1])]

    for index, (rev, parent, text) in enumerate(diffs, start=1):
        (out / diff_filename(index, rev)).write_text(text, encoding="utf-8")
        cs = changeset_from_diff(text, rev, parent, path_filter)
        _write_changeset_file(out / "changesets" / f"{index}_{rev}.json", cs)

    if getattr(args, "corpora", False):
        corpora = out / "corpora"
        corpora.mkdir(exist_ok=True)
        if cfg.repo_path:
            loader = RepoCorpusLoader(cfg.repo_path, cfg.vcs_kind, cfg.cpp_extensions)
            for rev in revisions:
                (corpora / f"{rev}.txt").write_text(loader(rev).to_corpus_text(), encoding="utf-8")
        else:
            src = Path(cfg.corpus_dir or Path(cfg.diff_dir) / "corpora")
            for rev in revisions:
                shutil.copyfile(src / f"{rev}.txt", corpora / f"{rev}.txt")
    log.info("wrote %d changesets to %s", len(diffs), out)
    return EXIT_OK


# -- analyze ----------------------------------------------------------------


def _corpus_loader(cfg: RunConfig):
    if cfg.repo_path:
        return RepoCorpusLoader(cfg.repo_path, cfg.vcs_kind, cfg.cpp_extensions)
    return CorpusDirLoader(cfg.corpus_dir or Path(cfg.diff_dir) / "corpora")


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    cfg.validate()
    profile = load_profile(cfg.profile_path)
    deltas = compute_deltas(profile)
    revisions = profile.revisions
    path_filter = cpp_filter(cfg.cpp_extensions)
    if cfg.repo_path:
        diffs = extract_diffs(cfg.repo_path, cfg.vcs_kind, revisions, cfg.jobs)
        changesets = [changeset_from_diff(t, r, p, path_filter) for r, p, t in diffs]
    else:
        changesets = changesets_from_diff_dir(cfg.diff_dir, revisions, path_filter)
    loader = _corpus_loader(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_profile_plot(out, profile)
    report_cfg = cfg.report_dict()
    part = args.part

    if part in ("part1", "part3", "all"):
        corpus_rev = cfg.corpus_revision or revisions[0]
        if corpus_rev not in revisions and cfg.repo_path is None:
            log.warning("corpus revision %s is not in the profile", corpus_rev)
        report_cfg["corpus_revision"] = corpus_rev
        result = run_part1(
            loader(corpus_rev),
            changesets,
            deltas,
            cfg.order,
            corpus_revision=corpus_rev,
            outliers=cfg.outlier_policy,
            permutations=cfg.permutations,
            seed=cfg.seed,
            jobs=cfg.jobs,
        )
        if part in ("part1", "all"):
            write_part1(out, result, report_cfg)
        if part in ("part3", "all"):
            write_part3(out, run_part3(result.records), result.records, report_cfg)

    if part in ("part2", "all"):
        if window_starts(len(revisions), cfg.window_size, cfg.stride):
            windows = run_part2(revisions, changesets, deltas, loader, cfg.window_size, cfg.order, cfg.stride, cfg.jobs)
        else:
            print(
                f"warning: window {cfg.window_size} needs more than {len(revisions)} profile revisions; no windows",
                file=sys.stderr,
            )
            windows = []
        write_part2(out, windows, report_cfg)
    return EXIT_OK


# -- lm ---------------------------------------------------------------------


def cmd_lm(args: argparse.Namespace) -> int:
    if args.lm_command == "build":
        path = Path(args.corpus)
        if not path.is_file():
            raise UsageError(f"no such corpus file: {path}")
        if args.order < 1:
            raise UsageError("--order must be >= 1")
        text = path.read_text(encoding="utf-8", errors="replace")
        corpus = tokenize_source(text, str(path)) if args.lex else TokenStream.from_corpus_text(text, str(path))
        model = build_model(corpus, args.order)
        if args.out.endswith(".arpa"):
            export_arpa(model, args.out)
        else:
            save_model(model, args.out)
        print(json.dumps({"order": model.order, "discounts": [[d.d1, d.d2, d.d3plus] for d in model.discounts], "vocabulary": len(model.vocabulary)}))
        return EXIT_OK

    model_path = Path(args.model)
    if not model_path.is_file():
        raise UsageError(f"no such model file: {model_path}")
    model = load_model(model_path)
    if args.lm_command == "score":
        path = Path(args.text)
        if not path.is_file():
            raise UsageError(f"no such text file: {path}")
        text = path.read_text(encoding="utf-8", errors="replace")
        stream = tokenize_lines(text.splitlines()) if args.lex else TokenStream.from_corpus_text(text)
        res = cross_entropy(model, stream)
        print(json.dumps(asdict(res), sort_keys=True))
        return EXIT_OK
    export_arpa(model, args.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        VcsError,
        DiffParseError,
        ProfileError,
        PipelineError,
        LanguageModelError,
        UndefinedCorrelationError,
        ZeroVarianceError,
        OSError,
    ) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
