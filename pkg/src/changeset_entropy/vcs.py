"""Changeset extraction and corpus checkout through the ``hg``/``git`` executables.

Everything goes through subprocesses; no VCS library is linked.  An offline
mode reads pre-generated ``<index>_<revision>.diff`` files instead.
"""

from __future__ import annotations

import io
import logging
import os
import re
import subprocess
import tarfile
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, NamedTuple, Sequence

from .lexer import TokenStream, cpp_filter, is_cpp_path, tokenize_source

log = logging.getLogger(__name__)

PathFilter = Callable[[str], bool]
VCS_KINDS = ("hg", "git")

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_DIFF_FILE_RE = re.compile(r"^(\d+)_(.+)\.diff$")


class VcsError(RuntimeError):
    """A VCS subprocess failed."""

    def __init__(self, message: str, cmd: Sequence[str] | None = None, stderr: str = "") -> None:
        detail = f"{message}"
        if cmd:
            detail += f" [{' '.join(cmd)}]"
        if stderr:
            detail += f": {stderr.strip()}"
        super().__init__(detail)
        self.cmd = list(cmd or [])
        self.stderr = stderr


class UnknownRevisionError(VcsError):
    def __init__(self, revision: str, stderr: str = "") -> None:
        super().__init__(f"unknown revision {revision!r}", stderr=stderr)
        self.revision = revision


class EmptyCorpusError(VcsError):
    pass


class DiffParseError(ValueError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class DiffLines(NamedTuple):
    added_lines: list[str]
    removed_lines: list[str]


@dataclass(frozen=True)
class Changeset:
    revision: str
    parent: str
    added_lines: tuple[str, ...]
    removed_lines: tuple[str, ...]


# -- diff parsing -----------------------------------------------------------


def _unquote_path(p: str) -> str:
    if len(p) >= 2 and p[0] == '"' and p[-1] == '"':
        raw = p[1:-1].encode("latin-1", "backslashreplace").decode("unicode_escape")
        return raw.encode("latin-1", "replace").decode("utf-8", "replace")
    return p


def _header_path(rest: str) -> str | None:
    # "--- a/x.cpp\tTue Jan 01 ..." (hg and diff -u append a timestamp after a tab)
    p = rest.split("\t", 1)[0].rstrip()
    p = _unquote_path(p)
    if p == "/dev/null":
        return None
    if p.startswith(("a/", "b/")):
        p = p[2:]
    return p


def _split_lines(text: str) -> list[str]:
    # str.splitlines would also break on form feeds and other separators
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


def parse_unified_diff(text: str, path_filter: PathFilter = is_cpp_path) -> DiffLines:
    """Collect added/removed lines of files accepted by ``path_filter``.

    Hunk bodies are consumed by their declared line counts, so content lines
    that happen to start with ``---`` or ``+++`` are not mistaken for file
    headers.  A file is attributed to its new path (old path if deleted).
    Binary and mode-only entries have no hunks and contribute nothing.
    """
    added: list[str] = []
    removed: list[str] = []
    lines = _split_lines(text)
    old_path: str | None = None
    new_path: str | None = None
    include = False
    old_left = new_left = 0
    hunk_start = 0

    for idx, line in enumerate(lines, start=1):
        if old_left > 0 or new_left > 0:
            tag = line[:1]
            if tag == "\\":
                continue
            if tag == "+":
                new_left -= 1
                if include:
                    added.append(line[1:])
            elif tag == "-":
                old_left -= 1
                if include:
                    removed.append(line[1:])
            elif tag == " " or line == "":
                old_left -= 1
                new_left -= 1
            else:
                raise DiffParseError(f"unexpected line inside hunk starting at line {hunk_start}: {line!r}", idx)
            if old_left < 0 or new_left < 0:
                raise DiffParseError(f"hunk starting at line {hunk_start} is longer than its header declares", idx)
            continue

        if line.startswith("diff "):
            old_path = new_path = None
            include = False
        elif line.startswith("--- "):
            old_path = _header_path(line[4:])
        elif line.startswith("+++ "):
            new_path = _header_path(line[4:])
            target = new_path if new_path is not None else old_path
            include = target is not None and path_filter(target)
        elif line.startswith("@@"):
            m = _HUNK_RE.match(line)
            if m is None:
                raise DiffParseError(f"malformed hunk header {line!r}", idx)
            if old_path is None and new_path is None:
                raise DiffParseError("hunk header before any file header", idx)
            old_left = int(m.group(2)) if m.group(2) is not None else 1
            new_left = int(m.group(4)) if m.group(4) is not None else 1
            hunk_start = idx
        elif line[:1] in ("+", "-") and hunk_start:
            raise DiffParseError(f"hunk starting at line {hunk_start} is longer than its header declares", idx)
        # everything else (index, mode, rename, binary markers) is metadata

    if old_left > 0 or new_left > 0:
        raise DiffParseError(f"diff ends inside the hunk starting at line {hunk_start}", len(lines))
    return DiffLines(added, removed)


# -- subprocess access ------------------------------------------------------


def _run(cmd: Sequence[str], cwd: str | Path) -> bytes:
    env = dict(os.environ)
    env["HGPLAIN"] = "1"
    env["LC_ALL"] = "C"
    try:
        proc = subprocess.run(list(cmd), cwd=str(cwd), capture_output=True, env=env, check=False)
    except FileNotFoundError as exc:
        raise VcsError(f"executable not found: {cmd[0]}", cmd) from exc
    if proc.returncode != 0:
        raise VcsError(f"exit status {proc.returncode}", cmd, proc.stderr.decode("utf-8", "replace"))
    return proc.stdout


class Repository:
    """A local hg or git repository, accessed read-only."""

    def __init__(self, path: str | Path, kind: str) -> None:
        if kind not in VCS_KINDS:
            raise ValueError(f"vcs kind must be one of {VCS_KINDS}, got {kind!r}")
        self.path = Path(path)
        self.kind = kind
        if not self.path.is_dir():
            raise VcsError(f"repository path does not exist: {self.path}")

    def verify(self, revision: str) -> str:
        """Return the full id of ``revision``; raise UnknownRevisionError if absent."""
        if self.kind == "git":
            cmd = ["git", "rev-parse", "--verify", "--quiet", f"{revision}^{{commit}}"]
        else:
            cmd = ["hg", "log", "-r", revision, "--template", "{node}"]
        try:
            out = _run(cmd, self.path)
        except VcsError as exc:
            if "executable not found" in str(exc):
                raise
            raise UnknownRevisionError(revision, exc.stderr) from None
        node = out.decode().strip()
        if not node:
            raise UnknownRevisionError(revision)
        return node

    def diff(self, rev1: str, rev2: str) -> str:
        if self.kind == "git":
            cmd = ["git", "diff", "--no-color", "--no-ext-diff", rev1, rev2]
        else:
            cmd = ["hg", "diff", "-r", f"{rev1}:{rev2}"]
        return _run(cmd, self.path).decode("utf-8", "replace")

    def archive_files(self, revision: str) -> Iterator[tuple[str, bytes]]:
        """Yield ``(path, content)`` for every file at ``revision``, sorted by path."""
        if self.kind == "git":
            data = _run(["git", "archive", "--format=tar", revision], self.path)
            with tarfile.open(fileobj=io.BytesIO(data)) as tar:
                members = sorted((m for m in tar.getmembers() if m.isfile()), key=lambda m: m.name)
                for m in members:
                    fh = tar.extractfile(m)
                    yield m.name, fh.read() if fh else b""
            return
        with tempfile.TemporaryDirectory(prefix="cse-archive-") as tmp:
            dest = Path(tmp) / "export"
            _run(["hg", "archive", "-r", revision, "-t", "files", str(dest)], self.path)
            paths = sorted(p for p in dest.rglob("*") if p.is_file())
            for p in paths:
                rel = p.relative_to(dest).as_posix()
                if rel == ".hg_archival.txt":
                    continue
                yield rel, p.read_bytes()


def extract_changesets(
    repo_path: str | Path,
    vcs_kind: str,
    revisions: Sequence[str],
    path_filter: PathFilter = is_cpp_path,
    jobs: int = 1,
) -> list[Changeset]:
    """One changeset per consecutive revision pair, attributed to the later one."""
    diffs = extract_diffs(repo_path, vcs_kind, revisions, jobs)
    return [changeset_from_diff(text, rev, parent, path_filter) for (rev, parent, text) in diffs]


def extract_diffs(
    repo_path: str | Path, vcs_kind: str, revisions: Sequence[str], jobs: int = 1
) -> list[tuple[str, str, str]]:
    """Raw diff text per consecutive pair, as ``(revision, parent, text)``."""
    repo = Repository(repo_path, vcs_kind)
    if len(revisions) < 2:
        return []
    for rev in revisions:
        repo.verify(rev)
    pairs = list(zip(revisions[:-1], revisions[1:]))

    def one(pair: tuple[str, str]) -> tuple[str, str, str]:
        parent, rev = pair
        return rev, parent, repo.diff(parent, rev)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def changeset_from_diff(text: str, revision: str, parent: str, path_filter: PathFilter = is_cpp_path) -> Changeset:
    lines = parse_unified_diff(text, path_filter)
    return Changeset(revision, parent, tuple(lines.added_lines), tuple(lines.removed_lines))


def checkout_corpus(
    repo_path: str | Path, vcs_kind: str, revision: str, path_filter: PathFilter = is_cpp_path
) -> TokenStream:
    """Lex every file at ``revision`` accepted by ``path_filter`` into one stream.

    Uses an archive export, so the working copy is never touched and
    concurrent calls on one repository are safe.
    """
    repo = Repository(repo_path, vcs_kind)
    repo.verify(revision)
    streams = [tokenize_source(data, path) for path, data in repo.archive_files(revision) if path_filter(path)]
    if not streams:
        raise EmptyCorpusError(f"revision {revision!r} has no files matching the path filter")
    return TokenStream.concat(streams, source_id=revision)


# -- offline diff directories -----------------------------------------------


def diff_filename(index: int, revision: str) -> str:
    return f"{index}_{revision}.diff"


def read_diff_dir(diff_dir: str | Path) -> list[tuple[int, str, str]]:
    """``(index, revision, text)`` for each ``<index>_<revision>.diff``, in index order."""
    found = []
    for p in Path(diff_dir).iterdir():
        m = _DIFF_FILE_RE.match(p.name)
        if m and p.is_file():
            found.append((int(m.group(1)), m.group(2), p.read_bytes().decode("utf-8", "replace")))
    found.sort(key=lambda t: t[0])
    return found


def changesets_from_diff_dir(
    diff_dir: str | Path, revisions: Sequence[str] | None = None, path_filter: PathFilter = is_cpp_path
) -> list[Changeset]:
    """Offline counterpart of :func:`extract_changesets`.

    With ``revisions`` given, the set of diff files must cover exactly the
    pairs of that list, and parents are taken from it; otherwise the parent
    of each file is the revision of the previous file (empty for the first).
    """
    entries = read_diff_dir(diff_dir)
    if revisions is not None:
        expected = list(revisions[1:])
        got = [rev for _, rev, _ in entries]
        if got != expected:
            missing = [r for r in expected if r not in got]
            extra = [r for r in got if r not in expected]
            raise VcsError(
                f"diff directory {diff_dir} does not match the revision list "
                f"(missing {missing[:5]}, unexpected {extra[:5]})"
            )
        parents = list(revisions[:-1])
    else:
        parents = [""] + [rev for _, rev, _ in entries[:-1]]
    return [changeset_from_diff(text, rev, parent, path_filter) for (_, rev, text), parent in zip(entries, parents)]


# -- picklable corpus loaders -------------------------------------------------


class RepoCorpusLoader:
    """Corpus for a revision via archive export of a live repository."""

    def __init__(self, repo_path: str | Path, vcs_kind: str, extensions: Sequence[str] | None = None) -> None:
        self.repo_path = str(repo_path)
        self.vcs_kind = vcs_kind
        self.extensions = tuple(extensions) if extensions else None

    def __call__(self, revision: str) -> TokenStream:
        return checkout_corpus(self.repo_path, self.vcs_kind, revision, cpp_filter(self.extensions))


class CorpusDirLoader:
    """Corpus for a revision from ``<dir>/<revision>.txt`` in corpus-text format."""

    def __init__(self, corpus_dir: str | Path) -> None:
        self.corpus_dir = str(corpus_dir)

    def path_for(self, revision: str) -> Path:
        return Path(self.corpus_dir) / f"{revision}.txt"

    def __call__(self, revision: str) -> TokenStream:
        path = self.path_for(revision)
        if not path.is_file():
            raise EmptyCorpusError(f"no corpus file for revision {revision!r} at {path}")
        stream = TokenStream.from_corpus_text(path.read_text(encoding="utf-8"), revision)
        if not stream.tokens:
            raise EmptyCorpusError(f"corpus file {path} is empty")
        return stream
