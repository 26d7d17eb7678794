from __future__ import annotations

import pytest

from changeset_entropy.lexer import cpp_filter
from changeset_entropy.vcs import (
    Changeset,
    CorpusDirLoader,
    DiffParseError,
    EmptyCorpusError,
    RepoCorpusLoader,
    UnknownRevisionError,
    VcsError,
    changesets_from_diff_dir,
    checkout_corpus,
    diff_filename,
    extract_changesets,
    extract_diffs,
    parse_unified_diff,
    read_diff_dir,
)
from conftest import needs_git
from repo_fixtures import HAVE_GIT, HAVE_HG, THREE_COMMITS_EXPECTED, make_repo

ONE_HUNK = """\
diff -r 000000000000 -r 111111111111 {path}
--- a/{path}\tThu Jan 01 00:00:00 1970 +0000
+++ b/{path}\tThu Jan 01 00:00:00 1970 +0000
@@ -1,1 +1,1 @@
-int b;
+int a;
"""

TWO_FILES = """\
diff --git a/src/x.cpp b/src/x.cpp
index 1111111..2222222 100644
--- a/src/x.cpp
+++ b/src/x.cpp
@@ -1,2 +1,5 @@
 keep();
+one();
+two();
+three();
 tail();
diff --git a/README.md b/README.md
index 3333333..4444444 100644
--- a/README.md
+++ b/README.md
@@ -1 +1,4 @@
 # title
+alpha
+beta
+gamma
"""


# -- parse_unified_diff --------------------------------------------------------


def test_one_hunk_cpp():
    d = parse_unified_diff(ONE_HUNK.format(path="x.cpp"))
    assert d.added_lines == ["int a;"] and d.removed_lines == ["int b;"]


def test_one_hunk_filtered_out():
    d = parse_unified_diff(ONE_HUNK.format(path="x.txt"))
    assert d.added_lines == [] and d.removed_lines == []


def test_two_file_diff_keeps_only_cpp():
    d = parse_unified_diff(TWO_FILES)
    assert d.added_lines == ["one();", "two();", "three();"]
    assert d.removed_lines == []


def test_content_resembling_headers_is_content():
    text = """\
--- a/x.cpp
+++ b/x.cpp
@@ -1,2 +1,2 @@
---x;
-- y;
+++z;
++ w;
"""
    d = parse_unified_diff(text)
    assert d.removed_lines == ["--x;", "- y;"]
    assert d.added_lines == ["++z;", "+ w;"]


def test_no_newline_marker_and_blank_context():
    text = "--- a/x.cpp\n+++ b/x.cpp\n@@ -1,3 +1,3 @@\n a;\n\n-b;\n\\ No newline at end of file\n+c;\n\\ No newline at end of file\n"
    d = parse_unified_diff(text)
    assert d.added_lines == ["c;"] and d.removed_lines == ["b;"]


def test_new_and_deleted_files():
    text = """\
diff --git a/n.cpp b/n.cpp
new file mode 100644
--- /dev/null
+++ b/n.cpp
@@ -0,0 +1,2 @@
+int n;
+int m;
diff --git a/gone.h b/gone.h
deleted file mode 100644
--- a/gone.h
+++ /dev/null
@@ -1 +0,0 @@
-int gone;
"""
    d = parse_unified_diff(text)
    assert d.added_lines == ["int n;", "int m;"] and d.removed_lines == ["int gone;"]


def test_rename_attributed_to_new_path():
    text = """\
diff --git a/old.txt b/new.cpp
similarity index 80%
rename from old.txt
rename to new.cpp
--- a/old.txt
+++ b/new.cpp
@@ -1 +1 @@
-x;
+y;
"""
    assert parse_unified_diff(text).added_lines == ["y;"]
    renamed_away = text.replace("new.cpp", "new.txt").replace("old.txt", "old.cpp")
    assert parse_unified_diff(renamed_away) == ([], [])


def test_binary_and_mode_only_entries_are_skipped():
    text = """\
diff --git a/img.png b/img.png
index 1..2 100644
Binary files a/img.png and b/img.png differ
diff --git a/run.cpp b/run.cpp
old mode 100644
new mode 100755
diff --git a/k.cpp b/k.cpp
--- a/k.cpp
+++ b/k.cpp
@@ -1 +1 @@
-a;
+b;
"""
    assert parse_unified_diff(text) == (["b;"], ["a;"])


def test_quoted_paths():
    text = '--- "a/we ird.cpp"\n+++ "b/we ird.cpp"\n@@ -0,0 +1 @@\n+x;\n'
    assert parse_unified_diff(text).added_lines == ["x;"]


def test_custom_filter():
    assert parse_unified_diff(ONE_HUNK.format(path="k.cu"), cpp_filter([".cu"])).added_lines == ["int a;"]


@pytest.mark.parametrize(
    "text, line",
    [
        ("--- a/x.cpp\n+++ b/x.cpp\n@@ -1,1 +1,1\n-a\n+b\n", 3),
        ("--- a/x.cpp\n+++ b/x.cpp\n@@ bogus @@\n", 3),
        ("@@ -1 +1 @@\n-a\n+b\n", 1),
        ("--- a/x.cpp\n+++ b/x.cpp\n@@ -1,1 +1,1 @@\n-a\n+b\n+c\n", 6),
        ("--- a/x.cpp\n+++ b/x.cpp\n@@ -1,2 +1,2 @@\n-a\n+b\n", 5),
        ("--- a/x.cpp\n+++ b/x.cpp\n@@ -1,2 +1,2 @@\n-a\n?? junk\n", 5),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(DiffParseError) as info:
        parse_unified_diff(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_added_only_diff_has_no_removed():
    text = "--- a/x.cpp\n+++ b/x.cpp\n@@ -1,1 +1,3 @@\n a;\n+b;\n+c;\n"
    assert parse_unified_diff(text).removed_lines == []
    swapped = "--- a/x.cpp\n+++ b/x.cpp\n@@ -1,3 +1,1 @@\n a;\n-b;\n-c;\n"
    assert parse_unified_diff(swapped).added_lines == []


# -- offline directories -----------------------------------------------------------


def test_diff_dir_index_order_and_parents(tmp_path):
    for i, rev in [(10, "ccc"), (2, "bbb"), (1, "aaa")]:
        (tmp_path / diff_filename(i, rev)).write_text(ONE_HUNK.format(path="x.cpp"))
    (tmp_path / "notes.txt").write_text("ignored")
    assert [r for _, r, _ in read_diff_dir(tmp_path)] == ["aaa", "bbb", "ccc"]
    cs = changesets_from_diff_dir(tmp_path, ["root", "aaa", "bbb", "ccc"])
    assert [(c.revision, c.parent) for c in cs] == [("aaa", "root"), ("bbb", "aaa"), ("ccc", "bbb")]
    assert [c.parent for c in changesets_from_diff_dir(tmp_path)] == ["", "aaa", "bbb"]


def test_diff_dir_mismatch(tmp_path):
    (tmp_path / diff_filename(1, "aaa")).write_text(ONE_HUNK.format(path="x.cpp"))
    with pytest.raises(VcsError):
        changesets_from_diff_dir(tmp_path, ["root", "zzz"])


def test_corpus_dir_loader(tmp_path):
    (tmp_path / "r1.txt").write_text("int a ;\n")
    (tmp_path / "r2.txt").write_text("")
    assert CorpusDirLoader(tmp_path)("r1").texts == ["<s>", "int", "a", ";", "</s>"]
    with pytest.raises(EmptyCorpusError):
        CorpusDirLoader(tmp_path)("r2")
    with pytest.raises(EmptyCorpusError):
        CorpusDirLoader(tmp_path)("missing")


# -- live repositories ---------------------------------------------------------------


KINDS = [
    pytest.param("git", marks=pytest.mark.skipif(not HAVE_GIT, reason="git not available")),
    pytest.param("hg", marks=pytest.mark.skipif(not HAVE_HG, reason="hg not available")),
]


@pytest.fixture(params=KINDS)
def three_commit_repo(request):
    return request.getfixturevalue(f"three_commit_{request.param}"), request.param


def test_planted_edits(three_commit_repo):
    (repo, revs, _), kind = three_commit_repo
    cs = extract_changesets(repo, kind, revs)
    assert len(cs) == 2
    assert [(c.revision, c.parent) for c in cs] == [(revs[1], revs[0]), (revs[2], revs[1])]
    for c, exp in zip(cs, THREE_COMMITS_EXPECTED):
        assert list(c.added_lines) == exp["added"]
        assert list(c.removed_lines) == exp["removed"]


def test_extraction_is_deterministic_and_parallel_safe(three_commit_repo):
    (repo, revs, _), kind = three_commit_repo
    assert extract_changesets(repo, kind, revs) == extract_changesets(repo, kind, revs, jobs=4)


def test_swapping_revisions_swaps_streams(three_commit_repo):
    (repo, revs, _), kind = three_commit_repo
    fwd = extract_changesets(repo, kind, revs)
    back = extract_changesets(repo, kind, list(reversed(revs)))
    for f, b in zip(fwd, reversed(back)):
        assert sorted(f.added_lines) == sorted(b.removed_lines)
        assert sorted(f.removed_lines) == sorted(b.added_lines)


def test_pairing_rule_edge_cases(three_commit_repo):
    (repo, revs, _), kind = three_commit_repo
    assert extract_changesets(repo, kind, revs[:1]) == []
    assert extract_changesets(repo, kind, []) == []
    assert len(extract_changesets(repo, kind, revs[:2])) == 1


def test_unknown_revision_is_named(three_commit_repo):
    (repo, revs, _), kind = three_commit_repo
    with pytest.raises(UnknownRevisionError) as info:
        extract_changesets(repo, kind, [revs[0], "deadbeefdeadbeef"])
    assert "deadbeefdeadbeef" in str(info.value)


def test_offline_matches_live(three_commit_repo, tmp_path):
    (repo, revs, _), kind = three_commit_repo
    for i, (rev, _, text) in enumerate(extract_diffs(repo, kind, revs), start=1):
        (tmp_path / diff_filename(i, rev)).write_text(text, encoding="utf-8")
    assert changesets_from_diff_dir(tmp_path, revs) == extract_changesets(repo, kind, revs)


def test_checkout_corpus(three_commit_repo):
    (repo, revs, _), kind = three_commit_repo
    stream = checkout_corpus(repo, kind, revs[1])
    # a.cpp and b.h are lexed, notes.md is not
    assert "Point" in stream.texts and "second" not in stream.texts
    assert stream.source_id == revs[1]
    assert RepoCorpusLoader(repo, kind)(revs[1]).texts == stream.texts


@pytest.mark.parametrize("kind", KINDS)
def test_checkout_single_file_and_additivity(tmp_path, kind):
    revs = make_repo(
        tmp_path / "r",
        kind,
        [{"one.cpp": "int a;\n", "doc.txt": "x\n"}, {"two.h": "int b = 2;\nb++;\n"}, {"doc.txt": "only docs\n", "one.cpp": None, "two.h": None}],
    )
    one = checkout_corpus(tmp_path / "r", kind, revs[0])
    assert one.texts == ["<s>", "int", "a", ";", "</s>"]
    both = checkout_corpus(tmp_path / "r", kind, revs[1])
    two = checkout_corpus(tmp_path / "r", kind, revs[1], lambda p: p == "two.h")
    assert len(both) == len(one) + len(two)
    with pytest.raises(EmptyCorpusError):
        checkout_corpus(tmp_path / "r", kind, revs[2])


@needs_git
def test_missing_repository(tmp_path):
    with pytest.raises(VcsError):
        extract_changesets(tmp_path / "nope", "git", ["a", "b"])
    with pytest.raises(ValueError):
        extract_changesets(tmp_path, "svn", ["a", "b"])


def test_changeset_is_value_object():
    a = Changeset("r", "p", ("x",), ())
    assert a == Changeset("r", "p", ("x",), ())
    with pytest.raises(AttributeError):
        a.revision = "q"
