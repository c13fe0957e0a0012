import difflib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdeforge.tournament.patch import (
    ContextMismatchError,
    MalformedPatchError,
    OverlappingHunksError,
    apply_patch,
    extract_diff,
    make_diff,
    parse_hunks,
)

# a small vocabulary makes repeated lines (and hence ambiguous context) common
lines = st.lists(st.sampled_from(["x = 1", "y = 2", "return u", "", "    pass", "def f():", "# note", "z += x"]),
                 max_size=30)


def as_source(body, trailing_newline):
    text = "\n".join(body)
    return text + "\n" if (trailing_newline and body) else text


sources = st.builds(as_source, lines, st.booleans())


@settings(max_examples=300, deadline=None)
@given(sources, sources, st.integers(0, 5))
def test_difflib_roundtrip(old, new, context):
    diff = make_diff(old, new) if context == 3 else _diff_with_context(old, new, context)
    assert apply_patch(old, diff) == new


def _diff_with_context(old, new, n):
    out = []
    for line in difflib.unified_diff(old.splitlines(keepends=True), new.splitlines(keepends=True),
                                     "a/s.py", "b/s.py", n=n):
        out.append(line if line.endswith("\n") else line + "\n\\ No newline at end of file\n")
    return "".join(out)


BASE = "".join(f"line {i}\n" for i in range(1, 21))


def test_hunk_found_at_offset():
    target = BASE.replace("line 10\n", "line ten\n")
    diff = make_diff(BASE, target)
    shifted_base = "header a\nheader b\n" + BASE
    assert apply_patch(shifted_base, diff) == "header a\nheader b\n" + target
    with pytest.raises(ContextMismatchError):
        apply_patch(shifted_base, diff, max_offset=1)


def test_context_mismatch():
    diff = make_diff(BASE, BASE.replace("line 10\n", "line ten\n"))
    with pytest.raises(ContextMismatchError):
        apply_patch(BASE.replace("line 9\n", "line nine\n"), diff)


def test_overlapping_headers():
    diff = ("--- a/s\n+++ b/s\n"
            "@@ -2,3 +2,3 @@\n line 2\n-line 3\n+line three\n line 4\n"
            "@@ -3,2 +3,2 @@\n-line 3\n+line 3b\n line 4\n")
    with pytest.raises(OverlappingHunksError):
        apply_patch(BASE, diff)


def test_second_hunk_only_fits_over_the_first():
    # headers do not overlap, but the second hunk's context only exists before the first one ends
    diff = ("--- a/s\n+++ b/s\n"
            "@@ -2,3 +2,3 @@\n line 2\n-line 3\n+line three\n line 4\n"
            "@@ -10,2 +10,2 @@\n line 3\n-line 4\n+line four\n")
    with pytest.raises(OverlappingHunksError):
        apply_patch(BASE, diff)


@pytest.mark.parametrize("diff", [
    "@@ -1,2 +1,2 @@\n-line 1\n+line one\n",               # body shorter than the header promises
    "@@ -x +1 @@\n-line 1\n",                               # unparsable header
    "just some prose, no hunks",
    "--- a/s\n+++ b/s\n@@ -1 +1 @@\n-line 1\n+line one\ngarbage after\n",
])
def test_malformed(diff):
    with pytest.raises(MalformedPatchError):
        apply_patch(BASE, diff)


def test_no_newline_marker_both_ways():
    assert apply_patch("a\nb", make_diff("a\nb", "a\nb\n")) == "a\nb\n"
    assert apply_patch("a\nb\n", make_diff("a\nb\n", "a\nc")) == "a\nc"
    with pytest.raises(MalformedPatchError):
        parse_hunks("@@ -1 +1 @@\n\\ No newline at end of file\n")


def test_empty_diff_is_identity():
    assert apply_patch(BASE, make_diff(BASE, BASE)) == BASE


def test_extract_diff_from_reply():
    diff = make_diff(BASE, BASE.replace("line 1\n", "line one\n"))
    assert extract_diff(f"Change it.\n\n```diff\n{diff}```\nDone.") == diff
    assert extract_diff(f"```\n{diff}```") == diff
    assert extract_diff("prose then\n" + diff) == diff
    with pytest.raises(MalformedPatchError):
        extract_diff("no diff here")
