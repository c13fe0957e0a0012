"""Unified-diff application with exact context matching."""

from __future__ import annotations

import re
from dataclasses import dataclass

HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
NO_NEWLINE = "\\ No newline at end of file"


class PatchError(ValueError):
    pass


class MalformedPatchError(PatchError):
    pass


class ContextMismatchError(PatchError):
    pass


class OverlappingHunksError(PatchError):
    pass


@dataclass
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    old_lines: list[str]
    new_lines: list[str]
    header_line: int

    @property
    def old_index(self) -> int:
        # a zero-length range names the line *after which* text is inserted
        return self.old_start if self.old_len == 0 else self.old_start - 1


def _strip_eol(line: str) -> str:
    return line[:-1] if line.endswith("\n") else line


def parse_hunks(diff: str) -> list[Hunk]:
    lines = diff.splitlines(keepends=True)
    hunks: list[Hunk] = []
    i = 0
    saw_header = False
    while i < len(lines):
        raw = _strip_eol(lines[i])
        if raw.startswith("@@"):
            m = HUNK_HEADER.match(raw)
            if not m:
                raise MalformedPatchError(f"line {i + 1}: bad hunk header {raw!r}")
            os_, ol, ns, nl = m.groups()
            hunk = Hunk(int(os_), 1 if ol is None else int(ol), int(ns), 1 if nl is None else int(nl), [], [], i + 1)
            i += 1
            old_seen = new_seen = 0
            last: list[str] | None = None
            while i < len(lines) and (old_seen < hunk.old_len or new_seen < hunk.new_len
                                      or _strip_eol(lines[i]).startswith("\\")):
                line = lines[i]
                tag = line[:1]
                if line.startswith("\\"):
                    # the previous line(s) have no trailing newline
                    if last is None:
                        raise MalformedPatchError(f"line {i + 1}: marker without a preceding line")
                    for target in last:
                        target[-1] = _strip_eol(target[-1])
                    last = None
                    i += 1
                    continue
                if line in ("\n", "\r\n"):
                    tag, body = " ", line
                else:
                    body = line[1:]
                if tag == " ":
                    hunk.old_lines.append(body)
                    hunk.new_lines.append(body)
                    old_seen += 1
                    new_seen += 1
                    last = [hunk.old_lines, hunk.new_lines]
                elif tag == "-":
                    hunk.old_lines.append(body)
                    old_seen += 1
                    last = [hunk.old_lines]
                elif tag == "+":
                    hunk.new_lines.append(body)
                    new_seen += 1
                    last = [hunk.new_lines]
                else:
                    break
                i += 1
            if old_seen != hunk.old_len or new_seen != hunk.new_len:
                raise MalformedPatchError(
                    f"hunk at line {hunk.header_line}: header promises -{hunk.old_len} +{hunk.new_len}, "
                    f"body has -{old_seen} +{new_seen}"
                )
            hunks.append(hunk)
            continue
        if raw.startswith("--- ") or raw.startswith("+++ "):
            saw_header = True
        elif raw.startswith(("diff ", "index ", "new file", "deleted file", "similarity", "rename ")) or not raw.strip():
            pass
        elif hunks or saw_header:
            raise MalformedPatchError(f"line {i + 1}: unexpected text {raw!r}")
        i += 1
    if not hunks and diff.strip() and not saw_header:
        raise MalformedPatchError("no hunks found")
    return hunks


def _matches(src: list[str], at: int, want: list[str]) -> bool:
    return at >= 0 and src[at:at + len(want)] == want


def apply_patch(source: str, diff: str, max_offset: int | None = None) -> str:
    """Apply `diff` to `source`. Context must match exactly; a hunk may
    land away from its stated line (nearest exact match wins) unless
    `max_offset` limits the search. Hunks may not overlap."""
    hunks = parse_hunks(diff)
    if not hunks:
        return source
    src = source.splitlines(keepends=True)
    placed: list[tuple[int, Hunk]] = []
    floor = 0
    for prev, h in zip(hunks, hunks[1:]):
        if h.old_index < prev.old_index + prev.old_len:
            raise OverlappingHunksError(
                f"hunk at line {h.header_line} starts inside the hunk at line {prev.header_line}"
            )
    for h in hunks:
        want = h.old_lines
        guess = h.old_index
        limit = len(src) if max_offset is None else max_offset
        at = None
        for off in range(0, limit + 1):
            for cand in ((guess, ) if off == 0 else (guess - off, guess + off)):
                if cand >= floor and cand + len(want) <= len(src) and _matches(src, cand, want):
                    at = cand
                    break
            if at is not None:
                break
        if at is None:
            # distinguish a hunk that only fits over an earlier hunk from one that fits nowhere
            if any(_matches(src, c, want) for c in range(0, min(floor, len(src)))):
                raise OverlappingHunksError(f"hunk at line {h.header_line} overlaps an earlier hunk")
            raise ContextMismatchError(
                f"hunk at line {h.header_line} (-{h.old_start},{h.old_len}) does not match the source"
            )
        if placed:
            prev_at, prev = placed[-1]
            if at < prev_at + len(prev.old_lines) or (at == prev_at and not prev.old_lines):
                raise OverlappingHunksError(f"hunk at line {h.header_line} overlaps an earlier hunk")
        placed.append((at, h))
        floor = at + len(want)
    out: list[str] = []
    pos = 0
    for at, h in placed:
        out.extend(src[pos:at])
        out.extend(h.new_lines)
        pos = at + len(h.old_lines)
    out.extend(src[pos:])
    return "".join(out)


def extract_diff(text: str) -> str:
    """The diff body from a model reply: a ```diff block, or the raw text."""
    m = re.search(r"```(?:diff|patch)[ \t]*\n(.*?)```", text, re.DOTALL)
    if m:
        return m.group(1)
    m = re.search(r"```[ \t]*\n(.*?)```", text, re.DOTALL)
    if m and "@@" in m.group(1):
        return m.group(1)
    if "@@" in text:
        return text[text.index("---") if "---" in text else text.index("@@"):]
    raise MalformedPatchError("no diff found in the reply")


def make_diff(old: str, new: str, name: str = "solver.py") -> str:
    """Unified diff between two sources with no-newline markers, via difflib."""
    import difflib

    out = []
    for line in difflib.unified_diff(old.splitlines(keepends=True), new.splitlines(keepends=True),
                                     f"a/{name}", f"b/{name}"):
        if line.endswith("\n"):
            out.append(line)
        else:
            out.append(line + "\n" + NO_NEWLINE + "\n")
    return "".join(out)
