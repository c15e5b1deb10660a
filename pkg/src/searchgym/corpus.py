"""Wiki dump to retrieval corpus: filter, clean, contextualize, chunk, dedup.

The pipeline turns raw dump pages into a line-delimited corpus file of
retrievable chunks. Each section of a kept page gets its page title and
section heading injected at the front, markup is stripped, the result is
split into sentence-aligned chunks of bounded length, and near-duplicate
chunks (case/whitespace insensitive) are dropped corpus-wide.
"""

from __future__ import annotations

import bz2
import hashlib
import json
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

MIN_CHUNK_CHARS = 220
MAX_CHUNK_CHARS = 700

# em dash with surrounding spaces, between page title and section heading
CONTEXT_SEPARATOR = " — "

DISCARD_NAMESPACE = "namespace"
DISCARD_REDIRECT = "redirect"
DISCARD_DISAMBIGUATION = "disambiguation"


class CorpusError(Exception):
    """Raised for unreadable dumps or corpus files."""


@dataclass
class RawPage:
    """One page from a dump, split into ordered (heading, body) sections."""

    page_id: int
    title: str
    namespace: int
    is_redirect: bool
    is_disambiguation: bool
    sections: list[tuple[str, str]]


@dataclass
class Chunk:
    """One retrievable unit of the corpus."""

    chunk_id: int
    source_page_id: int
    title: str
    section: str
    text: str
    norm_hash: str


@dataclass
class CorpusStats:
    pages_kept: int = 0
    pages_discarded: dict[str, int] = field(
        default_factory=lambda: {
            DISCARD_NAMESPACE: 0,
            DISCARD_REDIRECT: 0,
            DISCARD_DISAMBIGUATION: 0,
        }
    )
    chunks: int = 0
    duplicates_dropped: int = 0

    def to_json(self) -> dict:
        return {
            "pages_kept": self.pages_kept,
            "pages_discarded": dict(self.pages_discarded),
            "chunks": self.chunks,
            "duplicates_dropped": self.duplicates_dropped,
        }


def filter_page(page: RawPage) -> tuple[bool, str | None]:
    """Keep main-namespace content pages; everything else gets a reason code."""
    if page.namespace != 0:
        return False, DISCARD_NAMESPACE
    if page.is_redirect:
        return False, DISCARD_REDIRECT
    if page.is_disambiguation:
        return False, DISCARD_DISAMBIGUATION
    return True, None


_COMMENT_RE = re.compile(r"<!--.*?-->", re.DOTALL)
_REF_RE = re.compile(
    r"<ref(?:\s[^<>]*)?/\s*>|<ref(?:\s[^<>]*)?>.*?</ref\s*>", re.IGNORECASE | re.DOTALL
)
_TEMPLATE_INNER_RE = re.compile(r"\{\{[^{}]*\}\}", re.DOTALL)
_LINK_PIPED_RE = re.compile(r"\[\[([^\[\]|]*)\|([^\[\]]*)\]\]")
_LINK_PLAIN_RE = re.compile(r"\[\[([^\[\]]*)\]\]")
_HTML_TAG_RE = re.compile(r"</?[A-Za-z][^<>]*>")

# Bounded passes for nested constructs; leftovers are swept as literal tokens
# so cleaning never loops and never leaves markup tokens behind.
_NESTING_PASSES = 3
_LEFTOVER_TOKENS = ("{{", "}}", "[[", "]]", "<ref")


def clean_markup(raw: str) -> str:
    """Strip wiki markup: links keep display text, templates/refs are removed."""
    text = _COMMENT_RE.sub("", raw)
    text = _REF_RE.sub("", text)
    for _ in range(_NESTING_PASSES):
        stripped = _TEMPLATE_INNER_RE.sub("", text)
        if stripped == text:
            break
        text = stripped
    for _ in range(_NESTING_PASSES):
        replaced = _LINK_PIPED_RE.sub(r"\2", text)
        replaced = _LINK_PLAIN_RE.sub(r"\1", replaced)
        if replaced == text:
            break
        text = replaced
    text = _HTML_TAG_RE.sub("", text)
    for token in _LEFTOVER_TOKENS:
        text = text.replace(token, "")
    return text


def inject_context(title: str, section: str, raw: str) -> str:
    """Prefix raw section text with its page title and heading, then clean."""
    if not title:
        raise ValueError("title must be non-empty")
    header = title + CONTEXT_SEPARATOR + section if section else title
    return clean_markup(header + "\n" + raw)


_SENTENCE_END_RE = re.compile(r"[.?!](?=\s|\Z)")


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    """Spans of sentences; the end delimiter stays with its sentence."""
    spans: list[tuple[int, int]] = []
    start = 0

    def push(seg_start: int, seg_end: int) -> None:
        seg = text[seg_start:seg_end]
        if not seg.strip():
            return
        lead = len(seg) - len(seg.lstrip())
        trail = len(seg) - len(seg.rstrip())
        spans.append((seg_start + lead, seg_end - trail))

    for m in _SENTENCE_END_RE.finditer(text):
        push(start, m.end())
        start = m.end()
    push(start, len(text))
    return spans


def chunk_text(
    text: str, min_len: int = MIN_CHUNK_CHARS, max_len: int = MAX_CHUNK_CHARS
) -> list[str]:
    """Greedily pack consecutive sentences into chunks of min_len..max_len chars.

    A sentence is only split when it alone exceeds max_len (hard wrap at
    max_len boundaries). Accumulations that end up shorter than min_len are
    dropped.
    """
    chunks: list[str] = []
    cur: tuple[int, int] | None = None

    def flush() -> None:
        nonlocal cur
        if cur is not None and cur[1] - cur[0] >= min_len:
            chunks.append(text[cur[0] : cur[1]])
        cur = None

    for start, end in _sentence_spans(text):
        if end - start > max_len:
            flush()
            for i in range(start, end, max_len):
                piece = text[i : min(i + max_len, end)]
                if len(piece) >= min_len:
                    chunks.append(piece)
            continue
        if cur is None:
            cur = (start, end)
        elif end - cur[0] <= max_len:
            cur = (cur[0], end)
        else:
            flush()
            cur = (start, end)
    flush()
    return chunks


_WS_RUN_RE = re.compile(r"\s+")


def normalize_for_dedup(text: str) -> str:
    return _WS_RUN_RE.sub(" ", text.lower()).strip()


def norm_hash(text: str) -> str:
    """128-bit MD5 hex digest of the normalized text."""
    return hashlib.md5(normalize_for_dedup(text).encode("utf-8")).hexdigest()


def dedup(texts: Iterable[str]) -> list[str]:
    """Drop later chunks whose normalized text was already seen."""
    seen: set[str] = set()
    out: list[str] = []
    for text in texts:
        digest = norm_hash(text)
        if digest not in seen:
            seen.add(digest)
            out.append(text)
    return out


def page_chunks(
    page: RawPage, min_len: int = MIN_CHUNK_CHARS, max_len: int = MAX_CHUNK_CHARS
) -> Iterator[tuple[str, str]]:
    """Yield (section, chunk text) pairs for one page in document order."""
    for section_title, body in page.sections:
        effective = inject_context(page.title, section_title, body)
        for chunk in chunk_text(effective, min_len, max_len):
            yield section_title, chunk


def build_corpus(
    pages: Iterable[RawPage],
    output_path: str | Path,
    min_len: int = MIN_CHUNK_CHARS,
    max_len: int = MAX_CHUNK_CHARS,
) -> CorpusStats:
    """Run the full pipeline and write the corpus file.

    Chunk ids are assigned densely in (page_id, section index, chunk index)
    order so the output is reproducible regardless of dump ordering. On I/O
    failure the partial output is removed.
    """
    output_path = Path(output_path)
    stats = CorpusStats()
    ordered = sorted(pages, key=lambda p: p.page_id)
    seen_hashes: set[str] = set()
    chunk_id = 0
    tmp_path = output_path.with_name(output_path.name + ".tmp")
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as out:
            for page in ordered:
                keep, reason = filter_page(page)
                if not keep:
                    stats.pages_discarded[reason] += 1
                    continue
                stats.pages_kept += 1
                for section_title, text in page_chunks(page, min_len, max_len):
                    digest = norm_hash(text)
                    if digest in seen_hashes:
                        stats.duplicates_dropped += 1
                        continue
                    seen_hashes.add(digest)
                    record = {
                        "chunk_id": chunk_id,
                        "source_page_id": page.page_id,
                        "title": page.title,
                        "section": section_title,
                        "text": text,
                    }
                    out.write(
                        json.dumps(record, ensure_ascii=False, separators=(",", ":"))
                    )
                    out.write("\n")
                    chunk_id += 1
        os.replace(tmp_path, output_path)
    except OSError:
        if tmp_path.exists():
            tmp_path.unlink()
        raise
    stats.chunks = chunk_id
    return stats


def read_corpus(path: str | Path) -> list[Chunk]:
    """Load a corpus file; raises CorpusError with the offending line number."""
    chunks: list[Chunk] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                chunk = Chunk(
                    chunk_id=int(record["chunk_id"]),
                    source_page_id=int(record["source_page_id"]),
                    title=str(record["title"]),
                    section=str(record["section"]),
                    text=str(record["text"]),
                    norm_hash=norm_hash(str(record["text"])),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"corpus parse error at line {lineno}: {exc}") from exc
            chunks.append(chunk)
    return chunks


_HEADING_RE = re.compile(r"^(={2,6})\s*(.*?)\s*\1\s*$", re.MULTILINE)
_REDIRECT_BODY_RE = re.compile(r"^\s*#redirect", re.IGNORECASE)
_DISAMBIG_RE = re.compile(
    r"\{\{\s*(disambiguation|disambig|dab|hndis|geodis)\s*[|}]", re.IGNORECASE
)


def split_sections(wikitext: str) -> list[tuple[str, str]]:
    """Split wikitext on == headings ==; lead text becomes an untitled section."""
    sections: list[tuple[str, str]] = []
    matches = list(_HEADING_RE.finditer(wikitext))
    lead_end = matches[0].start() if matches else len(wikitext)
    lead = wikitext[:lead_end]
    if lead.strip():
        sections.append(("", lead))
    for i, m in enumerate(matches):
        body_start = m.end()
        body_end = matches[i + 1].start() if i + 1 < len(matches) else len(wikitext)
        sections.append((m.group(2), wikitext[body_start:body_end]))
    return sections


def parse_dump(path: str | Path) -> Iterator[RawPage]:
    """Read a dump file; format chosen by extension (.jsonl/.ndjson or .xml[.bz2])."""
    path = Path(path)
    name = path.name.lower()
    if name.endswith((".jsonl", ".ndjson")):
        return _parse_jsonl_dump(path)
    if name.endswith((".xml", ".xml.bz2")):
        return _parse_xml_dump(path)
    raise CorpusError(f"unsupported dump format: {path.name}")


def _parse_jsonl_dump(path: Path) -> Iterator[RawPage]:
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                yield _page_from_record(record)
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"dump parse error at line {lineno}: {exc}") from exc


def _page_from_record(record: dict) -> RawPage:
    if "sections" in record:
        sections = [(str(t), str(b)) for t, b in record["sections"]]
    else:
        sections = split_sections(str(record.get("text", "")))
    text_blob = "\n".join(body for _, body in sections)
    return RawPage(
        page_id=int(record["page_id"]),
        title=str(record["title"]),
        namespace=int(record.get("namespace", 0)),
        is_redirect=bool(record.get("is_redirect", False)),
        is_disambiguation=bool(
            record.get("is_disambiguation", _DISAMBIG_RE.search(text_blob) is not None)
        ),
        sections=sections,
    )


def _local_tag(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_xml_dump(path: Path) -> Iterator[RawPage]:
    opener = bz2.open if path.name.lower().endswith(".bz2") else open
    with opener(path, "rb") as handle:
        for _, elem in ET.iterparse(handle, events=("end",)):
            if _local_tag(elem.tag) != "page":
                continue
            yield _page_from_xml(elem)
            elem.clear()


def _page_from_xml(elem: ET.Element) -> RawPage:
    title = ""
    namespace = 0
    page_id: int | None = None
    is_redirect = False
    text = ""
    for child in elem:
        tag = _local_tag(child.tag)
        if tag == "title":
            title = child.text or ""
        elif tag == "ns":
            namespace = int(child.text or 0)
        elif tag == "id" and page_id is None:
            page_id = int(child.text or 0)
        elif tag == "redirect":
            is_redirect = True
        elif tag == "revision":
            for sub in child:
                if _local_tag(sub.tag) == "text":
                    text = sub.text or ""
    if page_id is None:
        raise CorpusError(f"page {title!r} has no id")
    if _REDIRECT_BODY_RE.match(text):
        is_redirect = True
    return RawPage(
        page_id=page_id,
        title=title,
        namespace=namespace,
        is_redirect=is_redirect,
        is_disambiguation=_DISAMBIG_RE.search(text) is not None,
        sections=split_sections(text),
    )
