"""Turn raw GitHub issue reports into the five facet documents.

A report is split into:

* ``content``  - title and/or description prose
* ``comment``  - prose of every comment
* ``code``     - statements of fenced (triple-backtick) code blocks
* ``command``  - inline code spans mixed into the prose
* ``label``    - the report's labels, as a single sentence

Prose goes through lowercasing, HTML/punctuation stripping, sentence
splitting and stop-word removal. Code goes through :func:`tokenize_code`
and is never lowercased or filtered.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

FACETS = ("content", "comment", "code", "command", "label")
SCHEMES = ("title", "desc", "title+desc")
STR_LIT = "<STR_LIT>"

Sentence = list[str]


@dataclass(frozen=True)
class RawReport:
    id: str
    title: str = ""
    description: str = ""
    comments: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()
    target: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("report id must be non-empty")
        if self.target not in (None, 0, 1):
            raise ValueError(f"report {self.id}: target must be 0 or 1, got {self.target!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "RawReport":
        if not isinstance(obj, dict):
            raise ValueError("report must be a JSON object")
        if "id" not in obj:
            raise ValueError("report is missing 'id'")
        target = obj.get("target")
        return cls(
            id=str(obj["id"]),
            title=obj.get("title") or "",
            description=obj.get("description") or "",
            comments=tuple(obj.get("comments") or ()),
            labels=tuple(obj.get("labels") or ()),
            target=None if target is None else int(target),
        )

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "comments": list(self.comments),
            "labels": list(self.labels),
        }
        if self.target is not None:
            out["target"] = self.target
        return out


@dataclass(frozen=True)
class FacetDocument:
    facet: str
    sentences: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if self.facet not in FACETS:
            raise ValueError(f"unknown facet {self.facet!r}")
        if self.facet == "label" and len(self.sentences) > 1:
            raise ValueError("label facet holds at most one sentence")
        for sent in self.sentences:
            if any(tok == "" for tok in sent):
                raise ValueError("empty token in facet document")

    @classmethod
    def of(cls, facet: str, sentences: Iterable[Iterable[str]]) -> "FacetDocument":
        return cls(facet, tuple(tuple(s) for s in sentences))

    def as_lists(self) -> list[list[str]]:
        return [list(s) for s in self.sentences]

    def __len__(self):
        return len(self.sentences)


@dataclass(frozen=True)
class FacetSet:
    documents: dict[str, FacetDocument] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.documents) != FACETS:
            raise ValueError(f"FacetSet needs exactly the facets {FACETS}")

    def __getitem__(self, facet: str) -> FacetDocument:
        return self.documents[facet]

    def to_dict(self) -> dict[str, list[list[str]]]:
        return {name: doc.as_lists() for name, doc in self.documents.items()}


# --- stop words -------------------------------------------------------------

def load_stopwords() -> frozenset[str]:
    text = resources.files("mhnurf").joinpath("data/stopwords.txt").read_text("utf-8")
    words = (line.strip() for line in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


STOPWORDS = load_stopwords()

# --- markdown ---------------------------------------------------------------

_FENCE_OPEN = re.compile(r"^ {0,3}(`{3,})[^`]*$")
_INLINE_CODE = re.compile(r"(?<!`)(`+)(?!`)((?:(?!\n\s*\n).)+?)(?<!`)\1(?!`)", re.DOTALL)
_HTML_TAG = re.compile(r"<[^<>\n]+>")
_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)|\n\s*\n")
_WORD = re.compile(r"[^\W_]+(?:'[^\W_]+)*")


def split_fenced(markdown: str) -> tuple[str, list[str]]:
    """Separate fenced code blocks from the rest of a markdown string.

    Returns the text with every fenced block replaced by a blank line, and
    the list of block bodies. An unclosed fence runs to the end of input.
    """
    prose: list[str] = []
    blocks: list[str] = []
    body: list[str] | None = None
    fence = ""
    for line in markdown.splitlines():
        if body is None:
            m = _FENCE_OPEN.match(line)
            if m:
                fence = m.group(1)
                body = []
                prose.append("")
            else:
                prose.append(line)
        elif line.strip().startswith(fence) and set(line.strip()) == {"`"}:
            blocks.append("\n".join(body))
            body = None
        else:
            body.append(line)
    if body is not None:
        blocks.append("\n".join(body))
    return "\n".join(prose), blocks


def split_inline(text: str) -> tuple[str, list[str]]:
    """Pull inline code spans out of prose; each span is replaced by a space."""
    spans = [m.group(2).strip() for m in _INLINE_CODE.finditer(text)]
    return _INLINE_CODE.sub(" ", text), [s for s in spans if s]


# --- natural text -----------------------------------------------------------

def preprocess_text(text: str, stopwords: frozenset[str] = STOPWORDS) -> list[Sentence]:
    """Lowercase, strip HTML and punctuation, split into sentences, drop stop words.

    Sentences end at ``.``, ``!`` or ``?`` followed by whitespace (or end of
    text) and at blank lines, so ``1.5`` or ``model.fit`` stay inside one
    sentence. Tokens are runs of letters/digits; an internal apostrophe is
    kept so contractions like ``don't`` match the stop list.

    >>> preprocess_text("<b>slow</b> model. very slow!")
    [['slow', 'model'], ['slow']]
    """
    text = _HTML_TAG.sub(" ", text.lower())
    out = []
    for chunk in _SENTENCE_END.split(text):
        tokens = [t for t in _WORD.findall(chunk) if t not in stopwords]
        if tokens:
            out.append(tokens)
    return out


# --- code -------------------------------------------------------------------

def _is_word(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokenize_code(code: str) -> list[Sentence]:
    """Split source text into statements of tokens.

    Statements end at newlines and at ``;`` outside string literals. A
    statement's tokens are maximal runs of identifier/number characters,
    or single punctuation characters. Each quoted literal (single or
    double quotes, backslash escapes honoured) becomes one ``<STR_LIT>``;
    an unterminated literal swallows the rest of the line.

    >>> tokenize_code('model.compile(loss="crossentropy")')
    [['model', '.', 'compile', '(', 'loss', '=', '<STR_LIT>', ')']]
    """
    statements: list[Sentence] = []
    current: Sentence = []
    i, n = 0, len(code)
    while i < n:
        ch = code[i]
        if ch == "\n" or ch == ";":
            if current:
                statements.append(current)
            current = []
            i += 1
        elif ch.isspace():
            i += 1
        elif ch in "'\"":
            j = i + 1
            while j < n and code[j] != ch and code[j] != "\n":
                j += 2 if code[j] == "\\" and j + 1 < n and code[j + 1] != "\n" else 1
            current.append(STR_LIT)
            i = j + 1 if j < n and code[j] == ch else j
        elif _is_word(ch):
            j = i + 1
            while j < n and _is_word(code[j]):
                j += 1
            current.append(code[i:j])
            i = j
        else:
            current.append(ch)
            i += 1
    if current:
        statements.append(current)
    return statements


# --- facet extraction -------------------------------------------------------

def _split_markdown(markdown: str) -> tuple[str, list[str], list[str]]:
    text, blocks = split_fenced(markdown)
    text, spans = split_inline(text)
    return text, blocks, spans


def extract_facets(report: RawReport, scheme: str = "title+desc") -> FacetSet:
    """Build all five facet documents for one report.

    ``scheme`` picks what feeds the content facet: the title, the
    description, or both (title sentences first). Code blocks and inline
    spans are collected from the description and from every comment.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown content scheme {scheme!r}; expected one of {SCHEMES}")

    desc_text, code_blocks, spans = _split_markdown(report.description)
    content: list[Sentence] = []
    if scheme in ("title", "title+desc"):
        content += preprocess_text(report.title)
    if scheme in ("desc", "title+desc"):
        content += preprocess_text(desc_text)

    comment: list[Sentence] = []
    for raw in report.comments:
        text, blocks, inline = _split_markdown(raw)
        comment += preprocess_text(text)
        code_blocks += blocks
        spans += inline

    code = [stmt for block in code_blocks for stmt in tokenize_code(block)]
    command = [stmt for span in spans for stmt in tokenize_code(span)]
    labels = [lab.strip().lower() for lab in report.labels if lab.strip()]

    docs = {
        "content": content,
        "comment": comment,
        "code": code,
        "command": command,
        "label": [labels] if labels else [],
    }
    return FacetSet({name: FacetDocument.of(name, docs[name]) for name in FACETS})


# --- report files -----------------------------------------------------------

def iter_reports(path: str | Path) -> Iterator[RawReport]:
    """Read reports from a JSON-lines file, or a directory of ``*.json`` files.

    Raises ``ValueError`` naming the offending line (or file) on bad input.
    """
    path = Path(path)
    if path.is_dir():
        for item in sorted(path.glob("*.json")):
            try:
                yield RawReport.from_dict(json.loads(item.read_text("utf-8")))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{item}: {exc}") from exc
        return
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield RawReport.from_dict(json.loads(line))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc


def read_reports(path: str | Path) -> list[RawReport]:
    return list(iter_reports(path))
