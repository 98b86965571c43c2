"""In-memory SVG representation: documents, elements, and path commands.

The model is deliberately small: a document is a viewBox plus an element tree,
and path geometry is a list of commands following the SVG 1.1 path grammar
(implicit command repetition, glued signs/decimals, single-character arc
flags, exponent notation). Character data is not modeled; text/title/desc
elements keep their attributes but lose their content. CSS is only handled at
the inline-style level, by the preprocessing stage.

Parsing is lenient about unknown elements and attributes (they are retained
and left to the cleaning policy); serialization is canonical, so equal
documents serialize to identical bytes.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from .errors import BadPathData, MalformedMarkup

# Tags with structure tokens, in vocabulary order.
STRUCTURE_TAGS: tuple[str, ...] = (
    "svg",
    "path",
    "g",
    "rect",
    "circle",
    "ellipse",
    "line",
    "polyline",
    "polygon",
    "defs",
    "use",
    "linearGradient",
    "radialGradient",
    "stop",
    "clipPath",
    "mask",
    "pattern",
    "symbol",
    "text",
    "title",
    "desc",
)

# Command letters in vocabulary order; case carries the absolute/relative mode.
COMMAND_LETTERS: tuple[str, ...] = ("M", "L", "H", "V", "C", "S", "Q", "T", "A", "Z")

# Numeric parameter count per command (arc flags are held separately).
PARAM_COUNT: dict[str, int] = {
    "M": 2,
    "L": 2,
    "H": 1,
    "V": 1,
    "C": 6,
    "S": 4,
    "Q": 4,
    "T": 2,
    "A": 5,
    "Z": 0,
}

# Indices of (x, y) point pairs within params, per command.
POINT_SLOTS: dict[str, tuple[tuple[int, int], ...]] = {
    "M": ((0, 1),),
    "L": ((0, 1),),
    "C": ((0, 1), (2, 3), (4, 5)),
    "S": ((0, 1), (2, 3)),
    "Q": ((0, 1), (2, 3)),
    "T": ((0, 1),),
    "A": ((3, 4),),
    "H": (),
    "V": (),
    "Z": (),
}


@dataclass(frozen=True)
class ViewBox:
    min_x: float
    min_y: float
    width: float
    height: float


@dataclass(frozen=True)
class PathCommand:
    """One path command; op case encodes mode (upper absolute, lower relative)."""

    op: str
    params: tuple[float, ...] = ()
    large_arc: int | None = None
    sweep: int | None = None

    def __post_init__(self) -> None:
        letter = self.op.upper()
        if letter not in PARAM_COUNT:
            raise BadPathData(f"unknown path command {self.op!r}")
        want = PARAM_COUNT[letter]
        if len(self.params) != want:
            raise BadPathData(
                f"command {self.op!r} takes {want} parameters, got {len(self.params)}"
            )
        if letter == "A":
            if self.large_arc not in (0, 1) or self.sweep not in (0, 1):
                raise BadPathData(f"command {self.op!r} requires 0/1 arc flags")
        elif self.large_arc is not None or self.sweep is not None:
            raise BadPathData(f"command {self.op!r} does not take arc flags")

    @property
    def is_relative(self) -> bool:
        return self.op.islower()


@dataclass
class Element:
    tag: str
    attributes: dict[str, str] = field(default_factory=dict)
    path_data: tuple[PathCommand, ...] | None = None
    children: list["Element"] = field(default_factory=list)


@dataclass
class SvgDocument:
    viewbox: ViewBox
    root: Element


# ---- path data grammar ----

_NUMBER = re.compile(r"[\s,]*([+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?)")
_FLAG = re.compile(r"[\s,]*([01])")
_LETTER = re.compile(r"[\s,]*([A-Za-z])")


def _read_number(d: str, pos: int, op: str) -> tuple[float, int]:
    m = _NUMBER.match(d, pos)
    if not m:
        raise BadPathData(f"expected number for {op!r} at offset {pos}: {d[pos:pos + 12]!r}")
    return float(m.group(1)), m.end()


def _read_flag(d: str, pos: int, op: str) -> tuple[int, int]:
    m = _FLAG.match(d, pos)
    if not m:
        raise BadPathData(f"expected arc flag for {op!r} at offset {pos}: {d[pos:pos + 12]!r}")
    return int(m.group(1)), m.end()


def parse_path_data(d: str) -> tuple[PathCommand, ...]:
    """Parse a `d` attribute into commands, expanding implicit repetition."""
    out: list[PathCommand] = []
    pos = 0
    op: str | None = None
    n = len(d)
    while True:
        m = _LETTER.match(d, pos)
        if m:
            op = m.group(1)
            if op.upper() not in PARAM_COUNT:
                raise BadPathData(f"unknown path command {op!r} at offset {pos}")
            pos = m.end()
        else:
            if pos >= n or not d[pos:].strip(" \t\r\n,"):
                break
            if op is None:
                raise BadPathData(f"path data does not start with a command: {d[:12]!r}")
            if op.upper() == "Z":
                raise BadPathData(f"trailing data after Z at offset {pos}")
            # Implicit repetition; extra M parameters continue as linetos.
            if op == "M":
                op = "L"
            elif op == "m":
                op = "l"
        letter = op.upper()
        if letter == "Z":
            out.append(PathCommand(op))
            continue
        if letter == "A":
            params = []
            for _ in range(3):
                v, pos = _read_number(d, pos, op)
                params.append(v)
            large, pos = _read_flag(d, pos, op)
            sweep, pos = _read_flag(d, pos, op)
            for _ in range(2):
                v, pos = _read_number(d, pos, op)
                params.append(v)
            out.append(PathCommand(op, tuple(params), large_arc=large, sweep=sweep))
        else:
            params = []
            for _ in range(PARAM_COUNT[letter]):
                v, pos = _read_number(d, pos, op)
                params.append(v)
            out.append(PathCommand(op, tuple(params)))
    return tuple(out)


def format_number(v: float) -> str:
    """Shortest exact decimal form; integral values drop the point."""
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def serialize_path_data(commands: tuple[PathCommand, ...]) -> str:
    """Longhand form: every command written out, space-separated parameters."""
    parts: list[str] = []
    for cmd in commands:
        chunk = [cmd.op]
        if cmd.op.upper() == "A":
            chunk += [format_number(v) for v in cmd.params[:3]]
            chunk += [str(cmd.large_arc), str(cmd.sweep)]
            chunk += [format_number(v) for v in cmd.params[3:]]
        else:
            chunk += [format_number(v) for v in cmd.params]
        parts.append(" ".join(chunk))
    return " ".join(parts)


# ---- document parsing ----

_VIEWBOX_SPLIT = re.compile(r"[\s,]+")
_UNIT = re.compile(r"^([+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?)\s*(px)?$")


def _local_name(name: str) -> str:
    return name.rsplit("}", 1)[-1]


def _parse_length(value: str) -> float | None:
    m = _UNIT.match(value.strip())
    return float(m.group(1)) if m else None


def _parse_viewbox(value: str) -> ViewBox:
    fields = [f for f in _VIEWBOX_SPLIT.split(value.strip()) if f]
    if len(fields) != 4:
        raise MalformedMarkup(f"viewBox needs 4 numbers, got {value!r}")
    try:
        nums = [float(f) for f in fields]
    except ValueError:
        raise MalformedMarkup(f"viewBox is not numeric: {value!r}") from None
    return ViewBox(*nums)


def _convert(node: ET.Element) -> Element:
    tag = _local_name(node.tag)
    attrs: dict[str, str] = {}
    path_data: tuple[PathCommand, ...] | None = None
    for name, value in node.attrib.items():
        attrs[_local_name(name)] = value
    if tag == "path":
        path_data = parse_path_data(attrs.pop("d", ""))
    children = [_convert(child) for child in node]
    return Element(tag, attrs, path_data, children)


def parse_svg(text: str) -> SvgDocument:
    """Parse SVG markup into a document.

    Namespaces are stripped to local names, comments and character data are
    dropped, and unknown elements are retained for the cleaning policy. A
    missing viewBox is synthesized from unitless width/height attributes.
    """
    try:
        node = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedMarkup(f"not well-formed XML: {exc}") from None
    if _local_name(node.tag) != "svg":
        raise MalformedMarkup(f"root element is {_local_name(node.tag)!r}, expected svg")
    root = _convert(node)
    if "viewBox" in root.attributes:
        viewbox = _parse_viewbox(root.attributes.pop("viewBox"))
    else:
        width = _parse_length(root.attributes.get("width", ""))
        height = _parse_length(root.attributes.get("height", ""))
        if width is None or height is None:
            raise MalformedMarkup("no viewBox and no unitless width/height to derive one")
        viewbox = ViewBox(0.0, 0.0, width, height)
    return SvgDocument(viewbox, root)


# ---- canonical serialization ----


def _format_attrs(items: list[tuple[str, str]]) -> str:
    return "".join(
        f' {name}="{escape(value, {chr(34): "&quot;"})}"' for name, value in items
    )


def _serialize_element(el: Element, lines: list[str], depth: int, viewbox: ViewBox | None) -> None:
    indent = "  " * depth
    items = []
    if viewbox is not None:
        vb = " ".join(format_number(v) for v in (viewbox.min_x, viewbox.min_y,
                                                 viewbox.width, viewbox.height))
        items.append(("xmlns", "http://www.w3.org/2000/svg"))
        items.append(("viewBox", vb))
    items += list(el.attributes.items())
    if el.path_data is not None:
        items.append(("d", serialize_path_data(el.path_data)))
    attrs = _format_attrs(items)
    if el.children:
        lines.append(f"{indent}<{el.tag}{attrs}>")
        for child in el.children:
            _serialize_element(child, lines, depth + 1, None)
        lines.append(f"{indent}</{el.tag}>")
    else:
        lines.append(f"{indent}<{el.tag}{attrs}/>")


def serialize_svg(doc: SvgDocument) -> str:
    """Canonical text: fixed attribute placement, stable number formatting."""
    lines: list[str] = []
    _serialize_element(doc.root, lines, 0, doc.viewbox)
    return "\n".join(lines) + "\n"


def find_unknown_tags(doc: SvgDocument) -> frozenset[str]:
    """Tags present in the tree but outside the supported structure set."""
    known = set(STRUCTURE_TAGS)
    found: set[str] = set()

    def walk(el: Element) -> None:
        if el.tag not in known:
            found.add(el.tag)
        for child in el.children:
            walk(child)

    walk(doc.root)
    return frozenset(found)
