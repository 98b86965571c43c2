"""Atomic token vocabulary and the document <-> token-sequence codec.

The vocabulary partitions into five categories with stable ids, in this
order: structure open/close pairs, path commands (absolute then relative per
letter), arc flags, absolute coordinates P_0..P_(canvas+tolerance) ascending,
and relative offsets d_-(canvas+tolerance)..d_(canvas+tolerance) ascending.
At the default canvas 784 and tolerance 10 that is 42 + 20 + 4 + 795 + 1589
= 2450 tokens.

A token sequence is a flat list of items: Tok (a vocabulary id) or Lit (a
literal attribute span). Attributes ride as one Lit immediately after their
element's opening structure token (viewBox first on the root); path geometry
becomes command/coordinate tokens with the path-leading moveto absolute
(P tokens) and everything after it relative (d tokens). The text form is the
plain concatenation of token strings and literal spans:

    <svg>viewBox=0 0 784 784<path>fill=#000000<cmd_M><P_242><P_674>...

Two serializations are provided: the concatenated text form above and a
newline-delimited id form (integers; literal spans as `L:`-prefixed lines).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from .errors import (
    ArityViolation,
    InvalidLiteral,
    OutOfRange,
    UnbalancedStructure,
    UnknownToken,
    UnsupportedTag,
)
from .ir import (
    COMMAND_LETTERS,
    PARAM_COUNT,
    STRUCTURE_TAGS,
    Element,
    PathCommand,
    SvgDocument,
    ViewBox,
    format_number,
)

FLAG_TOKENS: tuple[str, ...] = ("large_0", "large_1", "sweep_0", "sweep_1")


@dataclass(frozen=True)
class Tok:
    id: int


@dataclass(frozen=True)
class Lit:
    text: str


TokenItem = Tok | Lit


@dataclass(frozen=True)
class TokenSeq:
    items: tuple[TokenItem, ...]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class AtomicVocab:
    """Deterministic id <-> token mapping for one (canvas, tolerance) setting."""

    canvas: int
    tolerance: int
    structure_tags: tuple[str, ...] = STRUCTURE_TAGS

    @cached_property
    def tokens(self) -> tuple[str, ...]:
        out: list[str] = []
        for tag in self.structure_tags:
            out.append(f"<{tag}>")
            out.append(f"</{tag}>")
        for letter in COMMAND_LETTERS:
            out.append(f"<cmd_{letter}>")
            out.append(f"<cmd_{letter.lower()}>")
        out.extend(FLAG_TOKENS)
        reach = self.canvas + self.tolerance
        out.extend(f"<P_{v}>" for v in range(0, reach + 1))
        out.extend(f"<d_{v}>" for v in range(-reach, reach + 1))
        return tuple(out)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {token: i for i, token in enumerate(self.tokens)}

    # Category sizes and id bases, in vocabulary order.
    @property
    def n_struct(self) -> int:
        return 2 * len(self.structure_tags)

    @property
    def n_cmd(self) -> int:
        return 2 * len(COMMAND_LETTERS)

    @property
    def n_flag(self) -> int:
        return len(FLAG_TOKENS)

    @property
    def n_abs(self) -> int:
        return self.canvas + self.tolerance + 1

    @property
    def n_rel(self) -> int:
        return 2 * (self.canvas + self.tolerance) + 1

    @property
    def cmd_base(self) -> int:
        return self.n_struct

    @property
    def flag_base(self) -> int:
        return self.n_struct + self.n_cmd

    @property
    def abs_base(self) -> int:
        return self.flag_base + self.n_flag

    @property
    def rel_base(self) -> int:
        return self.abs_base + self.n_abs

    def __len__(self) -> int:
        return self.rel_base + self.n_rel

    def category(self, token_id: int) -> str:
        if not 0 <= token_id < len(self):
            raise UnknownToken(f"id {token_id} outside vocabulary of {len(self)}")
        if token_id < self.cmd_base:
            return "struct"
        if token_id < self.flag_base:
            return "cmd"
        if token_id < self.abs_base:
            return "flag"
        if token_id < self.rel_base:
            return "coord_abs"
        return "coord_rel"

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self):
            raise UnknownToken(f"id {token_id} outside vocabulary of {len(self)}")
        return self.tokens[token_id]

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownToken(f"token {token!r} not in vocabulary") from None

    # Constructors by meaning.
    def open_id(self, tag: str) -> int:
        if tag not in self.structure_tags:
            raise UnsupportedTag(f"element <{tag}> has no structure token")
        return 2 * self.structure_tags.index(tag)

    def close_id(self, tag: str) -> int:
        return self.open_id(tag) + 1

    def cmd_id(self, op: str) -> int:
        letter = op.upper()
        if letter not in PARAM_COUNT:
            raise UnknownToken(f"no command token for {op!r}")
        return self.cmd_base + 2 * COMMAND_LETTERS.index(letter) + (1 if op.islower() else 0)

    def flag_id(self, kind: str, value: int) -> int:
        return self.flag_base + FLAG_TOKENS.index(f"{kind}_{value}")

    def abs_id(self, v: int) -> int:
        if not 0 <= v <= self.canvas + self.tolerance:
            raise OutOfRange(
                f"absolute coordinate {v} outside [0, {self.canvas + self.tolerance}]"
            )
        return self.abs_base + v

    def rel_id(self, v: int) -> int:
        reach = self.canvas + self.tolerance
        if not -reach <= v <= reach:
            raise OutOfRange(f"offset {v} outside [{-reach}, {reach}]")
        return self.rel_base + reach + v

    # Inspectors.
    def command_op(self, token_id: int) -> str:
        i = token_id - self.cmd_base
        letter = COMMAND_LETTERS[i // 2]
        return letter.lower() if i % 2 else letter

    def flag_value(self, token_id: int) -> tuple[str, int]:
        kind, _, value = FLAG_TOKENS[token_id - self.flag_base].partition("_")
        return kind, int(value)

    def coord_value(self, token_id: int) -> int:
        category = self.category(token_id)
        if category == "coord_abs":
            return token_id - self.abs_base
        if category == "coord_rel":
            return token_id - self.rel_base - (self.canvas + self.tolerance)
        raise UnknownToken(f"id {token_id} is not a coordinate token")

    def category_sizes(self) -> dict[str, int]:
        return {
            "struct": self.n_struct,
            "cmd": self.n_cmd,
            "flag": self.n_flag,
            "coord_abs": self.n_abs,
            "coord_rel": self.n_rel,
        }


def build_vocab(
    canvas: int = 784,
    tolerance: int = 10,
    structure_tags: tuple[str, ...] = STRUCTURE_TAGS,
) -> AtomicVocab:
    """Construct the atomic vocabulary for a canvas/tolerance setting."""
    if canvas <= 0 or tolerance < 0:
        raise OutOfRange(f"bad vocabulary domain canvas={canvas} tolerance={tolerance}")
    return AtomicVocab(canvas, tolerance, tuple(structure_tags))


# ---- attribute spans ----

_ATTR_BOUNDARY = re.compile(r"\s+(?=[A-Za-z_][-.\w:]*=)")


def _attrs_to_lit(pairs: list[tuple[str, str]]) -> str:
    text = " ".join(f"{name}={value}" for name, value in pairs)
    if "<" in text or ">" in text:
        raise InvalidLiteral(f"attribute span contains markup: {text!r}")
    if _lit_to_attrs(text) != pairs:
        raise InvalidLiteral(f"attribute span is not re-splittable: {text!r}")
    return text


def _lit_to_attrs(text: str) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for part in _ATTR_BOUNDARY.split(text):
        name, eq, value = part.partition("=")
        if not eq or not name or any(ch.isspace() for ch in name):
            raise InvalidLiteral(f"bad attribute span {part!r}")
        pairs.append((name, value))
    return pairs


# ---- encoding ----


def _encode_path(cmds: tuple[PathCommand, ...], vocab: AtomicVocab, out: list[TokenItem]) -> None:
    def rel(v: float) -> Tok:
        if v != int(v):
            raise OutOfRange(f"non-integer coordinate {v!r}; document not preprocessed")
        return Tok(vocab.rel_id(int(v)))

    for i, cmd in enumerate(cmds):
        if i == 0:
            if cmd.op != "M":
                raise OutOfRange(
                    f"path starts with {cmd.op!r}, not an absolute moveto;"
                    " document not preprocessed"
                )
            x, y = cmd.params
            if x != int(x) or y != int(y):
                raise OutOfRange(f"non-integer moveto ({x!r}, {y!r})")
            out.append(Tok(vocab.cmd_id("M")))
            out.append(Tok(vocab.abs_id(int(x))))
            out.append(Tok(vocab.abs_id(int(y))))
            continue
        if cmd.op == "z":
            out.append(Tok(vocab.cmd_id("z")))
            continue
        if not cmd.is_relative:
            raise OutOfRange(
                f"absolute command {cmd.op!r} after the leading moveto;"
                " document not preprocessed"
            )
        out.append(Tok(vocab.cmd_id(cmd.op)))
        if cmd.op == "a":
            out.extend(rel(v) for v in cmd.params[:3])
            out.append(Tok(vocab.flag_id("large", cmd.large_arc or 0)))
            out.append(Tok(vocab.flag_id("sweep", cmd.sweep or 0)))
            out.extend(rel(v) for v in cmd.params[3:])
        else:
            out.extend(rel(v) for v in cmd.params)


def encode_atomic(doc: SvgDocument, vocab: AtomicVocab) -> TokenSeq:
    """Token items for a preprocessed document."""
    out: list[TokenItem] = []

    def emit(el: Element, is_root: bool) -> None:
        out.append(Tok(vocab.open_id(el.tag)))
        pairs = list(el.attributes.items())
        if is_root:
            vb = doc.viewbox
            vb_text = " ".join(
                format_number(v) for v in (vb.min_x, vb.min_y, vb.width, vb.height)
            )
            pairs.insert(0, ("viewBox", vb_text))
        if pairs:
            out.append(Lit(_attrs_to_lit(pairs)))
        if el.path_data is not None:
            _encode_path(el.path_data, vocab, out)
        for child in el.children:
            emit(child, False)
        out.append(Tok(vocab.close_id(el.tag)))

    emit(doc.root, True)
    return TokenSeq(tuple(out))


# ---- decoding ----


def _decode_path_commands(
    items: tuple[TokenItem, ...], pos: int, vocab: AtomicVocab
) -> tuple[tuple[PathCommand, ...], int]:
    """Consume command/coordinate tokens until the path close token."""
    cmds: list[PathCommand] = []
    close = vocab.close_id("path")
    first = True

    def take_coord(category: str, op: str) -> int:
        nonlocal pos
        if pos >= len(items):
            raise ArityViolation(f"command {op!r} truncated at end of sequence")
        item = items[pos]
        if not isinstance(item, Tok) or vocab.category(item.id) != category:
            raise ArityViolation(f"command {op!r} expected a {category} token at {pos}")
        pos += 1
        return vocab.coord_value(item.id)

    def take_flag(kind: str, op: str) -> int:
        nonlocal pos
        item = items[pos] if pos < len(items) else None
        if not isinstance(item, Tok) or vocab.category(item.id) != "flag":
            raise ArityViolation(f"command {op!r} expected a {kind} flag token at {pos}")
        got_kind, value = vocab.flag_value(item.id)
        if got_kind != kind:
            raise ArityViolation(f"command {op!r} expected {kind} flag, got {got_kind}")
        pos += 1
        return value

    while True:
        if pos >= len(items):
            raise UnbalancedStructure("path is never closed")
        item = items[pos]
        if isinstance(item, Tok) and item.id == close:
            return tuple(cmds), pos
        if not isinstance(item, Tok) or vocab.category(item.id) != "cmd":
            raise UnbalancedStructure(f"unexpected item inside path at {pos}: {item}")
        op = vocab.command_op(item.id)
        pos += 1
        if first:
            if op != "M":
                raise ArityViolation(f"path starts with {op!r}, not absolute moveto")
            x = take_coord("coord_abs", op)
            y = take_coord("coord_abs", op)
            cmds.append(PathCommand("M", (float(x), float(y))))
            first = False
            continue
        if op == "z":
            cmds.append(PathCommand("z"))
            continue
        if not op.islower():
            raise ArityViolation(f"absolute command {op!r} after the leading moveto")
        if op == "a":
            head = [take_coord("coord_rel", op) for _ in range(3)]
            large = take_flag("large", op)
            sweep = take_flag("sweep", op)
            tail = [take_coord("coord_rel", op) for _ in range(2)]
            cmds.append(
                PathCommand(
                    "a",
                    tuple(float(v) for v in head + tail),
                    large_arc=large,
                    sweep=sweep,
                )
            )
        else:
            n = PARAM_COUNT[op.upper()]
            params = tuple(float(take_coord("coord_rel", op)) for _ in range(n))
            cmds.append(PathCommand(op, params))


def decode_atomic(seq: TokenSeq, vocab: AtomicVocab) -> SvgDocument:
    """Rebuild the document; exact inverse of encode_atomic on its image."""
    items = seq.items
    if not items or not isinstance(items[0], Tok):
        raise UnbalancedStructure("sequence does not start with a structure token")
    pos = 0
    stack: list[Element] = []
    root: Element | None = None
    viewbox: ViewBox | None = None

    while pos < len(items):
        item = items[pos]
        if isinstance(item, Lit):
            raise UnbalancedStructure(f"literal span not after an opening tag at {pos}")
        category = vocab.category(item.id)
        if category != "struct":
            raise UnbalancedStructure(f"{vocab.token(item.id)} outside a path at {pos}")
        token = vocab.token(item.id)
        if token.startswith("</"):
            tag = token[2:-1]
            if not stack or stack[-1].tag != tag:
                raise UnbalancedStructure(f"close {token} does not match open element")
            closed = stack.pop()
            pos += 1
            if not stack:
                if pos != len(items):
                    raise UnbalancedStructure("items after the root close token")
                root = closed
                break
            continue

        tag = token[1:-1]
        el = Element(tag, {}, () if tag == "path" else None, [])
        if stack:
            stack[-1].children.append(el)
        elif tag != "svg":
            raise UnbalancedStructure(f"root element is <{tag}>, expected <svg>")
        stack.append(el)
        pos += 1
        if pos < len(items) and isinstance(items[pos], Lit):
            pairs = _lit_to_attrs(items[pos].text)
            pos += 1
            if len(stack) == 1:
                vb_pairs = [p for p in pairs if p[0] == "viewBox"]
                pairs = [p for p in pairs if p[0] != "viewBox"]
                if vb_pairs:
                    fields = vb_pairs[0][1].split()
                    if len(fields) != 4:
                        raise InvalidLiteral(f"bad viewBox span {vb_pairs[0][1]!r}")
                    viewbox = ViewBox(*(float(v) for v in fields))
            for name, value in pairs:
                el.attributes[name] = value
        if tag == "path":
            cmds, pos = _decode_path_commands(items, pos, vocab)
            el.path_data = cmds

    if root is None:
        raise UnbalancedStructure("sequence ended with unclosed elements")
    if viewbox is None:
        raise InvalidLiteral("decoded root carries no viewBox span")
    return SvgDocument(viewbox, root)


# ---- text and id forms ----


def seq_to_text(seq: TokenSeq, vocab: AtomicVocab, composites: dict[int, str] | None = None) -> str:
    """Concatenated token strings and literal spans (no separators)."""
    parts: list[str] = []
    for item in seq.items:
        if isinstance(item, Lit):
            parts.append(item.text)
        elif item.id < len(vocab):
            parts.append(vocab.token(item.id))
        elif composites and item.id in composites:
            parts.append(composites[item.id])
        else:
            raise UnknownToken(f"id {item.id} outside vocabulary")
    return "".join(parts)


def text_to_seq(text: str, vocab: AtomicVocab, composites: dict[str, int] | None = None) -> TokenSeq:
    """Inverse of seq_to_text.

    Bracketed spans are vocabulary (or composite) tokens; bare spans are arc
    flags when a flag slot is pending, literal attribute spans otherwise.
    """
    items: list[TokenItem] = []
    pos = 0
    pending_flags = 0
    arc_head = 0
    while pos < len(text):
        if text[pos] == "<":
            end = text.find(">", pos)
            if end < 0:
                raise UnknownToken(f"unterminated token at offset {pos}")
            token = text[pos : end + 1]
            if composites and token in composites:
                items.append(Tok(composites[token]))
            else:
                token_id = vocab.id_of(token)
                items.append(Tok(token_id))
                if vocab.category(token_id) == "cmd":
                    is_arc = vocab.command_op(token_id) in ("A", "a")
                    arc_head = 3 if is_arc else 0
                    pending_flags = 2 if is_arc else 0
                elif arc_head > 0:
                    arc_head -= 1
            pos = end + 1
            continue
        if pending_flags and arc_head == 0:
            for flag in FLAG_TOKENS:
                if text.startswith(flag, pos):
                    items.append(Tok(vocab.id_of(flag)))
                    pos += len(flag)
                    pending_flags -= 1
                    break
            else:
                raise UnknownToken(f"expected arc flag at offset {pos}: {text[pos:pos + 12]!r}")
            continue
        end = text.find("<", pos)
        end = len(text) if end < 0 else end
        items.append(Lit(text[pos:end]))
        pos = end
    return TokenSeq(tuple(items))


def seq_to_id_lines(seq: TokenSeq) -> str:
    """Newline-delimited ids; literal spans as L:-prefixed lines."""
    lines = []
    for item in seq.items:
        lines.append(f"L:{item.text}" if isinstance(item, Lit) else str(item.id))
    return "\n".join(lines) + "\n"


def id_lines_to_seq(text: str) -> TokenSeq:
    items: list[TokenItem] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("L:"):
            items.append(Lit(line[2:]))
        else:
            try:
                items.append(Tok(int(line)))
            except ValueError:
                raise UnknownToken(f"bad id line {line!r}") from None
    return TokenSeq(tuple(items))


def count_tokens(seq: TokenSeq, lit_mode: str = "items") -> int:
    """Sequence length; literal spans count as one item or by characters."""
    if lit_mode not in ("items", "chars"):
        raise ValueError(f"lit_mode must be items or chars, got {lit_mode!r}")
    total = 0
    for item in seq.items:
        if isinstance(item, Lit):
            total += 1 if lit_mode == "items" else len(item.text)
        else:
            total += 1
    return total
