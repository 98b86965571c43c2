"""Canonical preprocessing: raw SVG in, integer-relative geometry out.

The pipeline runs six stages in a fixed order:

    parse -> clean -> expand_use -> bake_transforms -> normalize_viewbox
          -> quantize_and_relativize

After it, a document has a (0, 0, canvas, canvas) viewBox, no transforms, no
use references, only path geometry (basic shapes are rewritten during
cleaning), and every path holds one leading absolute integer moveto followed
by relative integer commands. Every absolute coordinate lies in
[0, canvas + tolerance], so every delta fits in +/-(canvas + tolerance).

Stage errors subclass PreprocessError and carry the stage name, so batch
drivers can log where a sample died. Cleaning limitations: stylesheet
elements (<style>) are dropped without applying their rules (only inline
style attributes are merged), and gradient coordinates are attribute text
that baking does not re-project.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field, replace

from matplotlib.colors import CSS4_COLORS

from .errors import (
    CircularReference,
    DanglingReference,
    DegenerateViewBox,
    RejectedContent,
    SingularTransform,
    UnstableSample,
)
from .ir import (
    STRUCTURE_TAGS,
    Element,
    PathCommand,
    SvgDocument,
    ViewBox,
    format_number,
    parse_svg,
)

_NUMBER = re.compile(r"[+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?")

# Presentation attributes that inherit; hoisted from the root before its
# attributes are stripped, so stripping cannot change rendering.
_INHERITABLE = (
    "fill",
    "fill-rule",
    "fill-opacity",
    "stroke",
    "stroke-width",
    "stroke-opacity",
    "stroke-linecap",
    "stroke-linejoin",
    "stroke-miterlimit",
    "stroke-dasharray",
    "color",
)

_COLOR_ATTRS = ("fill", "stroke", "stop-color", "color", "flood-color", "lighting-color")

DEFAULT_FILL = "#000000"
DARK_BACKGROUND_FILL = "#000000"


@dataclass(frozen=True)
class PreprocessConfig:
    canvas: int = 784
    tolerance: int = 10
    reject_tags: frozenset[str] = frozenset({"script", "image"})
    drop_tags: frozenset[str] = frozenset({"foreignObject"})
    dark_background: bool = False


# ---- affine transforms ----


@dataclass(frozen=True)
class Affine:
    """2x3 affine map in SVG order: (x, y) -> (a x + c y + e, b x + d y + f)."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    e: float = 0.0
    f: float = 0.0

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return self.a * x + self.c * y + self.e, self.b * x + self.d * y + self.f

    def apply_delta(self, dx: float, dy: float) -> tuple[float, float]:
        return self.a * dx + self.c * dy, self.b * dx + self.d * dy

    def compose(self, other: "Affine") -> "Affine":
        """self after other: (self o other)(p) = self(other(p))... in SVG list
        order `self other`, i.e. self is the outer (leftmost) transform."""
        return Affine(
            self.a * other.a + self.c * other.b,
            self.b * other.a + self.d * other.b,
            self.a * other.c + self.c * other.d,
            self.b * other.c + self.d * other.d,
            self.a * other.e + self.c * other.f + self.e,
            self.b * other.e + self.d * other.f + self.f,
        )

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def is_identity(self) -> bool:
        return self == Affine()

    @property
    def is_axis_preserving(self) -> bool:
        return self.b == 0.0 and self.c == 0.0

    @staticmethod
    def translation(tx: float, ty: float) -> "Affine":
        return Affine(1.0, 0.0, 0.0, 1.0, tx, ty)

    @staticmethod
    def scaling(sx: float, sy: float) -> "Affine":
        return Affine(sx, 0.0, 0.0, sy, 0.0, 0.0)

    @staticmethod
    def rotation(degrees: float) -> "Affine":
        r = math.radians(degrees)
        return Affine(math.cos(r), math.sin(r), -math.sin(r), math.cos(r), 0.0, 0.0)


_TRANSFORM_TERM = re.compile(r"\s*(\w+)\s*\(([^)]*)\)[\s,]*")


def parse_transform(text: str) -> Affine:
    """Parse a transform list; terms compose left to right."""
    result = Affine()
    pos = 0
    while pos < len(text):
        m = _TRANSFORM_TERM.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ValueError(f"bad transform list: {text[pos:]!r}")
            break
        pos = m.end()
        name = m.group(1)
        args = [float(v) for v in _NUMBER.findall(m.group(2))]
        if name == "matrix" and len(args) == 6:
            term = Affine(*args)
        elif name == "translate" and len(args) in (1, 2):
            term = Affine.translation(args[0], args[1] if len(args) == 2 else 0.0)
        elif name == "scale" and len(args) in (1, 2):
            term = Affine.scaling(args[0], args[1] if len(args) == 2 else args[0])
        elif name == "rotate" and len(args) == 1:
            term = Affine.rotation(args[0])
        elif name == "rotate" and len(args) == 3:
            term = (
                Affine.translation(args[1], args[2])
                .compose(Affine.rotation(args[0]))
                .compose(Affine.translation(-args[1], -args[2]))
            )
        elif name == "skewX" and len(args) == 1:
            term = Affine(1.0, 0.0, math.tan(math.radians(args[0])), 1.0, 0.0, 0.0)
        elif name == "skewY" and len(args) == 1:
            term = Affine(1.0, math.tan(math.radians(args[0])), 0.0, 1.0, 0.0, 0.0)
        else:
            raise ValueError(f"bad transform term {name}({m.group(2)})")
        result = result.compose(term)
    return result


def transform_arc_axes(
    linear: Affine, rx: float, ry: float, rotation_deg: float
) -> tuple[float, float, float]:
    """Map an ellipse's radii/axis-rotation through the linear part of a map.

    The arc's ellipse is the unit circle under B = L R(theta) S(rx, ry); the
    image ellipse's semi-axes are the square roots of the eigenvalues of
    B B^T and the new rotation is the major eigenvector's angle.
    """
    if linear.is_axis_preserving and linear.a == linear.d and linear.a > 0:
        # Uniform scale: radii scale, axis angle unchanged (keeps the
        # pipeline idempotent; the general route re-derives the angle).
        return linear.a * rx, linear.a * ry, rotation_deg
    theta = math.radians(rotation_deg)
    ct, st = math.cos(theta), math.sin(theta)
    b00 = rx * (linear.a * ct + linear.c * st)
    b10 = rx * (linear.b * ct + linear.d * st)
    b01 = ry * (linear.c * ct - linear.a * st)
    b11 = ry * (linear.d * ct - linear.b * st)
    m00 = b00 * b00 + b01 * b01
    m01 = b00 * b10 + b01 * b11
    m11 = b10 * b10 + b11 * b11
    mean = 0.5 * (m00 + m11)
    spread = math.hypot(0.5 * (m00 - m11), m01)
    lam1 = mean + spread
    lam2 = max(mean - spread, 0.0)
    new_rx = math.sqrt(lam1)
    new_ry = math.sqrt(lam2)
    if abs(m01) < 1e-12 * max(lam1, 1.0):
        angle = 0.0 if m00 >= m11 else 90.0
    else:
        angle = math.degrees(math.atan2(lam1 - m00, m01))
    return new_rx, new_ry, angle % 180.0


# ---- stage 1: clean ----


def _copy_tree(el: Element) -> Element:
    return copy.deepcopy(el)


def _walk(el: Element):
    yield el
    for child in el.children:
        yield from _walk(child)


def _points_list(text: str) -> list[tuple[float, float]]:
    nums = [float(v) for v in _NUMBER.findall(text)]
    return [(nums[i], nums[i + 1]) for i in range(0, len(nums) - 1, 2)]


def _shape_to_path(el: Element) -> Element | None:
    """Rewrite a basic shape as an equivalent path element (None = no render)."""
    attrs = dict(el.attributes)

    def take(name: str, default: float = 0.0) -> float:
        raw = attrs.pop(name, None)
        if raw is None:
            return default
        m = _NUMBER.search(raw)
        return float(m.group(0)) if m else default

    cmds: list[PathCommand]
    if el.tag == "rect":
        x, y = take("x"), take("y")
        w, h = take("width"), take("height")
        rx_raw, ry_raw = attrs.pop("rx", None), attrs.pop("ry", None)
        if w <= 0 or h <= 0:
            return None
        rx = float(_NUMBER.search(rx_raw).group(0)) if rx_raw else None
        ry = float(_NUMBER.search(ry_raw).group(0)) if ry_raw else None
        if rx is None:
            rx = ry if ry is not None else 0.0
        if ry is None:
            ry = rx
        rx = min(max(rx, 0.0), w / 2)
        ry = min(max(ry, 0.0), h / 2)
        if rx == 0 or ry == 0:
            cmds = [
                PathCommand("M", (x, y)),
                PathCommand("H", (x + w,)),
                PathCommand("V", (y + h,)),
                PathCommand("H", (x,)),
                PathCommand("Z"),
            ]
        else:
            cmds = [
                PathCommand("M", (x + rx, y)),
                PathCommand("H", (x + w - rx,)),
                PathCommand("A", (rx, ry, 0.0, x + w, y + ry), large_arc=0, sweep=1),
                PathCommand("V", (y + h - ry,)),
                PathCommand("A", (rx, ry, 0.0, x + w - rx, y + h), large_arc=0, sweep=1),
                PathCommand("H", (x + rx,)),
                PathCommand("A", (rx, ry, 0.0, x, y + h - ry), large_arc=0, sweep=1),
                PathCommand("V", (y + ry,)),
                PathCommand("A", (rx, ry, 0.0, x + rx, y), large_arc=0, sweep=1),
                PathCommand("Z"),
            ]
    elif el.tag in ("circle", "ellipse"):
        cx, cy = take("cx"), take("cy")
        if el.tag == "circle":
            rx = ry = take("r")
        else:
            rx, ry = take("rx"), take("ry")
        if rx <= 0 or ry <= 0:
            return None
        cmds = [
            PathCommand("M", (cx + rx, cy)),
            PathCommand("A", (rx, ry, 0.0, cx - rx, cy), large_arc=0, sweep=1),
            PathCommand("A", (rx, ry, 0.0, cx + rx, cy), large_arc=0, sweep=1),
            PathCommand("Z"),
        ]
    elif el.tag == "line":
        x1, y1, x2, y2 = take("x1"), take("y1"), take("x2"), take("y2")
        cmds = [PathCommand("M", (x1, y1)), PathCommand("L", (x2, y2))]
    elif el.tag in ("polyline", "polygon"):
        pts = _points_list(attrs.pop("points", ""))
        if len(pts) < 2:
            return None
        cmds = [PathCommand("M", pts[0])]
        cmds += [PathCommand("L", p) for p in pts[1:]]
        if el.tag == "polygon":
            cmds.append(PathCommand("Z"))
    else:
        raise AssertionError(el.tag)
    return Element("path", attrs, tuple(cmds), list(el.children))


_STYLE_DECL = re.compile(r"([-\w]+)\s*:\s*([^;]+)")


def _merge_style(el: Element) -> None:
    style = el.attributes.pop("style", None)
    if not style:
        return
    for name, value in _STYLE_DECL.findall(style):
        el.attributes[name.strip()] = value.strip()


_RGB_FUNC = re.compile(r"rgba?\(([^)]*)\)", re.IGNORECASE)
_HEX_SHORT = re.compile(r"^#([0-9a-fA-F]{3})$")
_HEX_LONG = re.compile(r"^#([0-9a-fA-F]{6})$")


def _rgb_component(raw: str) -> int:
    raw = raw.strip()
    if raw.endswith("%"):
        return max(0, min(255, round(float(raw[:-1]) * 255 / 100)))
    return max(0, min(255, round(float(raw))))


def normalize_color(value: str) -> tuple[str, float | None]:
    """Canonical lowercase #rrggbb where the value is a plain color.

    Returns (color, alpha); alpha is non-None only for rgba() inputs.
    Non-color values (none, url(...), currentColor, ...) pass through.
    """
    v = value.strip()
    m = _HEX_LONG.match(v)
    if m:
        return "#" + m.group(1).lower(), None
    m = _HEX_SHORT.match(v)
    if m:
        return "#" + "".join(ch * 2 for ch in m.group(1).lower()), None
    m = _RGB_FUNC.match(v)
    if m:
        parts = [p for p in re.split(r"[,\s/]+", m.group(1).strip()) if p]
        if len(parts) in (3, 4):
            r, g, b = (_rgb_component(p) for p in parts[:3])
            alpha = float(parts[3]) if len(parts) == 4 else None
            return f"#{r:02x}{g:02x}{b:02x}", alpha
    named = CSS4_COLORS.get(v.lower())
    if named:
        return named.lower(), None
    return v, None


def _normalize_colors(el: Element) -> None:
    for attr in _COLOR_ATTRS:
        if attr in el.attributes:
            color, alpha = normalize_color(el.attributes[attr])
            el.attributes[attr] = color
            if alpha is not None:
                el.attributes.setdefault(f"{attr}-opacity", str(alpha))


def _repair_fill(el: Element, inherited: bool) -> None:
    has_fill = inherited or "fill" in el.attributes
    if el.tag == "path" and not has_fill:
        el.attributes["fill"] = DEFAULT_FILL
    for child in el.children:
        _repair_fill(child, has_fill)


def clean_document(doc: SvgDocument, config: PreprocessConfig) -> SvgDocument:
    """Reject unsafe content, drop unsupported elements, rewrite shapes to
    paths, strip root attributes to the viewBox, merge inline styles, and
    normalize colors."""
    for el in _walk(doc.root):
        if el.tag in config.reject_tags:
            raise RejectedContent(f"document contains <{el.tag}>")

    root = _copy_tree(doc.root)
    removable = config.drop_tags | {
        t for t in (el.tag for el in _walk(root)) if t not in STRUCTURE_TAGS
    }

    def rebuild(el: Element) -> Element | None:
        if el.tag in removable:
            return None
        if el.tag in ("rect", "circle", "ellipse", "line", "polyline", "polygon"):
            converted = _shape_to_path(el)
            if converted is None:
                return None
            el = converted
        el.children = [c for c in (rebuild(child) for child in el.children) if c is not None]
        if el.tag == "path" and not el.path_data:
            return None
        return el

    root.children = [c for c in (rebuild(child) for child in root.children) if c is not None]

    # Root attributes are stripped; hoist inheritable presentation attributes
    # onto top-level children first so rendering is unchanged.
    _merge_style(root)
    for name in _INHERITABLE:
        if name in root.attributes:
            for child in root.children:
                child.attributes.setdefault(name, root.attributes[name])
    root.attributes = {}

    for el in _walk(root):
        if el is not root:
            _merge_style(el)
        _normalize_colors(el)

    _repair_fill(root, inherited=False)

    if config.dark_background:
        vb = doc.viewbox
        backdrop = Element(
            "path",
            {"fill": DARK_BACKGROUND_FILL},
            (
                PathCommand("M", (vb.min_x, vb.min_y)),
                PathCommand("H", (vb.min_x + vb.width,)),
                PathCommand("V", (vb.min_y + vb.height,)),
                PathCommand("H", (vb.min_x,)),
                PathCommand("Z"),
            ),
        )
        root.children.insert(0, backdrop)

    return SvgDocument(doc.viewbox, root)


# ---- stage 2: expand use ----

# Legitimate use chains resolve in as many rounds as their nesting depth;
# anything deeper than this is a reference cycle blowing up.
_MAX_USE_ROUNDS = 16
_MAX_EXPANDED_ELEMENTS = 100_000
_MAX_TREE_DEPTH = 200


def _tree_stats(root: Element) -> tuple[int, int]:
    """(element count, max depth), computed iteratively: cyclic use
    expansion doubles depth per round, which would blow recursive walks."""
    count, depth = 0, 0
    stack: list[tuple[Element, int]] = [(root, 1)]
    while stack:
        el, d = stack.pop()
        count += 1
        depth = max(depth, d)
        stack.extend((child, d + 1) for child in el.children)
    return count, depth


def expand_use(doc: SvgDocument) -> SvgDocument:
    """Replace every use element with a transformed deep copy of its target."""
    root = _copy_tree(doc.root)

    for _ in range(_MAX_USE_ROUNDS):
        count, depth = _tree_stats(root)
        if count > _MAX_EXPANDED_ELEMENTS or depth > _MAX_TREE_DEPTH:
            raise CircularReference("use expansion exploded the element tree")
        targets = {el.attributes["id"]: el for el in _walk(root) if "id" in el.attributes}
        found_use = False

        def substitute(el: Element) -> Element:
            nonlocal found_use
            if el.tag == "use":
                found_use = True
                ref = el.attributes.get("href", "")
                if not ref.startswith("#") or ref[1:] not in targets:
                    raise DanglingReference(f"use references missing target {ref!r}")
                target = _copy_tree(targets[ref[1:]])
                target.attributes.pop("id", None)

                def offset(name: str) -> float:
                    m = _NUMBER.search(el.attributes.get(name, ""))
                    return float(m.group(0)) if m else 0.0

                x, y = offset("x"), offset("y")
                wrapper_attrs = {
                    k: v
                    for k, v in el.attributes.items()
                    if k not in ("href", "x", "y", "width", "height", "id")
                }
                transform = wrapper_attrs.pop("transform", "")
                if x or y:
                    offset_term = f"translate({format_number(x)} {format_number(y)})"
                    transform = f"{transform} {offset_term}".strip()
                if transform:
                    wrapper_attrs["transform"] = transform
                return Element("g", wrapper_attrs, None, [target])
            el.children = [substitute(child) for child in el.children]
            return el

        try:
            root = substitute(root)
        except RecursionError:
            # Depth doubles per round under a reference cycle; the copy can
            # overflow before the next round's depth check sees it.
            raise CircularReference("use expansion exploded the element tree") from None
        if not found_use:
            return SvgDocument(doc.viewbox, root)
    raise CircularReference(f"use expansion did not settle in {_MAX_USE_ROUNDS} rounds")


# ---- stage 3: bake transforms ----

_SINGULAR_EPS = 1e-9


def _transform_path(
    commands: tuple[PathCommand, ...], ctm: Affine
) -> tuple[PathCommand, ...]:
    out: list[PathCommand] = []
    cur_x, cur_y = 0.0, 0.0
    start_x, start_y = 0.0, 0.0
    axis_ok = ctm.is_axis_preserving
    for cmd in commands:
        letter = cmd.op.upper()
        rel = cmd.is_relative
        if letter == "Z":
            out.append(cmd)
            cur_x, cur_y = start_x, start_y
            continue
        if letter == "H":
            x = cur_x + cmd.params[0] if rel else cmd.params[0]
            if axis_ok:
                if rel:
                    out.append(PathCommand("h", (ctm.a * cmd.params[0],)))
                else:
                    out.append(PathCommand("H", (ctm.a * x + ctm.e,)))
            else:
                if rel:
                    out.append(PathCommand("l", ctm.apply_delta(cmd.params[0], 0.0)))
                else:
                    out.append(PathCommand("L", ctm.apply(x, cur_y)))
            cur_x = x
            continue
        if letter == "V":
            y = cur_y + cmd.params[0] if rel else cmd.params[0]
            if axis_ok:
                if rel:
                    out.append(PathCommand("v", (ctm.d * cmd.params[0],)))
                else:
                    out.append(PathCommand("V", (ctm.d * y + ctm.f,)))
            else:
                if rel:
                    out.append(PathCommand("l", ctm.apply_delta(0.0, cmd.params[0])))
                else:
                    out.append(PathCommand("L", ctm.apply(cur_x, y)))
            cur_y = y
            continue
        if letter == "A":
            rx, ry, rot = cmd.params[:3]
            ex, ey = cmd.params[3], cmd.params[4]
            new_rx, new_ry, new_rot = transform_arc_axes(ctm, rx, ry, rot)
            sweep = cmd.sweep if ctm.determinant >= 0 else 1 - cmd.sweep
            if rel:
                dx, dy = ctm.apply_delta(ex, ey)
                out.append(
                    PathCommand(
                        "a", (new_rx, new_ry, new_rot, dx, dy),
                        large_arc=cmd.large_arc, sweep=sweep,
                    )
                )
                cur_x, cur_y = cur_x + ex, cur_y + ey
            else:
                nx, ny = ctm.apply(ex, ey)
                out.append(
                    PathCommand(
                        "A", (new_rx, new_ry, new_rot, nx, ny),
                        large_arc=cmd.large_arc, sweep=sweep,
                    )
                )
                cur_x, cur_y = ex, ey
            continue
        # Point-parameter commands: M L C S Q T.
        params = list(cmd.params)
        new_params: list[float] = []
        for i in range(0, len(params), 2):
            px, py = params[i], params[i + 1]
            if rel:
                new_params.extend(ctm.apply_delta(px, py))
            else:
                new_params.extend(ctm.apply(px, py))
        out.append(replace(cmd, params=tuple(new_params)))
        if rel:
            cur_x, cur_y = cur_x + params[-2], cur_y + params[-1]
        else:
            cur_x, cur_y = params[-2], params[-1]
        if letter == "M":
            start_x, start_y = cur_x, cur_y
    return tuple(out)


def bake_transforms(doc: SvgDocument) -> SvgDocument:
    """Fold every transform attribute into path coordinates and remove it."""
    root = _copy_tree(doc.root)

    def bake(el: Element, ctm: Affine) -> None:
        own = el.attributes.pop("transform", None)
        if own:
            ctm = ctm.compose(parse_transform(own))
        if el.path_data is not None and not ctm.is_identity:
            if abs(ctm.determinant) < _SINGULAR_EPS:
                raise SingularTransform(
                    f"composed transform is singular (det={ctm.determinant:g})"
                )
            el.path_data = _transform_path(el.path_data, ctm)
        for child in el.children:
            bake(child, ctm)

    bake(root, Affine())
    return SvgDocument(doc.viewbox, root)


# ---- stage 4: normalize viewbox ----


def normalize_viewbox(doc: SvgDocument, config: PreprocessConfig) -> SvgDocument:
    """Map the viewBox to (0, 0, canvas, canvas) with a uniform scale."""
    vb = doc.viewbox
    if vb.width <= 0 or vb.height <= 0:
        raise DegenerateViewBox(f"viewBox {vb} has non-positive extent")
    scale = config.canvas / max(vb.width, vb.height)
    affine = Affine(scale, 0.0, 0.0, scale, -scale * vb.min_x, -scale * vb.min_y)
    root = _copy_tree(doc.root)
    if not affine.is_identity:
        for el in _walk(root):
            if el.path_data is not None:
                el.path_data = _transform_path(el.path_data, affine)
    return SvgDocument(
        ViewBox(0.0, 0.0, float(config.canvas), float(config.canvas)), root
    )


# ---- stage 5: quantize and relativize ----


def _round_half_away(v: float) -> int:
    return int(math.floor(abs(v) + 0.5)) * (1 if v >= 0 else -1)


@dataclass
class _AbsCommand:
    letter: str  # canonical uppercase
    points: list[tuple[float, float]] = field(default_factory=list)
    arc_head: tuple[float, float, float] | None = None  # rx, ry, rotation
    flags: tuple[int, int] | None = None


def _to_absolute(commands: tuple[PathCommand, ...]) -> list[_AbsCommand]:
    """Walk a path, resolving every command to absolute point parameters."""
    out: list[_AbsCommand] = []
    cur = (0.0, 0.0)
    start = (0.0, 0.0)
    first = True
    for cmd in commands:
        letter = cmd.op.upper()
        rel = cmd.is_relative
        if first and letter != "M":
            # SVG's initial current point; an explicit move keeps geometry
            # identical while giving the path its required leading moveto.
            out.append(_AbsCommand("M", [cur]))
            start = cur
        first = False
        if letter == "Z":
            out.append(_AbsCommand("Z"))
            cur = start
            continue
        if letter == "H":
            x = cur[0] + cmd.params[0] if rel else cmd.params[0]
            cur = (x, cur[1])
            out.append(_AbsCommand("H", [cur]))
            continue
        if letter == "V":
            y = cur[1] + cmd.params[0] if rel else cmd.params[0]
            cur = (cur[0], y)
            out.append(_AbsCommand("V", [cur]))
            continue
        if letter == "A":
            ex, ey = cmd.params[3], cmd.params[4]
            end = (cur[0] + ex, cur[1] + ey) if rel else (ex, ey)
            out.append(
                _AbsCommand(
                    "A",
                    [end],
                    arc_head=(cmd.params[0], cmd.params[1], cmd.params[2]),
                    flags=(cmd.large_arc or 0, cmd.sweep or 0),
                )
            )
            cur = end
            continue
        pts: list[tuple[float, float]] = []
        for i in range(0, len(cmd.params), 2):
            px, py = cmd.params[i], cmd.params[i + 1]
            pts.append((cur[0] + px, cur[1] + py) if rel else (px, py))
        out.append(_AbsCommand(letter, pts))
        cur = pts[-1]
        if letter == "M":
            start = cur
    return out


def _split_subpaths(cmds: list[_AbsCommand]) -> list[list[_AbsCommand]]:
    subpaths: list[list[_AbsCommand]] = []
    for cmd in cmds:
        if cmd.letter == "M" or not subpaths:
            subpaths.append([])
        subpaths[-1].append(cmd)
    return subpaths


def _subpath_in_bounds(subpath: list[_AbsCommand], lo: float, hi: float) -> bool:
    xs = [p[0] for cmd in subpath for p in cmd.points]
    ys = [p[1] for cmd in subpath for p in cmd.points]
    if not xs:
        return False
    return not (max(xs) < lo or min(xs) > hi or max(ys) < lo or min(ys) > hi)


def quantize_and_relativize(doc: SvgDocument, config: PreprocessConfig) -> SvgDocument:
    """Round geometry to integers and rewrite each path as one absolute
    moveto plus relative commands.

    Deltas are differences of the already-quantized absolute positions, so
    repeated encoding never drifts. Subpaths whose bounding box (over end and
    control points) misses [-tolerance, canvas + tolerance]^2 entirely are
    dropped; kept positions are clamped into [0, canvas + tolerance], which
    bounds every delta within +/-(canvas + tolerance).
    """
    hi = float(config.canvas + config.tolerance)
    lo_keep = -float(config.tolerance)
    root = _copy_tree(doc.root)
    kept_commands = 0

    def qpoint(p: tuple[float, float]) -> tuple[int, int]:
        qx = min(max(_round_half_away(p[0]), 0), int(hi))
        qy = min(max(_round_half_away(p[1]), 0), int(hi))
        return qx, qy

    def requantize(el: Element) -> Element | None:
        nonlocal kept_commands
        if el.path_data is None:
            el.children = [c for c in (requantize(ch) for ch in el.children) if c]
            return el
        subpaths = [
            sp
            for sp in _split_subpaths(_to_absolute(el.path_data))
            if _subpath_in_bounds(sp, lo_keep, hi)
        ]
        out: list[PathCommand] = []
        cur: tuple[int, int] | None = None
        start: tuple[int, int] | None = None
        for subpath in subpaths:
            for cmd in subpath:
                if cmd.letter == "Z":
                    out.append(PathCommand("z"))
                    cur = start
                    continue
                qpts = [qpoint(p) for p in cmd.points]
                end = qpts[-1]
                if cur is None:
                    # Leading moveto of the path: absolute integers.
                    out.append(PathCommand("M", (float(end[0]), float(end[1]))))
                elif cmd.letter == "H":
                    out.append(PathCommand("h", (float(end[0] - cur[0]),)))
                    end = (end[0], cur[1])
                elif cmd.letter == "V":
                    out.append(PathCommand("v", (float(end[1] - cur[1]),)))
                    end = (cur[0], end[1])
                elif cmd.letter == "A":
                    rx, ry, rot = cmd.arc_head or (0.0, 0.0, 0.0)
                    qrx = min(max(_round_half_away(rx), 0), int(hi))
                    qry = min(max(_round_half_away(ry), 0), int(hi))
                    qrot = _round_half_away(rot) % 360
                    large, sweep = cmd.flags or (0, 0)
                    out.append(
                        PathCommand(
                            "a",
                            (
                                float(qrx),
                                float(qry),
                                float(qrot),
                                float(end[0] - cur[0]),
                                float(end[1] - cur[1]),
                            ),
                            large_arc=large,
                            sweep=sweep,
                        )
                    )
                else:
                    deltas: list[float] = []
                    for qx, qy in qpts:
                        deltas.extend((float(qx - cur[0]), float(qy - cur[1])))
                    out.append(PathCommand(cmd.letter.lower(), tuple(deltas)))
                cur = end
                if cmd.letter == "M":
                    start = end
        if not out:
            return None
        kept_commands += len(out)
        el.path_data = tuple(out)
        return el

    root.children = [c for c in (requantize(ch) for ch in root.children) if c]
    if kept_commands == 0:
        raise UnstableSample("no drawable geometry survived quantization")
    return SvgDocument(doc.viewbox, root)


# ---- driver ----


def preprocess(text: str, config: PreprocessConfig | None = None) -> SvgDocument:
    """Run the full pipeline on raw SVG markup."""
    config = config or PreprocessConfig()
    doc = parse_svg(text)
    doc = clean_document(doc, config)
    doc = expand_use(doc)
    doc = bake_transforms(doc)
    doc = normalize_viewbox(doc, config)
    doc = quantize_and_relativize(doc, config)
    return doc
