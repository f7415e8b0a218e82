"""Layout domain types and PAGE-XML reading/writing.

Coordinates follow image conventions: x grows to the right, y grows down,
the page covers ``[0, width] x [0, height]``.
"""

from __future__ import annotations

import logging
import math
import re
import xml.etree.ElementTree as ET
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .errors import MalformedXml, UnsupportedSchema

log = logging.getLogger(__name__)

PAGE_NS = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15"
PAGE_NS_PREFIX = "http://schema.primaresearch.org/PAGE/gts/pagecontent/"

# values allowed in the 2013 TextRegion/@type enumeration
TEXT_REGION_TYPES = frozenset({
    "paragraph", "heading", "caption", "header", "footer", "page-number",
    "drop-capital", "credit", "floating", "signature-mark", "catch-word",
    "marginalia", "footnote", "footnote-continued", "endnote", "TOC-entry",
    "list-label", "other",
})

ORPHAN_KEY = "orphan-lines"
UNKNOWN_LABEL = "unknown"

Point = tuple[float, float]


def _as_points(points: Iterable[Sequence[float]]) -> tuple[Point, ...]:
    return tuple((float(p[0]), float(p[1])) for p in points)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class Polygon:
    """Closed polygon; the last vertex connects back to the first."""

    points: tuple[Point, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))

    def __len__(self):
        return len(self.points)

    @property
    def signed_area(self) -> float:
        pts = self.points
        s = 0.0
        for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
            s += x0 * y1 - x1 * y0
        return s / 2.0

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    def is_valid(self) -> bool:
        return len(self.points) >= 3 and self.area > 0

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return min(xs), min(ys), max(xs), max(ys)

    def clamped(self, width: float, height: float) -> "Polygon":
        return Polygon(_clamp_points(self.points, width, height))

    def rounded(self) -> "Polygon":
        return Polygon(_round_points(self.points))


@dataclass(frozen=True)
class Baseline:
    """Piece-wise linear curve a text line sits on."""

    points: tuple[Point, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))

    def __len__(self):
        return len(self.points)

    @property
    def length(self) -> float:
        return sum(math.dist(a, b) for a, b in zip(self.points, self.points[1:]))

    def is_valid(self) -> bool:
        return len(self.points) >= 2 and self.length > 0

    @property
    def mean_y(self) -> float:
        return sum(p[1] for p in self.points) / len(self.points)


@dataclass(frozen=True)
class TextLine:
    id: str
    polygon: Polygon
    baseline: Optional[Baseline] = None
    score: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"line {self.id}: score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class Region:
    id: str
    class_label: str
    polygon: Polygon
    lines: tuple[TextLine, ...] = ()
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"region {self.id}: score {self.score} outside [0, 1]")
        if len(self.polygon) < 3:
            raise ValueError(f"region {self.id}: polygon needs at least 3 vertices")


@dataclass(frozen=True)
class Page:
    """One document image: its regions, the lines inside them and orphan lines.

    ``warnings`` collects non-fatal problems found while parsing; it does not
    take part in equality.
    """

    image_filename: str
    width: int
    height: int
    regions: tuple[Region, ...] = ()
    orphan_lines: tuple[TextLine, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "orphan_lines", tuple(self.orphan_lines))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"page size must be positive, got {self.width}x{self.height}")
        region_ids = [r.id for r in self.regions]
        if len(set(region_ids)) != len(region_ids):
            raise ValueError("duplicate region ids")
        line_ids = [ln.id for ln in self.lines()]
        if len(set(line_ids)) != len(line_ids):
            raise ValueError("a text line appears more than once")

    def lines(self) -> list[TextLine]:
        """All text lines, region lines first (in region order) then orphans."""
        out = [ln for r in self.regions for ln in r.lines]
        out.extend(self.orphan_lines)
        return out

    def baselines(self) -> list[Baseline]:
        return [ln.baseline for ln in self.lines() if ln.baseline is not None]

    @property
    def page_id(self) -> str:
        return Path(self.image_filename).stem


def _clamp_points(points, width, height):
    return tuple((min(max(x, 0.0), float(width)), min(max(y, 0.0), float(height)))
                 for x, y in points)


def _round_points(points):
    return tuple((float(_round_half_up(x)), float(_round_half_up(y))) for x, y in points)


# ---------------------------------------------------------------- parsing

_CUSTOM_RE = re.compile(r"([^\s{}]+)\s*\{([^}]*)\}")


def parse_custom(custom: str) -> dict[str, dict[str, str]]:
    """Parse a PAGE ``custom`` attribute, e.g. ``structure {type:par;}``."""
    out: dict[str, dict[str, str]] = {}
    for key, body in _CUSTOM_RE.findall(custom or ""):
        fields = {}
        for item in body.split(";"):
            if ":" in item:
                k, v = item.split(":", 1)
                fields[k.strip()] = v.strip()
        out[key] = fields
    return out


def parse_points(text: str) -> tuple[Point, ...]:
    pts = []
    for tok in text.split():
        xs, _, ys = tok.partition(",")
        pts.append((float(xs), float(ys)))
    return tuple(pts)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _child(elem, name):
    for c in elem:
        if _local(c.tag) == name:
            return c
    return None


def _read_points(elem) -> Optional[tuple[Point, ...]]:
    """Point list of a Coords/Baseline element (attribute or legacy Point children)."""
    if elem is None:
        return None
    if "points" in elem.attrib:
        return parse_points(elem.attrib["points"])
    pts = [(float(p.attrib["x"]), float(p.attrib["y"])) for p in elem if _local(p.tag) == "Point"]
    return tuple(pts)


def _score(elem, custom) -> float:
    coords = _child(elem, "Coords")
    if coords is not None and "conf" in coords.attrib:
        return float(coords.attrib["conf"])
    if "score" in custom and "value" in custom["score"]:
        return float(custom["score"]["value"])
    return 1.0


def region_label(elem) -> str:
    """Class label resolution: ``type`` attribute, then ``custom`` structure type."""
    if elem.attrib.get("type"):
        return elem.attrib["type"]
    structure = parse_custom(elem.attrib.get("custom", "")).get("structure", {})
    return structure.get("type") or UNKNOWN_LABEL


class _PageReader:
    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.warnings: list[str] = []
        self.seen_ids: set[str] = set()

    def warn(self, msg):
        log.warning(msg)
        self.warnings.append(msg)

    def unique_id(self, ident, kind):
        if not ident:
            ident = f"{kind}_{len(self.seen_ids)}"
        base, n = ident, 1
        while ident in self.seen_ids:
            ident = f"{base}_{n}"
            n += 1
        if ident != base:
            self.warn(f"duplicate id {base!r} renamed to {ident!r}")
        self.seen_ids.add(ident)
        return ident

    def check_bounds(self, ident, points):
        for x, y in points:
            if not (0 <= x <= self.width and 0 <= y <= self.height):
                self.warn(f"{ident}: coordinates outside the image")
                return

    def line(self, elem) -> Optional[TextLine]:
        ident = elem.attrib.get("id", "")
        custom = parse_custom(elem.attrib.get("custom", ""))
        try:
            coords = _read_points(_child(elem, "Coords"))
            base_pts = _read_points(_child(elem, "Baseline"))
        except (ValueError, KeyError):
            self.warn(f"MissingCoords: line {ident!r} has unreadable points, skipped")
            return None
        baseline = None
        if base_pts is None:
            self.warn(f"line {ident!r} has no Baseline")
        elif not Baseline(base_pts).is_valid():
            self.warn(f"line {ident!r} has a degenerate Baseline")
        else:
            baseline = Baseline(base_pts)
        if coords is None or len(coords) < 3:
            if baseline is None:
                self.warn(f"MissingCoords: line {ident!r} has no usable Coords, skipped")
                return None
            from .baselines import baseline_to_polygon

            self.warn(f"line {ident!r} has no Coords; polygon generated from its baseline")
            polygon = baseline_to_polygon(baseline)
        else:
            polygon = Polygon(coords)
        ident = self.unique_id(ident, "line")
        self.check_bounds(ident, polygon.points)
        return TextLine(ident, polygon, baseline, _score(elem, custom))

    def regions(self, elem, regions, orphans):
        for child in elem:
            name = _local(child.tag)
            if not name.endswith("Region"):
                continue
            ident = child.attrib.get("id", "")
            custom = parse_custom(child.attrib.get("custom", ""))
            lines = [ln for ln in (self.line(c) for c in child if _local(c.tag) == "TextLine")
                     if ln is not None]
            if ORPHAN_KEY in custom:
                orphans.extend(lines)
                continue
            try:
                coords = _read_points(_child(child, "Coords"))
            except (ValueError, KeyError):
                coords = None
            if coords is None or len(coords) < 3:
                self.warn(f"MissingCoords: region {ident!r} has no usable Coords, skipped")
                orphans.extend(lines)
            else:
                ident = self.unique_id(ident, "region")
                self.check_bounds(ident, coords)
                regions.append(Region(ident, region_label(child), Polygon(coords), tuple(lines),
                                      _score(child, custom)))
            # nested regions (later schema revisions) are flattened
            self.regions(child, regions, orphans)


def parse_page_xml(data: Union[bytes, str]) -> Page:
    """Parse a PAGE-XML document into a :class:`Page`.

    Raises MalformedXml for unparseable input and UnsupportedSchema when the
    root element carries no namespace. Other PAGE revisions are read
    best-effort and flagged in ``Page.warnings``.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if not root.tag.startswith("{"):
        raise UnsupportedSchema("root element has no namespace; not a PAGE document")
    ns = root.tag[1:].split("}", 1)[0]
    schema_warnings = []
    if ns != PAGE_NS:
        if ns.startswith(PAGE_NS_PREFIX):
            schema_warnings.append(f"schema version {ns.rsplit('/', 1)[-1]} differs from 2013-07-15")
        else:
            schema_warnings.append(f"unrecognised namespace {ns}")
        for w in schema_warnings:
            log.warning(w)
    page_el = _child(root, "Page")
    if page_el is None:
        raise MalformedXml("no Page element")
    try:
        width = int(page_el.attrib["imageWidth"])
        height = int(page_el.attrib["imageHeight"])
    except (KeyError, ValueError) as exc:
        raise MalformedXml(f"bad image dimensions: {exc}") from exc
    reader = _PageReader(width, height)
    reader.warnings.extend(schema_warnings)
    regions: list[Region] = []
    orphans: list[TextLine] = []
    reader.regions(page_el, regions, orphans)
    for c in page_el:
        if _local(c.tag) == "TextLine":
            ln = reader.line(c)
            if ln is not None:
                orphans.append(ln)
    return Page(page_el.attrib.get("imageFilename", ""), width, height,
                tuple(regions), tuple(orphans), tuple(reader.warnings))


def read_page(path: Union[str, Path]) -> Page:
    return parse_page_xml(Path(path).read_bytes())


# ---------------------------------------------------------------- writing

def format_points(points: Iterable[Point]) -> str:
    return " ".join(f"{int(x)},{int(y)}" for x, y in points)


def _custom(structure_type=None, score=1.0, extra=None) -> str:
    parts = []
    if structure_type:
        parts.append(f"structure {{type:{structure_type};}}")
    if score != 1.0:
        parts.append(f"score {{value:{score!r};}}")
    if extra:
        parts.append(extra)
    return " ".join(parts)


def _write_line(parent, line: TextLine, width, height):
    attrs = {"id": line.id}
    custom = _custom(score=line.score)
    if custom:
        attrs["custom"] = custom
    el = ET.SubElement(parent, f"{{{PAGE_NS}}}TextLine", attrs)
    pts = _round_points(_clamp_points(line.polygon.points, width, height))
    ET.SubElement(el, f"{{{PAGE_NS}}}Coords", {"points": format_points(pts)})
    if line.baseline is not None:
        pts = _round_points(_clamp_points(line.baseline.points, width, height))
        ET.SubElement(el, f"{{{PAGE_NS}}}Baseline", {"points": format_points(pts)})


def write_page_xml(page: Page, created: str = "1970-01-01T00:00:00") -> bytes:
    """Serialize to PAGE 2013-07-15 XML.

    Coordinates are clamped to the image and rounded to the nearest integer.
    Orphan lines go into a full-page container region marked
    ``custom="orphan-lines {}"`` which the parser maps back to orphans.
    """
    q = lambda name: f"{{{PAGE_NS}}}{name}"  # noqa: E731
    ET.register_namespace("", PAGE_NS)
    root = ET.Element(q("PcGts"))
    meta = ET.SubElement(root, q("Metadata"))
    ET.SubElement(meta, q("Creator")).text = "dlakit"
    ET.SubElement(meta, q("Created")).text = created
    ET.SubElement(meta, q("LastChange")).text = created
    page_el = ET.SubElement(root, q("Page"), {
        "imageFilename": page.image_filename,
        "imageWidth": str(page.width),
        "imageHeight": str(page.height),
    })
    w, h = page.width, page.height
    for region in page.regions:
        attrs = {"id": region.id}
        if region.class_label in TEXT_REGION_TYPES:
            attrs["type"] = region.class_label
            custom = _custom(score=region.score)
        elif region.class_label == UNKNOWN_LABEL:
            custom = _custom(score=region.score)
        else:
            custom = _custom(region.class_label, region.score)
        if custom:
            attrs["custom"] = custom
        el = ET.SubElement(page_el, q("TextRegion"), attrs)
        pts = _round_points(_clamp_points(region.polygon.points, w, h))
        ET.SubElement(el, q("Coords"), {"points": format_points(pts)})
        for line in region.lines:
            _write_line(el, line, w, h)
    if page.orphan_lines:
        ids = {r.id for r in page.regions} | {ln.id for ln in page.lines()}
        ident, n = ORPHAN_KEY, 1
        while ident in ids:
            ident = f"{ORPHAN_KEY}_{n}"
            n += 1
        el = ET.SubElement(page_el, q("TextRegion"), {"id": ident, "custom": f"{ORPHAN_KEY} {{}}"})
        ET.SubElement(el, q("Coords"), {"points": format_points([(0, 0), (w, 0), (w, h), (0, h)])})
        for line in page.orphan_lines:
            _write_line(el, line, w, h)
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def write_page(page: Page, path: Union[str, Path]) -> None:
    Path(path).write_bytes(write_page_xml(page))


def normalized_for_write(page: Page) -> Page:
    """The page as it reads back after a write: clamped, integer coordinates."""
    w, h = page.width, page.height

    def fix_line(ln: TextLine) -> TextLine:
        bl = ln.baseline
        if bl is not None:
            bl = Baseline(_round_points(_clamp_points(bl.points, w, h)))
            bl = bl if bl.is_valid() else None  # the reader drops degenerate baselines
        return replace(ln, polygon=Polygon(_round_points(_clamp_points(ln.polygon.points, w, h))),
                       baseline=bl)

    regions = tuple(replace(r, polygon=Polygon(_round_points(_clamp_points(r.polygon.points, w, h))),
                            lines=tuple(fix_line(ln) for ln in r.lines)) for r in page.regions)
    return replace(page, regions=regions, orphan_lines=tuple(fix_line(ln) for ln in page.orphan_lines))


# ---------------------------------------------------------------- statistics

def corpus_stats(pages: Iterable[Page]) -> dict[str, tuple[int, int]]:
    """Per class label: (number of regions, number of lines inside them).

    Labels appear in order of first occurrence.
    """
    stats: dict[str, tuple[int, int]] = {}
    for page in pages:
        for r in page.regions:
            n_reg, n_lines = stats.get(r.class_label, (0, 0))
            stats[r.class_label] = (n_reg + 1, n_lines + len(r.lines))
    return stats


def merge_stats(*tables: dict[str, tuple[int, int]]) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    for table in tables:
        for label, (nr, nl) in table.items():
            a, b = out.get(label, (0, 0))
            out[label] = (a + nr, b + nl)
    return out


def max_objects_per_page(pages: Iterable[Page]) -> int:
    """Largest number of detectable objects (regions plus text lines) on one page."""
    return max((len(p.regions) + len(p.lines()) for p in pages), default=0)
