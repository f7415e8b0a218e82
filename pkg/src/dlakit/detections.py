"""Detections and their line-delimited interchange file.

File grammar (UTF-8, one record per line, fields separated by TAB)::

    # comment                      ignored, as are blank lines
    @page  PAGE_ID  WIDTH  HEIGHT  [IMAGE_FILENAME]
    PAGE_ID  CLASS_LABEL  SCORE  X0 Y0 X1 Y1  [KEY=VALUE ...]

Optional ``KEY=VALUE`` fields of a detection record:

``id=TEXT``
    detection id; defaults to ``<page_id>_d<n>`` (n counts records per page).
``poly=X,Y X,Y ...``
    polygon outline.
``rle=W H R0 R1 ...``
    binary mask, row-major run lengths alternating 0-runs and 1-runs,
    starting with a (possibly empty) 0-run.
``probs=LABEL:P,LABEL:P ...``
    full class-probability vector; SCORE and CLASS_LABEL must equal its max
    and argmax. Without it the vector is ``{CLASS_LABEL: SCORE}``.

``@page`` records give the image size needed to post-process a page; they
must precede that page's detections.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DLAError
from .geometry import BBox, BitMask, object_mask
from .page_model import Polygon, parse_points


class DetectionFormatError(DLAError):
    pass


@dataclass(frozen=True)
class Detection:
    """A hypothesized object with its class-probability vector."""

    id: str
    page_id: str
    class_probs: Mapping[str, float]
    box: BBox
    mask: Optional[BitMask] = None
    polygon: Optional[Polygon] = None

    def __post_init__(self):
        object.__setattr__(self, "class_probs", dict(self.class_probs))
        if not self.class_probs:
            raise ValueError(f"detection {self.id}: empty class probabilities")
        for p in self.class_probs.values():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"detection {self.id}: probability {p} outside [0, 1]")

    __hash__ = None

    @property
    def score(self) -> float:
        return max(self.class_probs.values())

    @property
    def class_label(self) -> str:
        # first label reaching the maximum, in vector order
        best = self.score
        return next(k for k, v in self.class_probs.items() if v == best)

    def mask_on(self, width: int, height: int) -> BitMask:
        return object_mask(self, width, height)


@dataclass
class DetectionSet:
    """Contents of one interchange file: page sizes and detections per page."""

    pages: dict[str, tuple[int, int, str]] = field(default_factory=dict)
    detections: dict[str, list[Detection]] = field(default_factory=dict)

    def page_ids(self) -> list[str]:
        return list(dict.fromkeys([*self.pages, *self.detections]))


def encode_rle(mask: BitMask) -> str:
    flat = mask.bits.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    runs = np.diff(np.concatenate(([0], change, [flat.size]))).tolist()
    if flat.size and flat[0]:
        runs.insert(0, 0)
    return " ".join(map(str, [mask.width, mask.height, *runs]))


def decode_rle(text: str) -> BitMask:
    parts = [int(t) for t in text.split()]
    if len(parts) < 2:
        raise DetectionFormatError("rle needs width and height")
    w, h, runs = parts[0], parts[1], parts[2:]
    if sum(runs) != w * h or any(r < 0 for r in runs):
        raise DetectionFormatError(f"rle runs sum to {sum(runs)}, expected {w * h}")
    flat = np.repeat(np.arange(len(runs)) % 2 == 1, runs)
    return BitMask(flat.reshape(h, w))


def _fmt(v: float) -> str:
    return repr(float(v))


def format_detection(det: Detection, with_id: bool = True) -> str:
    fields = [det.page_id, det.class_label, _fmt(det.score), " ".join(_fmt(v) for v in det.box.as_tuple())]
    if with_id:
        fields.append(f"id={det.id}")
    if det.polygon is not None:
        fields.append("poly=" + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in det.polygon.points))
    if det.mask is not None:
        fields.append("rle=" + encode_rle(det.mask))
    if len(det.class_probs) > 1:
        fields.append("probs=" + ",".join(f"{k}:{_fmt(v)}" for k, v in det.class_probs.items()))
    return "\t".join(fields)


def parse_detection_line(line: str, default_id: str) -> Detection:
    fields = line.rstrip("\n").split("\t")
    if len(fields) < 4:
        raise DetectionFormatError(f"expected at least 4 fields, got {len(fields)}")
    page_id, label, score_s, box_s = fields[:4]
    try:
        score = float(score_s)
        coords = [float(v) for v in box_s.split()]
        if len(coords) != 4:
            raise ValueError("box needs 4 numbers")
        box = BBox(*coords)
        ident, polygon, mask, probs = default_id, None, None, {label: score}
        for extra in fields[4:]:
            key, sep, value = extra.partition("=")
            if not sep:
                raise ValueError(f"bad optional field {extra!r}")
            if key == "id":
                ident = value
            elif key == "poly":
                polygon = Polygon(parse_points(value))
            elif key == "rle":
                mask = decode_rle(value)
            elif key == "probs":
                probs = {}
                for item in value.split(","):
                    k, _, p = item.rpartition(":")
                    probs[k] = float(p)
            else:
                raise ValueError(f"unknown field {key!r}")
        det = Detection(ident, page_id, probs, box, mask, polygon)
    except ValueError as exc:
        raise DetectionFormatError(str(exc)) from exc
    if det.class_label != label or det.score != score:
        raise DetectionFormatError(f"{ident}: label/score disagree with probs")
    return det


def read_detections(source: Union[str, Path, Iterable[str]]) -> DetectionSet:
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)
    out = DetectionSet()
    counters: dict[str, int] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            if line.startswith("@page"):
                parts = line.rstrip("\n").split("\t")
                if len(parts) not in (4, 5):
                    raise DetectionFormatError("@page needs PAGE_ID WIDTH HEIGHT [IMAGE]")
                image = parts[4] if len(parts) == 5 else parts[1]
                out.pages[parts[1]] = (int(parts[2]), int(parts[3]), image)
                continue
            page_id = line.split("\t", 1)[0]
            n = counters.get(page_id, 0)
            counters[page_id] = n + 1
            det = parse_detection_line(line, f"{page_id}_d{n}")
        except (DetectionFormatError, ValueError) as exc:
            raise DetectionFormatError(f"line {lineno}: {exc}") from exc
        out.detections.setdefault(page_id, []).append(det)
    return out


def format_detections(dset: DetectionSet) -> str:
    lines = []
    for page_id in dset.page_ids():
        if page_id in dset.pages:
            w, h, image = dset.pages[page_id]
            lines.append(f"@page\t{page_id}\t{w}\t{h}\t{image}")
        lines.extend(format_detection(d) for d in dset.detections.get(page_id, []))
    return "\n".join(lines) + "\n"


def write_detections(dset: DetectionSet, path: Union[str, Path]) -> None:
    Path(path).write_text(format_detections(dset), encoding="utf-8")
