"""Brute-force reference implementations used as test oracles.

Plain Python loops, no numpy, no imports from dlakit internals.
"""

import math


def point_in_polygon(x, y, pts):
    """Even-odd ray casting towards +x."""
    inside = False
    n = len(pts)
    for k in range(n):
        xi, yi = pts[k]
        xj, yj = pts[(k + 1) % n]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
    return inside


def raster_oracle(pts, width, height):
    """Row-major list of lists of bools by testing every pixel centre."""
    return [[point_in_polygon(i + 0.5, j + 0.5, pts) for i in range(width)] for j in range(height)]


def box_iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    inter = max(0.0, iw) * max(0.0, ih)
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def nms_oracle(boxes, scores, classes, thr, cap):
    """Visit boxes by (-score, input index); keep a box iff no kept box of its
    class overlaps it by more than ``thr``."""
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept = []
    for i in order:
        if all(classes[i] != classes[k] or box_iou(boxes[i], boxes[k]) <= thr for k in kept):
            kept.append(i)
    return kept[:cap]


def scalar_ious(counts):
    """Per-class IoU with scalar loops; zero denominators give 0."""
    k = len(counts)
    out = []
    for i in range(k):
        tau_i = sum(counts[i][j] for j in range(k))
        col = sum(counts[j][i] for j in range(k))
        denom = tau_i + col - counts[i][i]
        out.append(counts[i][i] / denom if denom else 0.0)
    return out


def scalar_miou(counts):
    ious = scalar_ious(counts)
    return math.fsum(ious) / len(ious)


def scalar_fwiou(counts):
    k = len(counts)
    ious = scalar_ious(counts)
    taus = [sum(counts[i]) for i in range(k)]
    return math.fsum(t * u for t, u in zip(taus, ious)) / sum(taus)


def convex_hull(points):
    """Andrew's monotone chain, counter-clockwise, no collinear points."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def paint_oracle(objects, width, height):
    """Per pixel: label of the containing object with the highest (score, smallest id).

    ``objects`` are ``(id, score, label_index, polygon_points)`` tuples.
    """
    out = []
    for j in range(height):
        row = []
        for i in range(width):
            best = None
            for ident, score, label, pts in objects:
                if point_in_polygon(i + 0.5, j + 0.5, pts):
                    key = (score, [-ord(c) for c in ident] + [1])
                    if best is None or key > best[0]:
                        best = (key, label)
            row.append(0 if best is None else best[1])
        out.append(row)
    return out


def confusion_oracle(gt_rows, hyp_rows, k):
    counts = [[0] * k for _ in range(k)]
    for grow, hrow in zip(gt_rows, hyp_rows):
        for g, h in zip(grow, hrow):
            counts[g][h] += 1
    return counts


def point_segment_distance(p, a, b):
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    len2 = dx * dx + dy * dy
    t = 0.0 if len2 == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / len2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))
