"""Ear-clipping triangulation for polygons with holes.

Linked-list ear clipping in the style of the widely used earcut algorithm:
holes are joined to the outer ring with bridge edges, then ears are clipped
with local self-intersection cures and a split fallback. No z-order indexing;
intended for the ring sizes produced by layer masks and footprints.
"""

from __future__ import annotations

import math


class _Node:
    __slots__ = ("i", "x", "y", "prev", "next", "steiner")

    def __init__(self, i: int, x: float, y: float):
        self.i = i
        self.x = x
        self.y = y
        self.prev = None
        self.next = None
        self.steiner = False


def triangulate(rings: list) -> list[tuple[int, int, int]]:
    """Triangulate one polygon given as [outer, hole, hole, ...] rings.

    Rings are sequences of (x, y); outer must be CCW (positive shoelace),
    holes CW. Returns index triples into the concatenated vertex list.
    """
    if not rings or len(rings[0]) < 3:
        return []
    offsets = []
    total = 0
    for ring in rings:
        offsets.append(total)
        total += len(ring)

    outer = _linked_list(rings[0], offsets[0], ccw=True)
    triangles: list[tuple[int, int, int]] = []
    if outer is None or outer.next is outer.prev:
        return triangles
    if len(rings) > 1:
        outer = _eliminate_holes(rings[1:], offsets[1:], outer)
    _earcut_linked(outer, triangles)
    return triangles


def _linked_list(ring, offset: int, ccw: bool) -> _Node | None:
    area = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i][0], ring[i][1]
        x2, y2 = ring[(i + 1) % n][0], ring[(i + 1) % n][1]
        area += x1 * y2 - x2 * y1
    last = None
    indices = range(n) if (area > 0) == ccw else range(n - 1, -1, -1)
    for i in indices:
        last = _insert_node(offset + i, float(ring[i][0]), float(ring[i][1]), last)
    if last is not None and _equals(last, last.next):
        _remove_node(last)
        last = last.next
    return last


def _insert_node(i: int, x: float, y: float, last: _Node | None) -> _Node:
    node = _Node(i, x, y)
    if last is None:
        node.prev = node
        node.next = node
    else:
        node.next = last.next
        node.prev = last
        last.next.prev = node
        last.next = node
    return node


def _remove_node(node: _Node):
    node.next.prev = node.prev
    node.prev.next = node.next


def _filter_points(start: _Node | None, end: _Node | None = None) -> _Node | None:
    if start is None:
        return None
    if end is None:
        end = start
    p = start
    while True:
        again = False
        if not p.steiner and (_equals(p, p.next) or _area(p.prev, p, p.next) == 0):
            _remove_node(p)
            p = end = p.prev
            if p is p.next:
                break
            again = True
        else:
            p = p.next
        if not again and p is end:
            break
    return end


def _earcut_linked(ear: _Node | None, triangles: list, pass_num: int = 0):
    if ear is None:
        return
    stop = ear
    while ear.prev is not ear.next:
        prev = ear.prev
        nxt = ear.next
        if _is_ear(ear):
            triangles.append((prev.i, ear.i, nxt.i))
            _remove_node(ear)
            ear = nxt.next
            stop = nxt.next
            continue
        ear = nxt
        if ear is stop:
            if pass_num == 0:
                _earcut_linked(_filter_points(ear), triangles, 1)
            elif pass_num == 1:
                ear = _cure_local_intersections(_filter_points(ear), triangles)
                _earcut_linked(ear, triangles, 2)
            elif pass_num == 2:
                _split_earcut(ear, triangles)
            break


def _is_ear(ear: _Node) -> bool:
    a, b, c = ear.prev, ear, ear.next
    if _area(a, b, c) >= 0:
        return False  # reflex or degenerate
    p = ear.next.next
    while p is not ear.prev:
        if (
            _point_in_triangle(a.x, a.y, b.x, b.y, c.x, c.y, p.x, p.y)
            and _area(p.prev, p, p.next) >= 0
        ):
            return False
        p = p.next
    return True


def _cure_local_intersections(start: _Node | None, triangles: list) -> _Node | None:
    if start is None:
        return None
    p = start
    while True:
        a, b = p.prev, p.next.next
        if (
            not _equals(a, b)
            and _intersects(a, p, p.next, b)
            and _locally_inside(a, b)
            and _locally_inside(b, a)
        ):
            triangles.append((a.i, p.i, b.i))
            _remove_node(p)
            _remove_node(p.next)
            p = start = b
        p = p.next
        if p is start:
            break
    return _filter_points(p)


def _split_earcut(start: _Node, triangles: list):
    a = start
    while True:
        b = a.next.next
        while b is not a.prev:
            if a.i != b.i and _is_valid_diagonal(a, b):
                c = _split_polygon(a, b)
                a = _filter_points(a, a.next)
                c = _filter_points(c, c.next)
                _earcut_linked(a, triangles)
                _earcut_linked(c, triangles)
                return
            b = b.next
        a = a.next
        if a is start:
            break


def _eliminate_holes(holes, offsets, outer: _Node) -> _Node:
    queue = []
    for ring, offset in zip(holes, offsets):
        lst = _linked_list(ring, offset, ccw=False)
        if lst is None:
            continue
        if lst is lst.next:
            lst.steiner = True
        queue.append(_get_leftmost(lst))
    queue.sort(key=lambda n: (n.x, n.y))
    for hole in queue:
        outer = _eliminate_hole(hole, outer)
    return outer


def _eliminate_hole(hole: _Node, outer: _Node) -> _Node:
    bridge = _find_hole_bridge(hole, outer)
    if bridge is None:
        return outer
    bridge_reverse = _split_polygon(bridge, hole)
    _filter_points(bridge_reverse, bridge_reverse.next)
    return _filter_points(bridge, bridge.next)


def _find_hole_bridge(hole: _Node, outer: _Node) -> _Node | None:
    # David Eberly's rightward ray cast from the hole's leftmost point
    p = outer
    hx, hy = hole.x, hole.y
    qx = -math.inf
    m = None
    while True:
        if p.y >= hy >= p.next.y and p.next.y != p.y:
            x = p.x + (hy - p.y) * (p.next.x - p.x) / (p.next.y - p.y)
            if hx >= x > qx:
                qx = x
                m = p if p.x < p.next.x else p.next
                if x == hx:
                    return m  # hole touches outline
        p = p.next
        if p is outer:
            break
    if m is None:
        return None

    stop = m
    mx, my = m.x, m.y
    tan_min = math.inf
    p = m
    while True:
        if (
            hx >= p.x >= mx
            and hx != p.x
            and _point_in_triangle(
                hx if hy < my else qx, hy, mx, my, qx if hy < my else hx, hy, p.x, p.y
            )
        ):
            tan = abs(hy - p.y) / (hx - p.x)
            if _locally_inside(p, hole) and (
                tan < tan_min
                or (tan == tan_min and (p.x > m.x or _sector_contains_sector(m, p)))
            ):
                m = p
                tan_min = tan
        p = p.next
        if p is stop:
            break
    return m


def _sector_contains_sector(m: _Node, p: _Node) -> bool:
    return _area(m.prev, m, p.prev) < 0 and _area(p.next, m, m.next) < 0


def _get_leftmost(start: _Node) -> _Node:
    p = start
    leftmost = start
    while True:
        if p.x < leftmost.x or (p.x == leftmost.x and p.y < leftmost.y):
            leftmost = p
        p = p.next
        if p is start:
            break
    return leftmost


def _is_valid_diagonal(a: _Node, b: _Node) -> bool:
    return (
        a.next.i != b.i
        and a.prev.i != b.i
        and not _intersects_polygon(a, b)
        and (
            _locally_inside(a, b)
            and _locally_inside(b, a)
            and _middle_inside(a, b)
            and (_area(a.prev, a, b.prev) or _area(a, b.prev, b))
            or _equals(a, b)
            and _area(a.prev, a, a.next) > 0
            and _area(b.prev, b, b.next) > 0
        )
    )


def _intersects_polygon(a: _Node, b: _Node) -> bool:
    p = a
    while True:
        if (
            p.i != a.i
            and p.next.i != a.i
            and p.i != b.i
            and p.next.i != b.i
            and _intersects(p, p.next, a, b)
        ):
            return True
        p = p.next
        if p is a:
            break
    return False


def _intersects(p1, q1, p2, q2) -> bool:
    o1 = _sign(_area(p1, q1, p2))
    o2 = _sign(_area(p1, q1, q2))
    o3 = _sign(_area(p2, q2, p1))
    o4 = _sign(_area(p2, q2, q1))
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, q2, q1):
        return True
    if o3 == 0 and _on_segment(p2, p1, q2):
        return True
    if o4 == 0 and _on_segment(p2, q1, q2):
        return True
    return False


def _on_segment(p, q, r) -> bool:
    return max(p.x, r.x) >= q.x >= min(p.x, r.x) and max(p.y, r.y) >= q.y >= min(p.y, r.y)


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def _locally_inside(a: _Node, b: _Node) -> bool:
    if _area(a.prev, a, a.next) < 0:
        return _area(a, b, a.next) >= 0 and _area(a, a.prev, b) >= 0
    return _area(a, b, a.prev) < 0 or _area(a, a.next, b) < 0


def _middle_inside(a: _Node, b: _Node) -> bool:
    p = a
    inside = False
    px = (a.x + b.x) / 2
    py = (a.y + b.y) / 2
    while True:
        if ((p.y > py) != (p.next.y > py)) and p.next.y != p.y and (
            px < (p.next.x - p.x) * (py - p.y) / (p.next.y - p.y) + p.x
        ):
            inside = not inside
        p = p.next
        if p is a:
            break
    return inside


def _split_polygon(a: _Node, b: _Node) -> _Node:
    a2 = _Node(a.i, a.x, a.y)
    b2 = _Node(b.i, b.x, b.y)
    an = a.next
    bp = b.prev
    a.next = b
    b.prev = a
    a2.next = an
    an.prev = a2
    b2.next = a2
    a2.prev = b2
    bp.next = b2
    b2.prev = bp
    return b2


def _equals(p1, p2) -> bool:
    return p1.x == p2.x and p1.y == p2.y


def _area(p, q, r) -> float:
    # negative for a CCW corner in a positive-shoelace ring
    return (q.y - p.y) * (r.x - q.x) - (q.x - p.x) * (r.y - q.y)


def _point_in_triangle(ax, ay, bx, by, cx, cy, px, py) -> bool:
    return (
        (cx - px) * (ay - py) >= (ax - px) * (cy - py)
        and (ax - px) * (by - py) >= (bx - px) * (ay - py)
        and (bx - px) * (cy - py) >= (cx - px) * (by - py)
    )
