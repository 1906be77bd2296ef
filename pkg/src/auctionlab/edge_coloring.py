"""Proper edge coloring of simple graphs with at most Delta + 1 colors.

Implements the constructive fan-recoloring procedure (Misra and Gries
variant): color edges one at a time; when no color is free at both
endpoints, build a maximal fan at one endpoint, invert one alternating
two-color path, rotate a fan prefix, and finish the edge.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class EdgeColoring:
    edges: tuple[tuple[int, int], ...]
    colors: tuple[int, ...]
    num_colors: int
    max_degree: int

    def is_proper(self) -> bool:
        seen: dict[tuple[int, int], bool] = {}
        for (u, v), c in zip(self.edges, self.colors):
            for x in (u, v):
                if (x, c) in seen:
                    return False
                seen[(x, c)] = True
        return True


def vizing_color(edges: list[tuple[int, int]]) -> EdgeColoring:
    """Properly color the edges of a simple graph with <= Delta + 1 colors."""
    norm: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for u, v in edges:
        if u == v:
            raise DomainError(f"self-loop at vertex {u}")
        e = (min(u, v), max(u, v))
        if e in seen:
            raise DomainError(f"multi-edge {e}")
        seen.add(e)
        norm.append(e)
    if not norm:
        return EdgeColoring((), (), 0, 0)

    degree: dict[int, int] = {}
    for u, v in norm:
        degree[u] = degree.get(u, 0) + 1
        degree[v] = degree.get(v, 0) + 1
    delta = max(degree.values())
    palette = range(delta + 1)

    # at_color[x][c] = neighbor joined to x by the c-colored edge
    at_color: dict[int, dict[int, int]] = {x: {} for x in degree}
    edge_color: dict[tuple[int, int], int] = {}

    def free_colors(x: int):
        used = at_color[x]
        return (c for c in palette if c not in used)

    def set_color(u: int, v: int, c: int | None) -> None:
        old = edge_color.get((min(u, v), max(u, v)))
        if old is not None:
            del at_color[u][old]
            del at_color[v][old]
        if c is None:
            edge_color.pop((min(u, v), max(u, v)), None)
        else:
            edge_color[(min(u, v), max(u, v))] = c
            at_color[u][c] = v
            at_color[v][c] = u

    def invert_path(start: int, first: int, second: int) -> None:
        """Swap colors along the maximal path from `start` alternating
        (first, second, first, ...)."""
        path = []
        x, want = start, first
        while want in at_color[x]:
            y = at_color[x][want]
            path.append((x, y, want))
            x, want = y, first if want == second else second
        for u, v, c in path:
            set_color(u, v, None)
        for u, v, c in path:
            set_color(u, v, second if c == first else first)

    for u, v in norm:
        # maximal fan of u starting at v: each added edge's color is free
        # at the previous fan vertex
        fan = [v]
        in_fan = {v}
        while True:
            ext = None
            for c in free_colors(fan[-1]):
                w = at_color[u].get(c)
                if w is not None and w not in in_fan:
                    ext = w
                    break
            if ext is None:
                break
            fan.append(ext)
            in_fan.add(ext)

        c = next(free_colors(u))
        d = next(free_colors(fan[-1]))
        if d != c and d in at_color[u]:
            # make d free at u: u holds no c-edge, so the alternating
            # (d, c) path from u ends elsewhere and inverting frees d here
            invert_path(u, d, c)

        # shortest fan prefix that stays a fan and ends where d is free
        j = None
        for idx, w in enumerate(fan):
            if idx > 0:
                col = edge_color[(min(u, fan[idx]), max(u, fan[idx]))]
                if col in at_color[fan[idx - 1]]:
                    break  # prefix beyond idx-1 is no longer a fan
            if d not in at_color[w]:
                j = idx
                break
        if j is None:
            raise AssertionError("fan rotation target missing; coloring bug")

        # rotate: shift colors down the prefix, then finish with d
        for i in range(j):
            nxt = edge_color[(min(u, fan[i + 1]), max(u, fan[i + 1]))]
            set_color(u, fan[i + 1], None)
            set_color(u, fan[i], nxt)
        set_color(u, fan[j], d)

    colors = tuple(edge_color[e] for e in norm)
    return EdgeColoring(tuple(norm), colors, len(set(colors)), delta)
