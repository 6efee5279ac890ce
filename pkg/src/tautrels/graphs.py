"""Stable graphs for weighted pointed curves.

A :class:`StableGraph` records vertex genera, a placement of numbered legs
(marked points) on vertices, and a multiset of edges (including loops).
Marked points carry rational weights in (0, 1]; a vertex is stable when

    2 g(v) - 2 + (number of half-edges at v) + sum of leg weights at v > 0.

Graphs are compared up to isomorphism via a canonical form (minimum over
vertex relabellings), and ``automorphism_order`` counts vertex permutations
preserving genera/legs/edges, times the half-edge symmetries: a factor m!
for every group of m parallel edges and a factor 2 for every loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement, permutations
from typing import Iterable, Mapping


@dataclass(frozen=True)
class WeightData:
    """Marked-point weights: marking i (1-based) has weight weights[i]."""

    weights: tuple

    @classmethod
    def of(cls, values: Iterable) -> "WeightData":
        ws = tuple(Fraction(v) for v in values)
        if any(not (0 < w <= 1) for w in ws):
            raise ValueError("weights must lie in (0, 1]")
        return cls(ws)

    @property
    def n(self) -> int:
        return len(self.weights)

    def weight(self, marking: int) -> Fraction:
        return self.weights[marking - 1]

    def subset_weight(self, markings: Iterable[int]) -> Fraction:
        return sum((self.weight(i) for i in markings), Fraction(0))

    def is_generic(self) -> bool:
        """No subset of two or more markings has weight exactly one."""
        from itertools import combinations

        idx = range(1, self.n + 1)
        for size in range(2, self.n + 1):
            for s in combinations(idx, size):
                if self.subset_weight(s) == 1:
                    return False
        return True

    def perturbed(self) -> "WeightData":
        """Scale non-unit weights down so all non-singleton subset sums of
        weight exactly one become strictly smaller, without any subset sum
        crossing one from below or above."""
        sums = set()
        from itertools import combinations

        idx = [i for i in range(1, self.n + 1)]
        for size in range(1, self.n + 1):
            for s in combinations(idx, size):
                sums.add(self.subset_weight(s))
        gaps = [abs(v - 1) for v in sums if v != 1]
        margin = min(gaps, default=Fraction(1))
        eps = margin / (2 * max(sum(1 for w in self.weights if w != 1), 1) + 2)
        new = tuple(
            w if w == 1 else w * (1 - eps / max(w, Fraction(1, 2)) / self.n)
            for w in self.weights
        )
        out = WeightData(new)
        return out if out.is_generic() else out.perturbed()


@dataclass(frozen=True)
class StableGraph:
    """genera[v] is the genus of vertex v; legs[k] = vertex of marking k+1;
    edges is a sorted tuple of vertex pairs (v <= w), loops included."""

    genera: tuple
    legs: tuple
    edges: tuple

    @property
    def n_vertices(self) -> int:
        return len(self.genera)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def genus(self) -> int:
        h1 = self.n_edges - self.n_vertices + 1
        return sum(self.genera) + h1

    def legs_at(self, v: int) -> list:
        return [k + 1 for k, w in enumerate(self.legs) if w == v]

    def half_edges_at(self, v: int) -> list:
        """Half-edge ids (edge_index, side) incident to v."""
        out = []
        for idx, (a, b) in enumerate(self.edges):
            if a == v:
                out.append((idx, 0))
            if b == v:
                out.append((idx, 1))
        return out

    def valence(self, v: int) -> int:
        return len(self.half_edges_at(v)) + len(self.legs_at(v))

    def is_connected(self) -> bool:
        if self.n_vertices == 0:
            return False
        seen = {0}
        frontier = [0]
        adj: dict = {v: set() for v in range(self.n_vertices)}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        while frontier:
            v = frontier.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
        return len(seen) == self.n_vertices

    def validate(self, weights: WeightData, genus: int | None = None) -> None:
        """Raise ValueError on any structural or stability defect."""
        if len(self.legs) != weights.n:
            raise ValueError("leg count does not match weight data")
        if any(not (0 <= v < self.n_vertices) for v in self.legs):
            raise ValueError("leg placed on a missing vertex")
        if any(
            not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices and a <= b)
            for a, b in self.edges
        ):
            raise ValueError("malformed edge")
        if tuple(sorted(self.edges)) != self.edges:
            raise ValueError("edges must be sorted")
        if any(g < 0 for g in self.genera):
            raise ValueError("negative genus")
        if not self.is_connected():
            raise ValueError("graph is not connected")
        if genus is not None and self.genus != genus:
            raise ValueError(f"total genus {self.genus} != {genus}")
        for v in range(self.n_vertices):
            nh = len(self.half_edges_at(v))
            wsum = weights.subset_weight(self.legs_at(v))
            if 2 * self.genera[v] - 2 + nh + wsum <= 0:
                raise ValueError(f"vertex {v} unstable")

    def relabelled(self, perm: tuple) -> "StableGraph":
        """Apply vertex relabelling v -> perm[v]."""
        genera = [0] * self.n_vertices
        for v, g in enumerate(self.genera):
            genera[perm[v]] = g
        legs = tuple(perm[v] for v in self.legs)
        edges = tuple(
            sorted(tuple(sorted((perm[a], perm[b]))) for a, b in self.edges)
        )
        return StableGraph(tuple(genera), legs, edges)

    def canonical(self) -> "StableGraph":
        best = None
        for perm in permutations(range(self.n_vertices)):
            cand = self.relabelled(perm)
            key = (cand.genera, cand.legs, cand.edges)
            if best is None or key < best_key:
                best, best_key = cand, key
        return best

    def automorphism_order(self) -> int:
        """|Aut|: vertex symmetries times half-edge symmetries."""
        from math import factorial

        key = (self.genera, self.legs, self.edges)
        vertex_syms = 0
        for perm in permutations(range(self.n_vertices)):
            if (
                self.relabelled(perm).genera,
                self.relabelled(perm).legs,
                self.relabelled(perm).edges,
            ) == key:
                vertex_syms += 1
        half_edge = 1
        from collections import Counter

        mult = Counter(self.edges)
        for (a, b), m in mult.items():
            half_edge *= factorial(m)
            if a == b:
                half_edge *= 2 ** m
        return vertex_syms * half_edge

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.genera),
            "legs": [[k + 1, v] for k, v in enumerate(self.legs)],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StableGraph":
        genera = tuple(d["vertices"])
        legs_map = {m: v for m, v in d["legs"]}
        legs = tuple(legs_map[k] for k in sorted(legs_map))
        edges = tuple(sorted(tuple(sorted(e)) for e in d["edges"]))
        return cls(genera, legs, edges)


def smooth_graph(genus: int, n_markings: int) -> StableGraph:
    return StableGraph((genus,), tuple(0 for _ in range(n_markings)), ())


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def enumerate_graphs(
    genus: int, weights: WeightData, max_edges: int
) -> list:
    """All isomorphism classes of stable graphs of the given total genus with
    at most ``max_edges`` edges, legs weighted by ``weights``."""
    n = weights.n
    found = {}
    for n_edges in range(max_edges + 1):
        for n_vertices in range(1, n_edges + 2):
            h1 = n_edges - n_vertices + 1
            if h1 < 0 or genus - h1 < 0:
                continue
            pairs = [
                (a, b)
                for a in range(n_vertices)
                for b in range(a, n_vertices)
            ]
            for edge_choice in combinations_with_replacement(pairs, n_edges):
                edges = tuple(sorted(edge_choice))
                for genera in _compositions(genus - h1, n_vertices):
                    for legs in _leg_placements(n, n_vertices):
                        g = StableGraph(tuple(genera), legs, edges)
                        if not g.is_connected():
                            continue
                        try:
                            g.validate(weights, genus)
                        except ValueError:
                            continue
                        cg = g.canonical()
                        found[(cg.genera, cg.legs, cg.edges)] = cg
    return sorted(
        found.values(), key=lambda g: (g.n_edges, g.genera, g.legs, g.edges)
    )


def _leg_placements(n: int, n_vertices: int):
    from itertools import product

    return product(range(n_vertices), repeat=n)


def enumerate_colorings(graph: StableGraph) -> list:
    """All maps from vertices to {1, -1}."""
    from itertools import product

    return [tuple(c) for c in product((1, -1), repeat=graph.n_vertices)]
