"""Decorated stable-graph classes in normal form.

A term is a stable graph together with a decoration at every vertex:

* a kappa monomial, stored as a sorted tuple of indices ``j >= 1`` (kappa_0
  is evaluated eagerly to the scalar ``2 g(v) - 2`` and kappa_{-1} is zero);
* a product of generators ``D_{S, a}`` over disjoint blocks ``S`` of
  markings, plus psi powers at half-edges (stored as singleton blocks).

The stored ``D_{S, a}`` is the signed normal-form generator: for a
singleton it is ``psi_i^a``, and for ``|S| >= 2`` it equals
``(-1)^{|S|-1} [D_S] psi_i^{a-|S|+1}`` where ``[D_S]`` is the class of the
locus where the markings of ``S`` collide.  With this normalisation the
multiplication rule is simply ``D_{S,a} D_{T,b} = D_{S u T, a+b}`` whenever
``S`` and ``T`` intersect, which makes the normal form confluent.  A block
of two or more markings is zero whenever the weights of its markings sum to
more than one.

A ``TautClass`` value is a finite rational linear combination of such
terms; a term with graph ``G`` and decoration monomial ``M`` stands for the
push-forward of ``M`` along the gluing map of ``G`` (no automorphism
factors are folded in; formulas that need ``1/|Aut|`` carry it in the
coefficient).
"""

from __future__ import annotations

import itertools
import json
from fractions import Fraction

from .graphs import StableGraph, WeightData

__all__ = [
    "TautClass",
    "normal_form",
    "canonical_term",
    "multiply_generator",
    "multiply_smooth",
    "pushforward_forget_small",
    "pushforward_forget_weight1",
    "weight_reduce",
    "chern_neg_Bd",
    "divisor_product",
    "divisor_exp_check",
    "to_vector",
    "matrix_rank",
]


# ---------------------------------------------------------------------------
# Vertex decorations
# ---------------------------------------------------------------------------
#
# A point is ("m", i) for marking i (1-based) or ("h", e, s) for side s of
# edge e.  A block is (points, a) with points a sorted tuple of points.  A
# vertex decoration is (kappa, blocks); a full decoration is a tuple of
# vertex decorations indexed by vertex.


def _merge_block(blocks: list, points: tuple, a: int) -> None:
    """Merge the generator D_{points, a} into the running block list."""
    points = set(points)
    keep = []
    for other_points, b in blocks:
        if points & set(other_points):
            points |= set(other_points)
            a += b
        else:
            keep.append((other_points, b))
    keep.append((tuple(sorted(points)), a))
    blocks[:] = keep


def normal_form(
    graph: StableGraph, weights: WeightData, vertex: int, word
) -> tuple | None:
    """Reduce a raw product of generators at one vertex.

    ``word`` is a sequence of factors:

    * ``("kappa", j)`` -- a kappa class (``j = 0`` gives the scalar
      ``2 g(v) - 2``; ``j = -1`` gives zero);
    * ``("psi", i, k)`` -- the k-th power of the cotangent class at
      marking i;
    * ``("hpsi", (e, s), k)`` -- the same at a half-edge;
    * ``("diag", S)`` -- the class of the locus where the markings of S
      collide (converted to ``(-1)^{|S|-1} D_{S, |S|-1}``);
    * ``("Dsa", S, a)`` -- a stored generator.

    Returns ``(coefficient, kappa, blocks)`` or ``None`` if the product is
    zero.  The result does not depend on the order of the factors.
    """
    coeff = Fraction(1)
    kappa: list = []
    blocks: list = []
    for factor in word:
        kind = factor[0]
        if kind == "kappa":
            j = factor[1]
            if j < 0:
                return None
            if j == 0:
                coeff *= 2 * graph.genera[vertex] - 2
                if coeff == 0:
                    return None
                continue
            kappa.append(j)
        elif kind == "psi":
            _, i, k = factor
            if k:
                _merge_block(blocks, (("m", i),), k)
        elif kind == "hpsi":
            _, he, k = factor
            if k:
                _merge_block(blocks, (("h", he[0], he[1]),), k)
        elif kind == "diag":
            s = tuple(sorted(factor[1]))
            coeff *= (-1) ** (len(s) - 1)
            _merge_block(blocks, tuple(("m", i) for i in s), len(s) - 1)
        elif kind == "Dsa":
            _, s, a = factor
            _merge_block(blocks, tuple(("m", i) for i in sorted(s)), a)
        else:
            raise ValueError(f"unknown factor kind {kind!r}")
    cleaned = []
    for points, a in blocks:
        if a == 0 and len(points) == 1:
            continue
        n_half = sum(1 for p in points if p[0] == "h")
        if n_half and len(points) > 1:
            raise ValueError("half-edge psi classes cannot join a diagonal block")
        if a < len(points) - 1:
            raise ValueError("block exponent below |S| - 1")
        markings = [p[1] for p in points if p[0] == "m"]
        if len(markings) >= 2 and weights.subset_weight(markings) > 1:
            return None
        cleaned.append((points, a))
    return coeff, tuple(sorted(kappa)), tuple(sorted(cleaned))


def _decor_codim(graph: StableGraph, decor: tuple) -> int:
    total = graph.n_edges
    for kappa, blocks in decor:
        total += sum(kappa) + sum(a for _, a in blocks)
    return total


# ---------------------------------------------------------------------------
# Canonical form of a decorated term
# ---------------------------------------------------------------------------

_CANON_CACHE: dict = {}


def _map_points(points: tuple, hemap: dict) -> tuple:
    out = []
    for p in points:
        if p[0] == "h":
            e2, s2 = hemap[(p[1], p[2])]
            out.append(("h", e2, s2))
        else:
            out.append(p)
    return tuple(sorted(out))


def canonical_term(graph: StableGraph, decor: tuple) -> tuple:
    """Minimal representative of (graph, decoration) under relabelling.

    Vertex permutations, re-numberings of parallel edges and side flips of
    loops are all taken into account so that equal terms always compare
    equal.  Returns ``(genera, legs, edges, decor)``.
    """
    key = (graph.genera, graph.legs, graph.edges, decor)
    hit = _CANON_CACHE.get(key)
    if hit is not None:
        return hit
    nv = graph.n_vertices
    best = None
    for perm in itertools.permutations(range(nv)):
        genera = [0] * nv
        for v, g in enumerate(graph.genera):
            genera[perm[v]] = g
        genera = tuple(genera)
        legs = tuple(perm[v] for v in graph.legs)
        mapped = []  # (sorted new pair, old index, side-of-end0, loop?)
        for idx, (a, b) in enumerate(graph.edges):
            pa, pb = perm[a], perm[b]
            pair = (pa, pb) if pa <= pb else (pb, pa)
            mapped.append((pair, idx, pa <= pb, a == b))
        groups: dict = {}
        for pair, idx, keep, loop in mapped:
            groups.setdefault(pair, []).append((idx, keep, loop))
        new_pairs = sorted(groups)
        slot_base = {}
        pos = 0
        new_edges = []
        for pair in new_pairs:
            slot_base[pair] = pos
            for _ in groups[pair]:
                new_edges.append(pair)
                pos += 1
        new_edges = tuple(new_edges)
        # all assignments of old edges to slots within their parallel group,
        # all side flips for loops
        per_group = []
        for pair in new_pairs:
            members = groups[pair]
            opts = []
            for order in itertools.permutations(members):
                flip_axes = [m for m in order if m[2]]
                for flips in itertools.product(
                    (False, True), repeat=len(flip_axes)
                ):
                    assign = []
                    fi = 0
                    for slot_off, (idx, keep, loop) in enumerate(order):
                        if loop:
                            flip = flips[fi]
                            fi += 1
                            sides = (1, 0) if flip else (0, 1)
                        else:
                            sides = (0, 1) if keep else (1, 0)
                        assign.append(
                            (idx, slot_base[pair] + slot_off, sides)
                        )
                    opts.append(assign)
            per_group.append(opts)
        for combo in itertools.product(*per_group):
            hemap = {}
            for assign in combo:
                for idx, slot, sides in assign:
                    hemap[(idx, 0)] = (slot, sides[0])
                    hemap[(idx, 1)] = (slot, sides[1])
            new_decor = [None] * nv
            for v in range(nv):
                kappa, blocks = decor[v]
                new_blocks = tuple(
                    sorted((_map_points(pts, hemap), a) for pts, a in blocks)
                )
                new_decor[perm[v]] = (kappa, new_blocks)
            cand = (genera, legs, new_edges, tuple(new_decor))
            if best is None or cand < best:
                best = cand
    _CANON_CACHE[key] = best
    return best


# ---------------------------------------------------------------------------
# TautClass
# ---------------------------------------------------------------------------


class TautClass:
    """Finite rational combination of decorated stable-graph terms."""

    __slots__ = ("genus", "weights", "terms")

    def __init__(self, genus: int, weights: WeightData, terms: dict | None = None):
        self.genus = genus
        self.weights = weights
        self.terms = terms if terms is not None else {}

    # -- construction ------------------------------------------------------

    @classmethod
    def zero(cls, genus: int, weights: WeightData) -> "TautClass":
        return cls(genus, weights)

    @classmethod
    def one(cls, genus: int, weights: WeightData) -> "TautClass":
        c = cls(genus, weights)
        graph = StableGraph(
            (genus,), tuple(0 for _ in range(weights.n)), ()
        )
        c.add_term(graph, ((tuple(), tuple()),), Fraction(1))
        return c

    def _check_compatible(self, other: "TautClass") -> None:
        if self.genus != other.genus or self.weights != other.weights:
            raise ValueError("classes live on different moduli spaces")

    def add_term(self, graph: StableGraph, decor: tuple, coeff) -> None:
        coeff = Fraction(coeff)
        if coeff == 0:
            return
        key = canonical_term(graph, decor)
        new = self.terms.get(key, Fraction(0)) + coeff
        if new == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = new

    def add_word_term(self, graph: StableGraph, words, coeff) -> None:
        """Add ``coeff * product of raw words`` (one word per vertex)."""
        coeff = Fraction(coeff)
        decor = []
        for v in range(graph.n_vertices):
            nf = normal_form(graph, self.weights, v, words[v])
            if nf is None:
                return
            c, kappa, blocks = nf
            coeff *= c
            decor.append((kappa, blocks))
        self.add_term(graph, tuple(decor), coeff)

    # -- ring-ish operations ------------------------------------------------

    def __add__(self, other: "TautClass") -> "TautClass":
        self._check_compatible(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            new = out.get(key, Fraction(0)) + c
            if new == 0:
                out.pop(key, None)
            else:
                out[key] = new
        return TautClass(self.genus, self.weights, out)

    def __sub__(self, other: "TautClass") -> "TautClass":
        return self + other.scale(-1)

    def scale(self, factor) -> "TautClass":
        factor = Fraction(factor)
        if factor == 0:
            return TautClass(self.genus, self.weights)
        return TautClass(
            self.genus,
            self.weights,
            {k: c * factor for k, c in self.terms.items()},
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TautClass)
            and self.genus == other.genus
            and self.weights == other.weights
            and self.terms == other.terms
        )

    def __hash__(self):
        raise TypeError("TautClass is not hashable")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def codims(self) -> set:
        out = set()
        for (genera, legs, edges, decor) in self.terms:
            graph = StableGraph(genera, legs, edges)
            out.add(_decor_codim(graph, decor))
        return out

    def graded_part(self, codim: int) -> "TautClass":
        out = {}
        for key, c in self.terms.items():
            genera, legs, edges, decor = key
            if _decor_codim(StableGraph(genera, legs, edges), decor) == codim:
                out[key] = c
        return TautClass(self.genus, self.weights, out)

    def restrict_codim(self, max_codim: int) -> "TautClass":
        out = {}
        for key, c in self.terms.items():
            genera, legs, edges, decor = key
            if _decor_codim(StableGraph(genera, legs, edges), decor) <= max_codim:
                out[key] = c
        return TautClass(self.genus, self.weights, out)

    def max_edges_part(self, max_edges: int) -> "TautClass":
        out = {k: c for k, c in self.terms.items() if len(k[2]) <= max_edges}
        return TautClass(self.genus, self.weights, out)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        rows = []
        for key in sorted(self.terms):
            genera, legs, edges, decor = key
            rows.append(
                {
                    "graph": StableGraph(genera, legs, edges).to_dict(),
                    "decor": [
                        {
                            "kappa": list(kappa),
                            "blocks": [
                                {"points": [list(p) for p in pts], "a": a}
                                for pts, a in blocks
                            ],
                        }
                        for kappa, blocks in decor
                    ],
                    "num": str(self.terms[key].numerator),
                    "den": str(self.terms[key].denominator),
                }
            )
        return {
            "genus": self.genus,
            "weights": [
                [str(w.numerator), str(w.denominator)] for w in self.weights.weights
            ],
            "terms": rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TautClass":
        weights = WeightData(
            tuple(Fraction(int(a), int(b)) for a, b in data["weights"])
        )
        out = cls(data["genus"], weights)
        for row in data["terms"]:
            graph = StableGraph.from_dict(row["graph"])
            decor = tuple(
                (
                    tuple(d["kappa"]),
                    tuple(
                        sorted(
                            (
                                tuple(tuple(p) for p in b["points"]),
                                b["a"],
                            )
                            for b in d["blocks"]
                        )
                    ),
                )
                for d in row["decor"]
            )
            out.add_term(
                graph, decor, Fraction(int(row["num"]), int(row["den"]))
            )
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Generator multiplication
# ---------------------------------------------------------------------------


def _decor_words(decor: tuple) -> list:
    """Rebuild raw words from a stored decoration."""
    words = []
    for kappa, blocks in decor:
        word = [("kappa", j) for j in kappa]
        for pts, a in blocks:
            if len(pts) == 1 and pts[0][0] == "h":
                word.append(("hpsi", (pts[0][1], pts[0][2]), a))
            else:
                word.append(
                    ("Dsa", tuple(p[1] for p in pts), a)
                )
        words.append(word)
    return words


def multiply_generator(c: TautClass, gen: tuple) -> TautClass:
    """Multiply by a kappa class, a psi power, or a ``D_{S, a}`` generator.

    ``gen`` is ``("kappa", j)``, ``("psi", i, k)`` or ``("Dsa", S, a)``.
    A kappa class distributes over the vertices and the half-edges by the
    boundary pull-back rule ``kappa_j -> kappa_j^{(v)} + sum_h psi_h^j``.
    """
    out = TautClass(c.genus, c.weights)
    for key, coeff in c.terms.items():
        genera, legs, edges, decor = key
        graph = StableGraph(genera, legs, edges)
        base_words = _decor_words(decor)
        if gen[0] == "kappa":
            j = gen[1]
            for v in range(graph.n_vertices):
                words = [list(w) for w in base_words]
                words[v].append(("kappa", j))
                out.add_word_term(graph, words, coeff)
                for he in graph.half_edges_at(v):
                    words = [list(w) for w in base_words]
                    words[v].append(("hpsi", he, j))
                    out.add_word_term(graph, words, coeff)
        elif gen[0] == "psi":
            _, i, k = gen
            v = graph.legs[i - 1]
            words = [list(w) for w in base_words]
            words[v].append(("psi", i, k))
            out.add_word_term(graph, words, coeff)
        elif gen[0] == "Dsa":
            _, s, a = gen
            homes = {graph.legs[i - 1] for i in s}
            if len(homes) != 1:
                raise ValueError(
                    "diagonal generator with markings on several vertices"
                )
            v = homes.pop()
            words = [list(w) for w in base_words]
            words[v].append(("Dsa", tuple(s), a))
            out.add_word_term(graph, words, coeff)
        else:
            raise ValueError(f"unknown generator {gen!r}")
    return out


def multiply_smooth(c1: TautClass, c2: TautClass) -> TautClass:
    """Product of two classes supported on the smooth (edge-free) graph."""
    c1._check_compatible(c2)
    out = TautClass(c1.genus, c1.weights)
    for key1, a in c1.terms.items():
        if key1[2]:
            raise ValueError("multiply_smooth needs edge-free terms")
        for key2, b in c2.terms.items():
            if key2[2]:
                raise ValueError("multiply_smooth needs edge-free terms")
            graph = StableGraph(key1[0], key1[1], key1[2])
            words = [
                w1 + w2
                for w1, w2 in zip(_decor_words(key1[3]), _decor_words(key2[3]))
            ]
            out.add_word_term(graph, words, a * b)
    return out


# ---------------------------------------------------------------------------
# Push-forwards
# ---------------------------------------------------------------------------


def pushforward_forget_small(c: TautClass, count: int = 1) -> TautClass:
    """Forget the last ``count`` markings, all of small weight.

    Uses the table: a term dies if the forgotten marking is in no block;
    a pure psi power at the marking becomes ``kappa_{a-1}`` at its vertex;
    a larger block loses the marking, drops its exponent by one and changes
    sign.
    """
    current = c
    for _ in range(count):
        n = current.weights.n
        weights = WeightData(current.weights.weights[:-1])
        target = TautClass(current.genus, weights)
        point = ("m", n)
        for key, coeff in current.terms.items():
            genera, legs, edges, decor = key
            v_home = legs[n - 1]
            graph = StableGraph(genera, legs[:-1], edges)
            graph.validate(weights, current.genus)
            words = _decor_words(decor)
            new_word = []
            found = False
            for kappa, blocks in [decor[v_home]]:
                new_word = [("kappa", j) for j in kappa]
                for pts, a in blocks:
                    if point in pts:
                        found = True
                        if len(pts) == 1:
                            new_word.append(("kappa", a - 1))
                        else:
                            rest = tuple(p[1] for p in pts if p != point)
                            coeff = -coeff
                            new_word.append(("Dsa", rest, a - 1))
                    elif len(pts) == 1 and pts[0][0] == "h":
                        new_word.append(("hpsi", (pts[0][1], pts[0][2]), a))
                    else:
                        new_word.append(
                            ("Dsa", tuple(p[1] for p in pts), a)
                        )
            if not found:
                continue
            words[v_home] = new_word
            target.add_word_term(graph, words, coeff)
        current = target
    return current


def _forget_contract(out: TautClass, genera: tuple, legs: tuple,
                     edges: tuple, decor: tuple, v: int, marking: int,
                     coeff: Fraction) -> bool:
    """Handle a term whose graph destabilizes when ``marking`` is dropped.

    Covers the case of a genus-zero vertex carrying the forgotten point
    and exactly two other special points: its moduli factor is a single
    point, the forgetful map restricts to an isomorphism of strata, and
    the vertex is contracted away (two half-edges: the incident edges
    merge; one half-edge and a leg: the leg moves to the neighbour).
    Returns False when the configuration is out of scope.
    """
    g0 = StableGraph(genera, legs, edges)
    if genera[v] != 0:
        return False
    legs_v = g0.legs_at(v)
    hes_v = g0.half_edges_at(v)
    if len(legs_v) + len(hes_v) != 3:
        return False
    kappa_v, blocks_v = decor[v]
    if kappa_v or blocks_v:
        return True  # positive-degree classes vanish on the point factor
    other_legs = [m for m in legs_v if m != marking]
    hemap = {}
    if len(hes_v) == 2:
        (e1, s1), (e2, s2) = hes_v
        if e1 == e2:
            return False  # a loop component only occurs at genus one
        removed = {e1, e2}
        joined = ((edges[e1][1 - s1], (e1, 1 - s1)),
                  (edges[e2][1 - s2], (e2, 1 - s2)))
        moved_leg = None
    else:
        (e1, s1) = hes_v[0]
        removed = {e1}
        joined = None
        moved_leg = (other_legs[0], edges[e1][1 - s1], (e1, 1 - s1))
    vmap = {w: w - (w > v) for w in range(len(genera)) if w != v}
    new_genera = tuple(genera[w] for w in sorted(vmap))
    new_legs = list(legs[:marking - 1])
    if moved_leg is not None:
        new_legs[moved_leg[0] - 1] = moved_leg[1]
    new_legs = tuple(vmap[w] for w in new_legs)
    new_edges = []
    for idx, (a, b) in enumerate(edges):
        if idx in removed:
            continue
        a2, b2 = vmap[a], vmap[b]
        if a2 <= b2:
            hemap[(idx, 0)] = (len(new_edges), 0)
            hemap[(idx, 1)] = (len(new_edges), 1)
            new_edges.append((a2, b2))
        else:
            hemap[(idx, 0)] = (len(new_edges), 1)
            hemap[(idx, 1)] = (len(new_edges), 0)
            new_edges.append((b2, a2))
    point_map = {}
    if joined is not None:
        (ua, ha), (ub, hb) = joined
        a2, b2 = vmap[ua], vmap[ub]
        if a2 <= b2:
            hemap[ha] = (len(new_edges), 0)
            hemap[hb] = (len(new_edges), 1)
            new_edges.append((a2, b2))
        else:
            hemap[ha] = (len(new_edges), 1)
            hemap[hb] = (len(new_edges), 0)
            new_edges.append((b2, a2))
    else:
        point_map[moved_leg[2]] = ("m", moved_leg[0])
    new_graph = StableGraph(new_genera, new_legs, tuple(new_edges))
    words = [[] for _ in range(new_graph.n_vertices)]
    for w in sorted(vmap):
        kappa, blocks = decor[w]
        word = [("kappa", j) for j in kappa]
        for pts, a in blocks:
            if len(pts) == 1 and pts[0][0] == "h":
                he = (pts[0][1], pts[0][2])
                if he in point_map:
                    word.append(("psi", point_map[he][1], a))
                else:
                    word.append(("hpsi", hemap[he], a))
            else:
                word.append(("Dsa", tuple(p[1] for p in pts), a))
        words[vmap[w]] = word
    out.add_word_term(new_graph, words, coeff)
    return True


def pushforward_forget_weight1(c: TautClass, marking: int) -> TautClass:
    """Forget a weight-one marking (must be the last one).

    Diagonals involving a weight-one point vanish outright, so the
    comparison corrections between psi classes upstairs and downstairs are
    zero and the push-forward reduces to ``psi_pt^{b} -> kappa~_{b-1}``
    expanded vertex-locally in the untwisted kappa classes:
    ``kappa~_j = kappa_j + sum_legs psi^j + sum_half-edges psi^j`` with the
    ``j = 0`` case the scalar ``2 g(v) - 2 + (number of other legs and
    half-edges at the vertex)``.
    """
    if marking != c.weights.n:
        raise ValueError("only the last marking can be forgotten")
    if c.weights.weight(marking) != 1:
        raise ValueError("marking does not have weight one")
    weights = WeightData(c.weights.weights[:-1])
    out = TautClass(c.genus, weights)
    point = ("m", marking)
    for key, coeff in c.terms.items():
        genera, legs, edges, decor = key
        v_home = legs[marking - 1]
        graph = StableGraph(genera, legs[:-1], edges)
        try:
            graph.validate(weights, c.genus)
        except ValueError as exc:
            if _forget_contract(out, genera, legs, edges, decor, v_home,
                                marking, coeff):
                continue
            raise NotImplementedError(
                "forgetting this point contracts a component: " + str(exc)
            ) from exc
        kappa, blocks = decor[v_home]
        b_exp = None
        rest_blocks = []
        for pts, a in blocks:
            if point in pts:
                if len(pts) > 1:
                    raise ValueError(
                        "weight-one point sits on a diagonal block"
                    )
                b_exp = a
            else:
                rest_blocks.append((pts, a))
        if b_exp is None:
            continue  # no class to integrate along the forgotten point
        words = _decor_words(decor)
        base = [("kappa", j) for j in kappa]
        for pts, a in rest_blocks:
            if len(pts) == 1 and pts[0][0] == "h":
                base.append(("hpsi", (pts[0][1], pts[0][2]), a))
            else:
                base.append(("Dsa", tuple(p[1] for p in pts), a))
        j = b_exp - 1
        variants = []
        if j == 0:
            count = (
                2 * genera[v_home]
                - 2
                + len(graph.legs_at(v_home))
                + len(graph.half_edges_at(v_home))
            )
            variants.append((Fraction(count), []))
        else:
            variants.append((Fraction(1), [("kappa", j)]))
            for m in graph.legs_at(v_home):
                variants.append((Fraction(1), [("psi", m, j)]))
            for he in graph.half_edges_at(v_home):
                variants.append((Fraction(1), [("hpsi", he, j)]))
        for factor, extra in variants:
            new_words = [list(w) for w in words]
            new_words[v_home] = base + extra
            out.add_word_term(graph, new_words, coeff * factor)
    return out


def weight_reduce(c: TautClass, w_new: WeightData) -> TautClass:
    """Restrict a class to reduced weights.

    Kills terms whose diagonal blocks become forbidden under the new
    weights and terms whose graphs lose vertex stability.  (For a genuine
    reduction ``w_new <= w_old`` the diagonal filter never fires, because
    reducing weights only enlarges the set of allowed diagonals; it is kept
    for safety.)
    """
    if w_new.n != c.weights.n:
        raise ValueError("weight data has wrong length")
    if any(
        w_new.weights[i] > c.weights.weights[i] for i in range(w_new.n)
    ):
        raise ValueError("weights may only decrease")
    out = TautClass(c.genus, w_new)
    for key, coeff in c.terms.items():
        genera, legs, edges, decor = key
        graph = StableGraph(genera, legs, edges)
        try:
            graph.validate(w_new, c.genus)
        except ValueError:
            continue
        ok = True
        for kappa, blocks in decor:
            for pts, _ in blocks:
                markings = [p[1] for p in pts if p[0] == "m"]
                if len(markings) >= 2 and w_new.subset_weight(markings) > 1:
                    ok = False
        if ok:
            out.terms[key] = coeff
    return out


# ---------------------------------------------------------------------------
# Chern classes of the dual of the restriction bundle
# ---------------------------------------------------------------------------


def chern_neg_Bd(
    d: int, t_order: int, genus: int, weights: WeightData
) -> dict:
    """Graded pieces ``c_j`` of ``prod_i 1/(1 - psi_{n+i} - sum_{j<i} D_{ji})``.

    Here ``D_{ji}`` is the normal-form generator ``D_{{j,i},1}``, i.e.
    minus the class of the diagonal; with this convention the connected
    part of the expansion reproduces the coefficients of the logarithm of
    the untwisted vertex series.  The last ``d`` markings of ``weights``
    are the small-weight points the bundle lives on.  Returns
    ``{j: TautClass}`` for ``j <= t_order``.
    """
    n = weights.n - d
    one = TautClass.one(genus, weights)
    total = {0: one}
    graph = StableGraph((genus,), tuple(0 for _ in range(weights.n)), ())
    for i in range(1, d + 1):
        base = TautClass(genus, weights)
        base.add_word_term(graph, [[("psi", n + i, 1)]], Fraction(1))
        for j in range(1, i):
            base.add_word_term(
                graph, [[("Dsa", (n + j, n + i), 1)]], Fraction(1)
            )
        # geometric series for this factor
        powers = {0: one}
        for k in range(1, t_order + 1):
            powers[k] = multiply_smooth(powers[k - 1], base)
            if powers[k].is_zero:
                break
        new_total = {}
        for j1, c1 in total.items():
            for j2, c2 in powers.items():
                if j1 + j2 > t_order:
                    continue
                prod = multiply_smooth(c1, c2)
                if j1 + j2 in new_total:
                    new_total[j1 + j2] = new_total[j1 + j2] + prod
                else:
                    new_total[j1 + j2] = prod
        total = new_total
    return {j: total.get(j, TautClass.zero(genus, weights)) for j in range(t_order + 1)}


# ---------------------------------------------------------------------------
# Boundary divisor products (one-edge graphs, excess intersection)
# ---------------------------------------------------------------------------


def _contract_edge(graph: StableGraph, e: int):
    """Contract edge ``e``; return (graph, vertex map, half-edge map)."""
    a, b = graph.edges[e]
    nv = graph.n_vertices
    if a == b:
        vmap = list(range(nv))
        genera = list(graph.genera)
        genera[a] += 1
    else:
        vmap = []
        genera = []
        for v in range(nv):
            if v == b:
                vmap.append(None)
            else:
                vmap.append(len(genera))
                genera.append(graph.genera[v])
        genera[vmap[a]] += graph.genera[b]
        vmap[b] = vmap[a]
    legs = tuple(vmap[v] for v in graph.legs)
    raw = []
    for idx, (va, vb) in enumerate(graph.edges):
        if idx == e:
            continue
        na, nb = vmap[va], vmap[vb]
        if na <= nb:
            raw.append(((na, nb), idx, (0, 1)))
        else:
            raw.append(((nb, na), idx, (1, 0)))
    raw.sort(key=lambda r: (r[0], r[1]))
    hemap = {}
    edges = []
    for new_idx, (pair, idx, sides) in enumerate(raw):
        edges.append(pair)
        hemap[(idx, 0)] = (new_idx, sides[0])
        hemap[(idx, 1)] = (new_idx, sides[1])
    return StableGraph(tuple(genera), legs, tuple(edges)), vmap, hemap


def graph_isos(g1: StableGraph, g2: StableGraph) -> list:
    """All isomorphisms g1 -> g2 as (vertex map, half-edge map) pairs."""
    if (
        g1.n_vertices != g2.n_vertices
        or g1.n_edges != g2.n_edges
        or sorted(g1.genera) != sorted(g2.genera)
    ):
        return []
    out = []
    for perm in itertools.permutations(range(g1.n_vertices)):
        if any(
            g1.genera[v] != g2.genera[perm[v]] for v in range(g1.n_vertices)
        ):
            continue
        if tuple(perm[v] for v in g1.legs) != g2.legs:
            continue
        mapped = []
        for idx, (a, b) in enumerate(g1.edges):
            pa, pb = perm[a], perm[b]
            pair = (pa, pb) if pa <= pb else (pb, pa)
            mapped.append((pair, idx, pa <= pb, a == b))
        groups: dict = {}
        for pair, idx, keep, loop in mapped:
            groups.setdefault(pair, []).append((idx, keep, loop))
        slots: dict = {}
        for idx2, pair in enumerate(g2.edges):
            slots.setdefault(pair, []).append(idx2)
        if {p: len(v) for p, v in groups.items()} != {
            p: len(v) for p, v in slots.items()
        }:
            continue
        per_group = []
        for pair, members in sorted(groups.items()):
            opts = []
            for order in itertools.permutations(members):
                flip_axes = [m for m in order if m[2]]
                for flips in itertools.product(
                    (False, True), repeat=len(flip_axes)
                ):
                    assign = []
                    fi = 0
                    for off, (idx, keep, loop) in enumerate(order):
                        if loop:
                            flip = flips[fi]
                            fi += 1
                            sides = (1, 0) if flip else (0, 1)
                        else:
                            sides = (0, 1) if keep else (1, 0)
                        assign.append((idx, slots[pair][off], sides))
                    opts.append(assign)
            per_group.append(opts)
        for combo in itertools.product(*per_group):
            hemap = {}
            for assign in combo:
                for idx, slot, sides in assign:
                    hemap[(idx, 0)] = (slot, sides[0])
                    hemap[(idx, 1)] = (slot, sides[1])
            out.append((tuple(perm), hemap))
    return out


def _edge_decor(term_key: tuple) -> dict:
    """psi powers at the two half-edges of a one-edge term."""
    genera, legs, edges, decor = term_key
    powers = {}
    for v, (kappa, blocks) in enumerate(decor):
        if kappa:
            raise ValueError("divisor-shaped input cannot carry kappa classes")
        for pts, a in blocks:
            if len(pts) != 1 or pts[0][0] != "h":
                raise ValueError(
                    "divisor-shaped input may only carry half-edge psi powers"
                )
            powers[(pts[0][1], pts[0][2])] = a
    return powers


def divisor_product(ca: TautClass, cb: TautClass, graph_pool=None) -> TautClass:
    """Product of two boundary-divisor classes decorated by half-edge psi's.

    Implements the excess-intersection rule: for each two-edge graph and
    each ordered pair of its edges whose one-edge contractions match the
    factors, a transversal term weighted by ``1/|Aut|`` summed over all
    matching isomorphisms; and for coinciding one-edge supports an excess
    term with the extra factor ``-(psi_1 + psi_2)``, likewise summed over
    isomorphisms with weight ``1/|Aut|``.
    """
    ca._check_compatible(cb)
    from .graphs import enumerate_graphs

    if graph_pool is None:
        graph_pool = enumerate_graphs(ca.genus, ca.weights, 2)
    two_edge = [g for g in graph_pool if g.n_edges == 2]
    contractions = []
    for graph in two_edge:
        aut = graph.automorphism_order()
        for e_keep, e_con in ((0, 1), (1, 0)):
            contracted, vmap, hemap = _contract_edge(graph, e_con)
            contractions.append((graph, aut, e_keep, contracted, hemap))
    out = TautClass(ca.genus, ca.weights)
    for key_a, coeff_a in ca.terms.items():
        graph_a = StableGraph(key_a[0], key_a[1], key_a[2])
        if graph_a.n_edges != 1:
            raise ValueError("divisor_product needs one-edge inputs")
        pow_a = _edge_decor(key_a)
        for key_b, coeff_b in cb.terms.items():
            graph_b = StableGraph(key_b[0], key_b[1], key_b[2])
            if graph_b.n_edges != 1:
                raise ValueError("divisor_product needs one-edge inputs")
            pow_b = _edge_decor(key_b)
            coeff = coeff_a * coeff_b
            # transversal structures
            for graph, aut, e_keep, con_a, hemap_a in contractions:
                isos_a = graph_isos(graph_a, con_a)
                if not isos_a:
                    continue
                e_other = 1 - e_keep
                con_b, _, hemap_b = _contract_edge(graph, e_keep)
                isos_b = graph_isos(graph_b, con_b)
                if not isos_b:
                    continue
                inv_a = {v: k for k, v in hemap_a.items()}
                inv_b = {v: k for k, v in hemap_b.items()}
                for _, hm_a in isos_a:
                    for _, hm_b in isos_b:
                        word = {}
                        for (e, s), a_pow in pow_a.items():
                            ge, gs = inv_a[hm_a[(e, s)]]
                            word[(ge, gs)] = word.get((ge, gs), 0) + a_pow
                        for (e, s), b_pow in pow_b.items():
                            ge, gs = inv_b[hm_b[(e, s)]]
                            word[(ge, gs)] = word.get((ge, gs), 0) + b_pow
                        words = [[] for _ in range(graph.n_vertices)]
                        for (ge, gs), p in word.items():
                            v = graph.edges[ge][gs]
                            words[v].append(("hpsi", (ge, gs), p))
                        out.add_word_term(
                            graph, words, coeff / aut
                        )
            # excess structures
            isos = graph_isos(graph_a, graph_b)
            if isos:
                aut_b = graph_b.automorphism_order()
                isos_bb = graph_isos(graph_b, graph_b)
                for _, hm_ab in isos:
                    for _, hm_bb in isos_bb:
                        powers = {}
                        for (e, s), a_pow in pow_a.items():
                            t = hm_ab[(e, s)]
                            powers[t] = powers.get(t, 0) + a_pow
                        for (e, s), b_pow in pow_b.items():
                            t = hm_bb[(e, s)]
                            powers[t] = powers.get(t, 0) + b_pow
                        for excess_side in (0, 1):
                            ep = dict(powers)
                            ep[(0, excess_side)] = ep.get((0, excess_side), 0) + 1
                            words = [[] for _ in range(graph_b.n_vertices)]
                            for (ge, gs), p in ep.items():
                                v = graph_b.edges[ge][gs]
                                words[v].append(("hpsi", (ge, gs), p))
                            out.add_word_term(
                                graph_b, words, -coeff / aut_b
                            )
    return out


def divisor_exp_check(
    genus: int,
    weights: WeightData,
    f_poly: dict,
    max_codim: int = 2,
) -> tuple:
    """Compare the two sides of the boundary-exponential identity.

    ``f_poly`` maps ``(i, j)`` to the rational coefficient of
    ``psi_1^i psi_2^j`` in a symmetric polynomial ``f``.  The left side is
    ``exp(sum_D 1/|Aut D| xi_D*(f))`` expanded with ``divisor_product``,
    the right side the graph sum with per-edge factor
    ``(exp(-f (psi_1+psi_2)) - 1)/(-(psi_1+psi_2))``, both truncated to
    codimension ``max_codim`` (which keeps at most two edges).

    Returns ``(lhs, rhs)`` as TautClass values.
    """
    from .graphs import enumerate_graphs

    if max_codim > 2:
        raise ValueError("truncation beyond codimension 2 is not supported")
    pool = enumerate_graphs(genus, weights, 2)
    divisors = [g for g in pool if g.n_edges == 1]

    def xi_f(graph: StableGraph, poly: dict, weight: Fraction) -> TautClass:
        c = TautClass(genus, weights)
        for (i, j), coeff in poly.items():
            words = [[] for _ in range(graph.n_vertices)]
            for he, p in (((0, 0), i), ((0, 1), j)):
                if p:
                    v = graph.edges[he[0]][he[1]]
                    words[v].append(("hpsi", he, p))
            c.add_word_term(graph, words, coeff * weight)
        return c

    big = TautClass(genus, weights)
    for graph in divisors:
        big = big + xi_f(graph, f_poly, Fraction(1, graph.automorphism_order()))
    big = big.restrict_codim(max_codim)
    lhs = TautClass.one(genus, weights) + big
    square = divisor_product(big, big, graph_pool=pool)
    lhs = lhs + square.restrict_codim(max_codim).scale(Fraction(1, 2))

    # right-hand side: per-edge factor from f
    def poly_mul(p1: dict, p2: dict, cap: int) -> dict:
        out: dict = {}
        for (i1, j1), c1 in p1.items():
            for (i2, j2), c2 in p2.items():
                if i1 + i2 + j1 + j2 > cap:
                    continue
                k = (i1 + i2, j1 + j2)
                out[k] = out.get(k, Fraction(0)) + c1 * c2
        return {k: v for k, v in out.items() if v}

    cap = max_codim  # psi-degree cap inside one edge factor
    fs = poly_mul(f_poly, {(1, 0): Fraction(1), (0, 1): Fraction(1)}, cap + 1)
    # g = (exp(-fs) - 1) / (-fs) * f = sum_{k>=0} (-fs)^k / (k+1)! * f
    edge_factor: dict = {}
    power = {(0, 0): Fraction(1)}
    k = 0
    while power:
        term = poly_mul(power, f_poly, cap)
        for key, v in term.items():
            edge_factor[key] = edge_factor.get(key, Fraction(0)) + v / _factorial(
                k + 1
            )
        power = poly_mul(power, {k2: -v2 for k2, v2 in fs.items()}, cap)
        k += 1
    rhs = TautClass.one(genus, weights)
    for graph in pool:
        if graph.n_edges == 0:
            continue
        weight = Fraction(1, graph.automorphism_order())
        assignments = [edge_factor] * graph.n_edges
        for combo in itertools.product(*[list(p.items()) for p in assignments]):
            total_deg = graph.n_edges + sum(i + j for (i, j), _ in combo)
            if total_deg > max_codim:
                continue
            coeff = weight
            words = [[] for _ in range(graph.n_vertices)]
            for e, ((i, j), c) in enumerate(combo):
                coeff *= c
                for s, p in ((0, i), (1, j)):
                    if p:
                        v = graph.edges[e][s]
                        words[v].append(("hpsi", (e, s), p))
            rhs.add_word_term(graph, words, coeff)
    return lhs, rhs.restrict_codim(max_codim)


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


# ---------------------------------------------------------------------------
# Exact linear algebra over the generator basis
# ---------------------------------------------------------------------------


def to_vector(classes: list) -> tuple:
    """Coordinates of homogeneous classes in the shared generator basis.

    Returns ``(basis, rows)`` where ``basis`` is the sorted list of term
    keys and ``rows`` the coefficient vectors.  All classes must be
    homogeneous of the same codimension on the same space.
    """
    if not classes:
        return [], []
    first = classes[0]
    codims = set()
    for c in classes:
        first._check_compatible(c)
        codims |= c.codims()
    if len(codims) > 1:
        raise ValueError("mixed codimension")
    basis = sorted({k for c in classes for k in c.terms})
    rows = [
        [c.terms.get(k, Fraction(0)) for k in basis] for c in classes
    ]
    return basis, rows


def matrix_rank(rows: list) -> int:
    """Rank by fraction-free (Bareiss) elimination over the integers."""
    if not rows:
        return 0
    mat = []
    for row in rows:
        denom = 1
        for x in row:
            denom = denom * Fraction(x).denominator // _gcd(
                denom, Fraction(x).denominator
            )
        mat.append([int(Fraction(x) * denom) for x in row])
    m, n = len(mat), len(mat[0]) if mat else 0
    rank = 0
    prev = 1
    row = 0
    for col in range(n):
        pivot = None
        for r in range(row, m):
            if mat[r][col]:
                pivot = r
                break
        if pivot is None:
            continue
        mat[row], mat[pivot] = mat[pivot], mat[row]
        for r in range(row + 1, m):
            for c2 in range(col + 1, n):
                mat[r][c2] = (
                    mat[row][col] * mat[r][c2] - mat[r][col] * mat[row][c2]
                ) // prev
            mat[r][col] = 0
        prev = mat[row][col]
        row += 1
        rank += 1
        if row == m:
            break
    return rank


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a
