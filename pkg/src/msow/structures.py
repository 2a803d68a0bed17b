"""Finite structures the workbench quantifies over.

Kinds: binary/colored words, unary words (symbolic big length, materialized on
demand), paths, threshold graphs built from {u,j} creation strings, colored
rooted trees, and cliques with an explicit edge universe for MSO2.  Universe
elements are dense 0-based integers; all relations are positional, so
descriptors rebuild bit-identical structures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import logic

DEFAULT_LIMIT = 100_000


class StructureError(Exception):
    pass


@dataclass(frozen=True)
class Structure:
    kind: str
    n: int
    signature: logic.Signature
    letters: tuple = None           # word letters, one per position
    order: tuple = None             # rank per element when prec is derived
    adj: tuple = None               # frozenset of neighbours per vertex
    parent: tuple = None            # tree parent (root -> None)
    colors: tuple = None            # frozenset of color ids per node
    creation: str = None            # threshold creation string
    edge_pairs: tuple = None        # clique edges; edge element i is n + i

    # -- relations ---------------------------------------------------------

    def elements(self):
        if self.edge_pairs is not None:
            return range(self.n + len(self.edge_pairs))
        return range(self.n)

    def vertices(self):
        return range(self.n)

    def edge_elements(self):
        return range(self.n, self.n + len(self.edge_pairs or ()))

    def prec(self, x, y):
        if self.order is not None:
            return self.order[x] < self.order[y]
        if self.kind in ("word", "unary"):
            return x < y
        raise StructureError(f"no order relation on {self.kind} structures")

    def has_edge(self, x, y):
        if self.adj is None:
            return False
        return x < self.n and y < self.n and y in self.adj[x]

    def has_color(self, color, x):
        if x >= self.n:
            return False
        if self.colors is not None:
            return color in self.colors[x]
        return False

    def is_child(self, x, y):
        if self.parent is None:
            return False
        return x < self.n and self.parent[x] == y

    def incident(self, x, e):
        if self.edge_pairs is None:
            return False
        idx = e - self.n
        if not (0 <= idx < len(self.edge_pairs)) or x >= self.n:
            return False
        return x in self.edge_pairs[idx]

    def children_of(self, y):
        return tuple(i for i in range(self.n) if self.parent and self.parent[i] == y)


@dataclass(frozen=True)
class ThresholdCreation:
    text: str

    def __post_init__(self):
        if not self.text:
            raise StructureError("creation string must be nonempty")
        bad = set(self.text) - {"u", "j"}
        if bad:
            raise StructureError(f"creation string has letters outside u/j: {sorted(bad)}")


def build_word(letters):
    letters = tuple(letters)
    sig = logic.word_signature(sorted(set(letters) | {"0", "1"}))
    return Structure(
        "word",
        len(letters),
        sig,
        letters=letters,
        colors=tuple(frozenset([c]) for c in letters),
    )


def build_unary(length):
    return Structure("unary", int(length), logic.unary_signature())


def build_path(n):
    if n < 1:
        raise StructureError("paths need at least one vertex")
    adj = []
    for i in range(n):
        nb = set()
        if i > 0:
            nb.add(i - 1)
        if i < n - 1:
            nb.add(i + 1)
        adj.append(frozenset(nb))
    return Structure("path", n, logic.graph_signature(), adj=tuple(adj))


def build_threshold(creation):
    creation = ThresholdCreation(creation).text
    n = len(creation)
    adj = [set() for _ in range(n)]
    for i, letter in enumerate(creation):
        if letter == "j":
            for k in range(i):
                adj[i].add(k)
                adj[k].add(i)
    return Structure(
        "threshold",
        n,
        logic.graph_signature(),
        adj=tuple(frozenset(s) for s in adj),
        creation=creation,
    )


def build_tree(root_spec):
    parents = []
    colors = []

    def add(spec, parent):
        idx = len(parents)
        parents.append(parent)
        colors.append(frozenset(spec.get("colors", ())))
        for child in spec.get("children", ()):
            add(child, idx)

    add(root_spec, None)
    roster = sorted({c for cs in colors for c in cs})
    return Structure(
        "tree",
        len(parents),
        logic.tree_signature(roster),
        parent=tuple(parents),
        colors=tuple(colors),
    )


def build_clique(n):
    pairs = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    adj = tuple(frozenset(set(range(n)) - {i}) for i in range(n))
    return Structure(
        "clique", n, logic.clique_signature(), adj=adj, edge_pairs=pairs
    )


def build_embedded(creation, seed_adj):
    """Threshold-style build where every creation letter becomes a seed copy.

    Join letters connect the whole new copy to every previously added vertex.
    """
    creation = ThresholdCreation(creation).text
    k = len(seed_adj)
    if k < 1:
        raise StructureError("seed graph must be nonempty")
    n = k * len(creation)
    adj = [set() for _ in range(n)]
    for b, letter in enumerate(creation):
        base = b * k
        for i in range(k):
            for j in range(k):
                if i != j and seed_adj[i][j]:
                    adj[base + i].add(base + j)
        if letter == "j":
            for v in range(base, base + k):
                for w in range(base):
                    adj[v].add(w)
                    adj[w].add(v)
    return Structure(
        "embedded",
        n,
        logic.graph_signature(),
        adj=tuple(frozenset(s) for s in adj),
        creation=creation,
    )


_BUILDERS = {
    "word": lambda d, limit: build_word(d["letters"]),
    "path": lambda d, limit: build_path(int(d["n"])),
    "threshold": lambda d, limit: build_threshold(d["creation"]),
    "tree": lambda d, limit: build_tree(d["root"]),
    "clique": lambda d, limit: build_clique(int(d["n"])),
    "embedded": lambda d, limit: build_embedded(d["creation"], d["seed"]),
}


def descriptor_size(d):
    kind = d.get("kind")
    if kind == "word":
        return len(d["letters"])
    if kind == "unary":
        return int(d["length"])
    if kind == "path":
        return int(d["n"])
    if kind == "threshold":
        return len(d["creation"])
    if kind == "tree":
        def count(spec):
            return 1 + sum(count(c) for c in spec.get("children", ()))
        return count(d["root"])
    if kind == "clique":
        n = int(d["n"])
        return n + n * (n - 1) // 2
    if kind == "embedded":
        return len(d["creation"]) * len(d["seed"])
    raise StructureError(f"unknown structure kind {kind!r}")


def build_structure(descriptor, limit=DEFAULT_LIMIT):
    """Materialize a JSON descriptor into an explicit structure."""
    size = descriptor_size(descriptor)
    if size > limit:
        raise StructureError(f"materialized size {size} exceeds limit {limit}")
    kind = descriptor["kind"]
    if kind == "unary":
        return build_unary(descriptor["length"])
    return _BUILDERS[kind](descriptor, limit)


def descriptor_of(s):
    if s.kind == "word":
        return {"kind": "word", "letters": "".join(s.letters)}
    if s.kind == "unary":
        return {"kind": "unary", "length": str(s.n)}
    if s.kind == "path":
        return {"kind": "path", "n": s.n}
    if s.kind == "threshold":
        return {"kind": "threshold", "creation": s.creation}
    if s.kind == "clique":
        return {"kind": "clique", "n": s.n}
    raise StructureError(f"no canonical descriptor for kind {s.kind!r}")


# ---------------------------------------------------------------------------


def derive_path_order(p, endpoint):
    """Total order on a path: x before y when x separates the endpoint from y.

    Equals positional order walked from the chosen end.
    """
    if p.adj is None:
        raise StructureError("structure has no adjacency")
    degrees = [len(a) for a in p.adj]
    if any(d > 2 for d in degrees):
        raise StructureError("not a path: vertex of degree > 2")
    ends = [i for i, d in enumerate(degrees) if d <= 1]
    if p.n > 1 and len(ends) != 2:
        raise StructureError("not a path: wrong number of endpoints")
    if endpoint not in ends:
        raise StructureError(f"vertex {endpoint} is not a path endpoint")
    rank = [None] * p.n
    prev, cur = None, endpoint
    for i in range(p.n):
        if cur is None:
            raise StructureError("not a path: disconnected")
        rank[cur] = i
        nxt = [v for v in p.adj[cur] if v != prev]
        prev, cur = cur, (nxt[0] if nxt else None)
    if any(r is None for r in rank):
        raise StructureError("not a path: disconnected")
    return tuple(rank)


def with_order(p, rank):
    """Copy of ``p`` carrying a derived total order (prec becomes available)."""
    sig = logic.Signature(p.signature.name, p.signature.predicates | {"prec"},
                          p.signature.colors, p.signature.edge_sets)
    return Structure(p.kind, p.n, sig, letters=p.letters, order=tuple(rank),
                     adj=p.adj, parent=p.parent, colors=p.colors,
                     creation=p.creation, edge_pairs=p.edge_pairs)


def tree_height(s, node=0):
    kids = [i for i in range(s.n) if s.parent[i] == node]
    if not kids:
        return 0
    return 1 + max(tree_height(s, k) for k in kids)


def structure_stats(s):
    """Exact size/degree/height report."""
    edges = 0
    degs = []
    if s.adj is not None:
        degs = sorted(len(a) for a in s.adj)
        edges = sum(degs) // 2
    elif s.parent is not None:
        edges = sum(1 for p in s.parent if p is not None)
        degcount = [0] * s.n
        for i, p in enumerate(s.parent):
            if p is not None:
                degcount[i] += 1
                degcount[p] += 1
        degs = sorted(degcount)
    height = None
    if s.kind == "tree":
        height = tree_height(s)
    return {
        "n": s.n,
        "edgeCount": edges,
        "height": height,
        "maxDegree": degs[-1] if degs else 0,
        "degreeProfile": degs,
    }
