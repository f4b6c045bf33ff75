"""Configurations of disjoint ovals on the sphere.

A configuration is stored as a rooted nesting forest: the children of an
oval are the ovals lying directly inside it.  Only the unrooted region tree
matters for equivalence, since the sphere has no preferred outside.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

BLACK = "black"
WHITE = "white"
OUTER = None  # key of the outer region in colorings


class OvalError(ValueError):
    pass


@dataclass(frozen=True)
class Oval:
    label: str
    children: tuple["Oval", ...] = ()


@dataclass(frozen=True)
class OvalConfig:
    roots: tuple[Oval, ...] = ()
    _parent: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        parent: dict[str, str | None] = {}
        stack = [(r, None) for r in self.roots]
        while stack:
            node, par = stack.pop()
            if node.label in parent:
                raise OvalError(f"duplicate oval label {node.label!r}")
            parent[node.label] = par
            stack.extend((c, node.label) for c in node.children)
        object.__setattr__(self, "_parent", parent)

    # basic queries
    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.walk()]

    def __len__(self) -> int:
        return len(self._parent)

    def walk(self) -> Iterator[Oval]:
        """Breadth-first over ovals, outermost first."""
        queue = list(self.roots)
        while queue:
            node = queue.pop(0)
            yield node
            queue.extend(node.children)

    def parent(self, label: str) -> str | None:
        if label not in self._parent:
            raise OvalError(f"unknown oval {label!r}")
        return self._parent[label]

    def depth(self, label: str) -> int:
        d = 0
        p = self.parent(label)
        while p is not None:
            d += 1
            p = self._parent[p]
        return d

    def region_tree(self) -> dict:
        """Adjacency of the region tree. Region keys: OUTER and oval labels
        (the region just inside that oval)."""
        adj: dict = {OUTER: set()}
        for lab in self._parent:
            adj.setdefault(lab, set())
        for lab, par in self._parent.items():
            adj[lab].add(par)
            adj[par].add(lab)
        return adj

    def without(self, removed: Iterable[str]) -> "OvalConfig":
        removed = set(removed)
        for r in removed:
            self.parent(r)

        def prune(node: Oval) -> list[Oval]:
            kids = [k for c in node.children for k in prune(c)]
            if node.label in removed:
                return kids
            return [Oval(node.label, tuple(kids))]

        return OvalConfig(tuple(k for r in self.roots for k in prune(r)))

    def __str__(self) -> str:
        return format_config(self)


# ---------------------------------------------------------------- text format

_TOKEN = re.compile(r"\s*(?:([A-Za-z0-9_.\-]+)|(\()|(\)))")


def parse_config(text: str) -> OvalConfig:
    """Parse `A(B C(D))`.  Whitespace-insensitive; lines starting with '#'
    and a leading `format: 1` header are ignored."""
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#") or re.fullmatch(r"format:\s*\d+", s):
            continue
        body.append(s)
    src = " ".join(body)
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            raise OvalError(f"bad character at {pos}: {src[pos:pos + 10]!r}")
        tokens.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()

    def forest(i: int) -> tuple[list[Oval], int]:
        out = []
        while i < len(tokens) and tokens[i] != ")":
            tok = tokens[i]
            if tok == "(":
                raise OvalError("'(' must follow a label")
            i += 1
            kids: list[Oval] = []
            if i < len(tokens) and tokens[i] == "(":
                kids, i = forest(i + 1)
                if i >= len(tokens) or tokens[i] != ")":
                    raise OvalError("unbalanced parentheses")
                i += 1
            out.append(Oval(tok, tuple(kids)))
        return out, i

    roots, end = forest(0)
    if end != len(tokens):
        raise OvalError("unbalanced parentheses")
    return OvalConfig(tuple(roots))


def format_config(cfg: OvalConfig) -> str:
    def fmt(o: Oval) -> str:
        if not o.children:
            return o.label
        return o.label + "(" + " ".join(fmt(c) for c in o.children) + ")"

    return " ".join(fmt(r) for r in cfg.roots)


# ------------------------------------------------------------------ colorings

def canonical_two_coloring(cfg: OvalConfig, outer_color: str = WHITE) -> dict:
    if outer_color not in (BLACK, WHITE):
        raise OvalError("color must be 'black' or 'white'")
    other = BLACK if outer_color == WHITE else WHITE
    colors = {OUTER: outer_color}
    for lab in cfg.labels:
        colors[lab] = other if cfg.depth(lab) % 2 == 0 else outer_color
    return colors


def nicely_contains(x: OvalConfig, y_subset: Iterable[str]) -> bool:
    ys = set(y_subset)
    for lab in ys:
        x.parent(lab)  # raises on unknown labels
    rest = x.without(ys)
    coloring = canonical_two_coloring(rest)
    seen = set()
    for lab in ys:
        anc = x.parent(lab)
        while anc is not None and anc in ys:
            anc = x.parent(anc)
        seen.add(coloring[anc])
    return len(seen) <= 1


# ---------------------------------------------------------------- equivalence

def _tree_centers(adj: dict) -> list:
    n = len(adj)
    if n <= 2:
        return list(adj)
    deg = {v: len(nb) for v, nb in adj.items()}
    leaves = [v for v, d in deg.items() if d == 1]
    left = n
    while left > 2:
        left -= len(leaves)
        nxt = []
        for leaf in leaves:
            for nb in adj[leaf]:
                deg[nb] -= 1
                if deg[nb] == 1:
                    nxt.append(nb)
            deg[leaf] = 0
        leaves = nxt
    return leaves


def _rooted_code(adj: dict, root, parent=object()) -> str:
    kids = sorted(_rooted_code(adj, c, root) for c in adj[root] if c != parent)
    return "(" + "".join(kids) + ")"


def tree_signature(adj: dict) -> str:
    """Canonical string of an unrooted tree (AHU code at the center)."""
    return min(_rooted_code(adj, c) for c in _tree_centers(adj))


def signature(cfg: OvalConfig) -> str:
    return tree_signature(cfg.region_tree())


def is_equivalent(a: OvalConfig, b: OvalConfig) -> bool:
    return len(a) == len(b) and signature(a) == signature(b)


# ----------------------------------------------------------------- enumeration

def _rooted_forests(n: int) -> list[tuple]:
    """All rooted unlabeled forests on n nodes, as sorted nested tuples."""
    if n == 0:
        return [()]
    trees = {k: _rooted_trees(k) for k in range(1, n + 1)}
    out = set()

    def build(remaining: int, max_tree, acc):
        if remaining == 0:
            out.add(tuple(acc))
            return
        for k in range(1, remaining + 1):
            for t in trees[k]:
                if max_tree is None or t <= max_tree:
                    build(remaining - k, t, acc + [t])

    build(n, None, [])
    return sorted(out)


_TREE_CACHE: dict[int, list] = {}


def _rooted_trees(n: int) -> list:
    if n not in _TREE_CACHE:
        _TREE_CACHE[n] = sorted(tuple(sorted(f, reverse=True)) for f in _rooted_forests(n - 1))
    return _TREE_CACHE[n]


def _shape_to_config(shape: tuple) -> OvalConfig:
    counter = itertools.count()

    def name(i: int) -> str:
        s = ""
        i += 1
        while i:
            i, r = divmod(i - 1, 26)
            s = chr(65 + r) + s
        return s

    def mk(t) -> Oval:
        lab = name(next(counter))
        return Oval(lab, tuple(mk(c) for c in t))

    return OvalConfig(tuple(mk(t) for t in shape))


def all_configs(n: int) -> list[OvalConfig]:
    """One representative per equivalence class of n-oval configurations
    (i.e. per unrooted tree on n+1 vertices)."""
    reps: dict[str, OvalConfig] = {}
    for shape in _rooted_forests(n):
        cfg = _shape_to_config(shape)
        reps.setdefault(signature(cfg), cfg)
    return [reps[k] for k in sorted(reps)]


def all_nestings(n: int) -> list[OvalConfig]:
    """Every nesting forest of n ovals in the plane, up to relabelling
    (several may be equivalent on the sphere)."""
    return [_shape_to_config(shape) for shape in _rooted_forests(n)]


def config_from_region_tree(curves: dict, root) -> OvalConfig:
    """Build a nesting forest from curves given as {label: (region_a, region_b)}.

    The curves must cut the sphere into a tree of regions; `root` is the
    region treated as the outside.
    """
    adj: dict = {root: []}
    for lab, (ra, rb) in curves.items():
        if ra == rb:
            raise OvalError(f"curve {lab!r} has the same region on both sides")
        adj.setdefault(ra, []).append((lab, rb))
        adj.setdefault(rb, []).append((lab, ra))
    if len(adj) != len(curves) + 1:
        raise OvalError("curves do not form a region tree")

    def children(region, via) -> tuple[Oval, ...]:
        out = []
        for lab, other in sorted(adj[region], key=lambda e: str(e[0])):
            if lab == via:
                continue
            out.append(Oval(str(lab), children(other, lab)))
        return tuple(out)

    cfg = OvalConfig(children(root, None))
    if len(cfg) != len(curves):
        raise OvalError("region graph is not connected")
    return cfg
