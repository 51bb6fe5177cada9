"""Link/cut forest with four value channels per node.

The cycle-canceling rounder needs, for every tree path, the minimum distance
of any edge weight to its upper or lower bound, where the sign with which a
wave of weight change hits an edge alternates along the path.  The classical
formulation keeps four forests with identical topology -- (+, up), (+, lo),
(-, up), (-, lo) -- and queries path minima in all four.  Here the four
forests share one splay-tree topology and each node carries the four values
as channels:

    channel 0: distance to the upper bound if a forward wave adds here
    channel 1: distance to the lower bound under the reverse wave
    channel 2: distance to the upper bound under the reverse wave
    channel 3: distance to the lower bound under the forward wave

"Forward" refers to the in-order direction of the exposed path, so a lazy
path reversal swaps the channel pairs (0,2) and (1,3); identical topology
across the four channels then holds by construction.  Channels that do not
apply to a node (both pairs for vertex nodes, the wrong-sign pair for edge
nodes) carry +inf or a caller-chosen sentinel so they never win a path-min.

Supports link, excision of an interior node, path exposure with per-channel
min/argmin, and lazy per-channel path addition, all in O(log n) amortized.
"""

from __future__ import annotations

import math

INF = math.inf

# channel indices
UP_FWD, LO_REV, UP_REV, LO_FWD = 0, 1, 2, 3
# per-channel multipliers for a unit forward wave (reverse wave negates them)
WAVE_FWD = (-1.0, 1.0, 1.0, -1.0)


class Node:
    """Splay node; ``key`` is caller payload (edge id, or None for vertices)."""

    __slots__ = ("key", "prt", "ch", "rev", "vals", "mins", "adds", "amin")

    def __init__(self, key=None, vals=None):
        self.key = key
        self.prt = None
        self.ch = [None, None]
        self.rev = False
        self.vals = list(vals) if vals is not None else [INF] * 4
        self.mins = list(self.vals)
        self.adds = [0.0] * 4
        self.amin = [self] * 4

    def __repr__(self):  # debugging aid only
        return f"Node({self.key!r}, vals={self.vals})"


def _apply_add(x: Node, k: int, d: float) -> None:
    x.vals[k] += d          # inf + d == inf keeps vertex channels inert
    x.mins[k] += d
    x.adds[k] += d


def _apply_rev(x: Node) -> None:
    x.ch.reverse()
    for seq in (x.vals, x.mins, x.adds, x.amin):
        seq[UP_FWD], seq[UP_REV] = seq[UP_REV], seq[UP_FWD]
        seq[LO_REV], seq[LO_FWD] = seq[LO_FWD], seq[LO_REV]
    x.rev = not x.rev


def _push(x: Node) -> None:
    if x.rev:
        for c in x.ch:
            if c is not None:
                _apply_rev(c)
        x.rev = False
    for k in range(4):
        d = x.adds[k]
        if d != 0.0:
            for c in x.ch:
                if c is not None:
                    _apply_add(c, k, d)
            x.adds[k] = 0.0


def _pull(x: Node) -> None:
    for k in range(4):
        best, arg = x.vals[k], x
        for c in x.ch:
            if c is not None and c.mins[k] < best:
                best, arg = c.mins[k], c.amin[k]
        x.mins[k] = best
        x.amin[k] = arg


def _is_splay_root(x: Node) -> bool:
    p = x.prt
    return p is None or (p.ch[0] is not x and p.ch[1] is not x)


def _rotate(x: Node) -> None:
    p = x.prt
    g = p.prt
    i = 1 if p.ch[1] is x else 0
    b = x.ch[1 - i]
    p.ch[i] = b
    if b is not None:
        b.prt = p
    x.ch[1 - i] = p
    p_was_root = _is_splay_root(p)
    p.prt = x
    x.prt = g
    if not p_was_root:
        g.ch[1 if g.ch[1] is p else 0] = x
    _pull(p)
    _pull(x)


def _splay(x: Node) -> None:
    chain = [x]
    y = x
    while not _is_splay_root(y):
        y = y.prt
        chain.append(y)
    for y in reversed(chain):
        _push(y)
    while not _is_splay_root(x):
        p = x.prt
        if not _is_splay_root(p):
            g = p.prt
            if (g.ch[0] is p) == (p.ch[0] is x):
                _rotate(p)
            else:
                _rotate(x)
        _rotate(x)


def _access(x: Node) -> None:
    _splay(x)
    x.ch[1] = None          # old preferred child keeps prt as a path-parent
    _pull(x)
    while x.prt is not None:
        y = x.prt
        _splay(y)
        y.ch[1] = x
        _pull(y)
        _splay(x)


class LinkCutForest:
    """Forest of :class:`Node` handles created by :meth:`vertex` / :meth:`edge`."""

    def vertex(self) -> Node:
        return Node()

    def edge(self, key, vals) -> Node:
        if len(vals) != 4:
            raise ValueError("edge nodes need four channel values")
        return Node(key, vals)

    def make_root(self, x: Node) -> None:
        _access(x)
        _apply_rev(x)

    def find_root(self, x: Node) -> Node:
        _access(x)
        while x.ch[0] is not None:
            _push(x)
            x = x.ch[0]
        _splay(x)
        return x

    def connected(self, x: Node, y: Node) -> bool:
        if x is y:
            return True
        return self.find_root(x) is self.find_root(y)

    def link(self, x: Node, y: Node) -> None:
        """Join the trees of x and y (x becomes a child of y)."""
        if self.connected(x, y):
            raise ValueError("link would create a cycle")
        self.make_root(x)
        x.prt = y

    def expose(self, u: Node, v: Node) -> Node:
        """Make the u..v path one splay tree, in-order u -> v ("forward"),
        and return its root, whose mins/amin aggregate the whole path."""
        self.make_root(u)
        _access(v)
        return v

    def set_values(self, x: Node, vals) -> None:
        """Overwrite x's channels in the orientation of the last exposure
        containing x (lazy tags above x are flushed first)."""
        _splay(x)
        x.vals = list(vals)
        x.adds = [0.0] * 4
        _pull(x)

    def values(self, x: Node) -> list:
        _splay(x)
        return list(x.vals)

    def path_add(self, root: Node, deltas) -> None:
        """Add deltas[k] to channel k on every node of the exposed path."""
        for k, d in enumerate(deltas):
            if d != 0.0:
                _apply_add(root, k, d)

    def path_nodes(self, u: Node, v: Node) -> list:
        """In-order node list of the u..v path (after exposing it)."""
        root = self.expose(u, v)
        out = []
        stack = []
        x = root
        while stack or x is not None:
            if x is not None:
                _push(x)
                stack.append(x)
                x = x.ch[0]
            else:
                x = stack.pop()
                out.append(x)
                x = x.ch[1]
        return out

    def excise(self, x: Node, left: Node, right: Node) -> None:
        """Remove interior node x whose path neighbors are left and right,
        splitting its tree in two."""
        self.make_root(left)
        _access(right)
        _splay(x)
        _push(x)
        for c in x.ch:
            if c is not None:
                c.prt = None
        x.ch = [None, None]
        _pull(x)
