"""Tree-shaped partitions of the design points.

A partition is stored as a binary tree of axis-aligned split rules whose
leaves hold sorted index arrays of the design points they contain. Nodes are
never mutated once built; updates create new nodes along the modified path,
so snapshots of a tree are free to keep.

Routing sends a point left when its coordinate is ``<= c``. Rank-based
constructions (k-d trees, equivalent blocks) may need to cut through a run
of tied coordinate values; such a split carries a ``tie`` index and routes a
tied point left only when its row index is ``<= tie``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .errors import BadDimension, EmptyCell, TooShallowData

__all__ = [
    "Node",
    "TreePartition",
    "CellPartition",
    "Ensemble",
    "DiameterSummary",
    "route",
    "split_candidates",
    "assign_cells",
    "build_kd_tree",
    "equivalent_blocks",
    "diameter",
    "threshold_dn",
    "is_n_regular",
    "replace_subtree",
    "merge_labels",
]


class Node:
    """One node of a partition tree.

    ``idx`` holds the sorted row indices of the design points in the node's
    cell. Internal nodes carry the split coordinate ``j`` (0-based), the split
    value ``c`` and the optional tie-break index ``tie``.
    """

    __slots__ = ("idx", "depth", "j", "c", "tie", "left", "right", "_cands")

    def __init__(self, idx, depth, j=None, c=None, tie=None, left=None, right=None):
        self.idx = idx
        self.depth = depth
        self.j = j
        self.c = c
        self.tie = tie
        self.left = left
        self.right = right
        self._cands = None

    def candidates(self, x, j):
        """Cached :func:`split_candidates` of this node's cell along ``j``."""
        if self._cands is None:
            self._cands = [None] * x.shape[1]
        if self._cands[j] is None:
            self._cands[j] = split_candidates(x, self.idx, j)
        return self._cands[j]

    def n_candidates(self, x):
        """Number of admissible split values along every coordinate."""
        return [len(self.candidates(x, j)) for j in range(x.shape[1])]

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def __repr__(self):
        if self.is_leaf:
            return f"Leaf(n={len(self.idx)}, depth={self.depth})"
        return f"Split(j={self.j}, c={self.c}, n={len(self.idx)}, depth={self.depth})"


def route(x, idx, j, c, tie=None):
    """Split ``idx`` by the rule ``(j, c, tie)``; returns ``(left, right)``."""
    v = x[idx, j]
    if tie is None:
        mask = v <= c
    else:
        mask = (v < c) | ((v == c) & (idx <= tie))
    return idx[mask], idx[~mask]


def split_candidates(x, idx, j):
    """Observed values of coordinate ``j`` in the cell that keep both children nonempty."""
    return np.unique(x[idx, j])[:-1]


def _walk(root):
    """Pre-order traversal yielding ``(node, path)``; ``path`` is a tuple of 0/1 turns."""
    stack = [(root, ())]
    while stack:
        node, path = stack.pop()
        yield node, path
        if not node.is_leaf:
            stack.append((node.right, path + (1,)))
            stack.append((node.left, path + (0,)))


def _leaves_in_order(root):
    return [node for node, _ in _walk(root) if node.is_leaf]


def replace_subtree(root, path, new):
    """Return a new root equal to ``root`` with the node at ``path`` replaced by ``new``."""
    if not path:
        return new
    nodes = [root]
    for turn in path[:-1]:
        nodes.append(nodes[-1].right if turn else nodes[-1].left)
    child = new
    for node, turn in zip(reversed(nodes), reversed(path)):
        left, right = (node.left, child) if turn else (child, node.right)
        child = Node(node.idx, node.depth, node.j, node.c, node.tie, left, right)
        child._cands = node._cands
    return child


class CellPartition:
    """Partition of the design rows given by integer cell labels ``0..K-1``."""

    def __init__(self, labels, x):
        labels = np.asarray(labels, dtype=np.intp)
        uniq, inv = np.unique(labels, return_inverse=True)
        self._labels = inv.astype(np.intp)
        self._labels.setflags(write=False)
        self.x = np.asarray(x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self._members = None

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def K(self) -> int:
        return int(self._labels.max()) + 1

    @property
    def n(self) -> int:
        return self._labels.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self._labels, minlength=self.K)

    @property
    def cell_members(self):
        if self._members is None:
            order = np.argsort(self._labels, kind="stable")
            bounds = np.cumsum(self.counts)[:-1]
            self._members = [np.sort(g) for g in np.split(order, bounds)]
        return self._members


class TreePartition(CellPartition):
    """A valid tree-shaped partition over a fixed design.

    Cells are numbered ``0..K-1`` from left to right. Construction checks
    that every cell is nonempty and that the cells cover the design.
    """

    def __init__(self, root: Node, x):
        self.root = root
        self.x = np.asarray(x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.leaves = _leaves_in_order(root)
        n = self.x.shape[0]
        labels = np.full(n, -1, dtype=np.intp)
        for k, leaf in enumerate(self.leaves):
            if len(leaf.idx) == 0:
                raise EmptyCell(f"cell {k} is empty")
            labels[leaf.idx] = k
        if np.any(labels < 0):
            raise EmptyCell("cells do not cover every design point")
        labels.setflags(write=False)
        self._labels = labels
        self._members = [leaf.idx for leaf in self.leaves]

    @property
    def K(self) -> int:
        return len(self.leaves)

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(leaf.idx) for leaf in self.leaves])

    def nodes(self):
        return [node for node, _ in _walk(self.root)]

    def internal_nodes(self):
        return [(node, path) for node, path in _walk(self.root) if not node.is_leaf]

    def leaf_paths(self):
        return [(node, path) for node, path in _walk(self.root) if node.is_leaf]

    @property
    def depth(self) -> int:
        return max(leaf.depth for leaf in self.leaves)

    @property
    def depth_tags(self):
        """``(layer, position)`` for every node in pre-order; children of ``(l, k)`` are ``(l+1, 2k)`` and ``(l+1, 2k+1)``."""
        tags = []
        for node, path in _walk(self.root):
            pos = 0
            for turn in path:
                pos = 2 * pos + turn
            tags.append((len(path), pos))
        return tags

    def check(self) -> None:
        """Assert every partition invariant; raises ``AssertionError`` on violation."""
        seen = np.zeros(self.n, dtype=int)
        for leaf in self.leaves:
            assert len(leaf.idx) > 0
            seen[leaf.idx] += 1
        assert np.all(seen == 1), "cells must be disjoint and exhaustive"
        internal = self.internal_nodes()
        assert len(self.leaves) == len(internal) + 1
        for node, _ in internal:
            assert np.any(self.x[:, node.j] == node.c), "split value must be observed"
            left, right = route(self.x, node.idx, node.j, node.c, node.tie)
            assert np.array_equal(left, node.left.idx) and np.array_equal(right, node.right.idx)
            assert node.left.depth == node.right.depth == node.depth + 1

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        """Canonical form ``{"split": {"j", "c"[, "tie"]}, "left", "right"} | {"leaf": k}`` with 1-based ``j`` and ``k``."""
        counter = iter(range(1, self.K + 1))

        def enc(node):
            if node.is_leaf:
                return {"leaf": next(counter)}
            rule = {"j": node.j + 1, "c": float(node.c)}
            if node.tie is not None:
                rule["tie"] = int(node.tie)
            return {"split": rule, "left": enc(node.left), "right": enc(node.right)}

        return enc(self.root)

    def __eq__(self, other):
        return isinstance(other, TreePartition) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"TreePartition(K={self.K}, n={self.n})"


def _build(topology, x, idx, depth):
    if "leaf" in topology:
        return Node(idx, depth)
    rule = topology["split"]
    j = int(rule["j"]) - 1
    c = float(rule["c"])
    tie = rule.get("tie")
    if not 0 <= j < x.shape[1]:
        raise ValueError(f"split coordinate {j + 1} out of range")
    if not np.any(x[:, j] == c):
        raise ValueError(f"split value {c} is not an observed value of coordinate {j + 1}")
    left, right = route(x, idx, j, c, tie)
    if len(left) == 0 or len(right) == 0:
        raise EmptyCell(f"split (j={j + 1}, c={c}) leaves a child empty")
    return Node(
        idx, depth, j, c, tie,
        _build(topology["left"], x, left, depth + 1),
        _build(topology["right"], x, right, depth + 1),
    )


def assign_cells(topology: dict, design) -> TreePartition:
    """Route the design through a topology given in canonical dict form."""
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    root = _build(topology, x, np.arange(x.shape[0]), 0)
    return TreePartition(root, x)


# ---------------------------------------------------------------------------
# constructions


def _rank_split(x, idx, j, n_left):
    """Send the ``n_left`` smallest points (by value, then row index) left."""
    order = idx[np.lexsort((idx, x[idx, j]))]
    left, right = order[:n_left], order[n_left:]
    c = x[left[-1], j]
    tie = int(left[-1]) if x[right[0], j] == c else None
    return float(c), tie, np.sort(left), np.sort(right)


def build_kd_tree(design, s: int) -> TreePartition:
    """k-d tree with ``s`` rounds over all ``p`` axes (``K = 2**(s*p)`` leaves).

    Each level splits on one axis, cycling ``0..p-1``; a cell of ``m`` points
    passes ``floor(m/2)`` to the left child and ``ceil(m/2)`` to the right.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    levels = s * p
    if s < 0 or n < 2**levels:
        raise TooShallowData(f"need n >= 2**(s*p) = {2**levels}, got n = {n}")

    def grow(idx, depth):
        if depth == levels:
            return Node(idx, depth)
        j = depth % p
        c, tie, left, right = _rank_split(x, idx, j, len(idx) // 2)
        return Node(idx, depth, j, c, tie, grow(left, depth + 1), grow(right, depth + 1))

    return TreePartition(grow(np.arange(n), 0), x)


def equivalent_blocks(design, K: int) -> TreePartition:
    """``K`` consecutive blocks of order statistics; the first ``n mod K`` take the extra point.

    Realised as a left-leaning tree whose root cuts off the last block.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if p != 1:
        raise BadDimension("equivalent blocks need p = 1")
    if not 1 <= K <= n:
        raise ValueError("need 1 <= K <= n")
    order = np.lexsort((np.arange(n), x[:, 0]))
    sizes = np.full(K, n // K)
    sizes[: n % K] += 1
    ends = np.cumsum(sizes)
    blocks = np.split(order, ends[:-1])
    # bottom-up: the node covering blocks 0..r sits at depth K-1-r
    node = Node(np.sort(blocks[0]), K - 1)
    for r in range(1, K):
        depth = K - 1 - r
        left_last = order[ends[r - 1] - 1]
        c = float(x[left_last, 0])
        tie = int(left_last) if x[order[ends[r - 1]], 0] == c else None
        right = Node(np.sort(blocks[r]), depth + 1)
        node = Node(np.sort(order[: ends[r]]), depth, 0, c, tie, node, right)
    return TreePartition(node, x)


# ---------------------------------------------------------------------------
# diameters


@dataclass(frozen=True)
class DiameterSummary:
    per_cell: np.ndarray
    mu: np.ndarray
    total: float


def _cell_diameter(pts):
    m, p = pts.shape
    if m < 2:
        return 0.0
    if p == 1:
        return float(pts.max() - pts.min())
    if m > 64 and p <= 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # degenerate (flat) cell: fall back to all pairs
    return float(pdist(pts).max())


def diameter(partition) -> DiameterSummary:
    """Per-cell maximal pairwise distance, occupancies and ``sqrt(sum mu_k diam_k**2)``."""
    x = partition.x
    labels = partition.labels
    K = partition.K
    n = x.shape[0]
    mu = np.bincount(labels, minlength=K) / n
    if x.shape[1] == 1:
        hi = np.full(K, -np.inf)
        lo = np.full(K, np.inf)
        np.maximum.at(hi, labels, x[:, 0])
        np.minimum.at(lo, labels, x[:, 0])
        per = hi - lo
    else:
        per = np.array([_cell_diameter(x[m]) for m in partition.cell_members])
    total = math.sqrt(float(np.dot(mu, per**2)))
    return DiameterSummary(per, mu, total)


def threshold_dn(alpha: float, n: int, p: int, M: float = 1.0, M_n: float = 1.0) -> float:
    """``(M_n/M)**(1/alpha) * n**(-1/(2 alpha + p)) * log(n)**(1/(2 alpha))`` (natural log)."""
    return (M_n / M) ** (1 / alpha) * n ** (-1 / (2 * alpha + p)) * math.log(n) ** (1 / (2 * alpha))


def is_n_regular(partition, alpha: float, n: int, M: float = 1.0, M_n: float = 1.0) -> bool:
    """Whether ``diam(T) <= d_n(alpha)``."""
    p = partition.x.shape[1]
    return diameter(partition).total <= threshold_dn(alpha, n, p, M, M_n)


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class Ensemble:
    trees: tuple

    def __post_init__(self):
        trees = tuple(self.trees)
        if not trees:
            raise ValueError("an ensemble needs at least one tree")
        object.__setattr__(self, "trees", trees)

    @property
    def T(self) -> int:
        return len(self.trees)

    def merged(self) -> CellPartition:
        """Superimpose all tree partitions; empty intersections simply do not appear."""
        return merge_labels([t.labels for t in self.trees], self.trees[0].x)


def merge_labels(label_sets, x) -> CellPartition:
    code = np.zeros(len(label_sets[0]), dtype=np.int64)
    for lab in label_sets:
        code = code * (int(lab.max()) + 1) + lab
        _, code = np.unique(code, return_inverse=True)
    return CellPartition(code, x)
