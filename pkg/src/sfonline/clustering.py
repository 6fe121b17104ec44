"""Agglomerative clustering hierarchy over a terminal metric.

Per arrival the hierarchy is rebuilt from scratch: starting from the trivial
clustering, level i merges the connected components of the level-i virtual
graph, whose vertices are the i-active clusters (cluster level >= i) and
whose edges join active clusters at contracted distance strictly below
2^(i+1). A terminal's level is ceil(log2 dist(v, mate(v))), computed via bit
length so there is no floating point anywhere.

Everything here is deterministic: cluster ids are the minimum member
terminal id, edges are ordered by (min endpoint, max endpoint), and
shortest-path ties are broken toward the lexicographically smallest
super-node sequence.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConfigError
from .metric import InstanceView, mate
from .unionfind import UnionFind

MAX_LEVEL = 63


def terminal_level(view: InstanceView, v: int) -> int:
    """ceil(log2 dist(v, mate(v))), exact integer arithmetic."""
    d = view.d(v, mate(v))
    return (d - 1).bit_length()


def terminal_levels(view: InstanceView) -> tuple[int, ...]:
    return tuple(terminal_level(view, v) for v in range(view.num_terminals))


class Clustering:
    """A partition of the arrived terminals at hierarchy level i.

    assignment[k] is the cluster id of terminal k; cluster ids are canonical
    (minimum member id). Cluster level is the max member level; a cluster is
    active at level j iff its level >= j (flags stored for j = self.i).
    """

    __slots__ = ("t", "i", "assignment", "cluster_ids", "members", "cluster_level", "active")

    def __init__(self, t, i, assignment, term_levels):
        T = 2 * t
        if len(assignment) != T or len(term_levels) < T:
            raise ConfigError("assignment/levels length mismatch with t")
        groups: dict[int, list[int]] = {}
        for k, cid in enumerate(assignment):
            groups.setdefault(cid, []).append(k)
        # Canonicalize: cluster id = min member.
        members = {min(ms): tuple(ms) for ms in groups.values()}
        canon = {}
        for cid, ms in members.items():
            for k in ms:
                canon[k] = cid
        self.t = t
        self.i = i
        self.assignment = tuple(canon[k] for k in range(T))
        self.cluster_ids = tuple(sorted(members))
        self.members = members
        self.cluster_level = {cid: max(term_levels[k] for k in ms) for cid, ms in members.items()}
        self.active = {cid: self.cluster_level[cid] >= i for cid in self.cluster_ids}

    def cluster_of(self, k: int) -> int:
        return self.assignment[k]

    def active_ids(self, i: int | None = None) -> tuple[int, ...]:
        j = self.i if i is None else i
        return tuple(cid for cid in self.cluster_ids if self.cluster_level[cid] >= j)

    def same_partition(self, other: "Clustering") -> bool:
        return self.assignment == other.assignment


def make_clustering(view: InstanceView, i: int, assignment, term_levels=None) -> Clustering:
    if term_levels is None:
        term_levels = terminal_levels(view)
    return Clustering(view.t, i, assignment, term_levels)


def trivial_clustering(view: InstanceView, term_levels=None) -> Clustering:
    return make_clustering(view, 0, tuple(range(view.num_terminals)), term_levels)


def contract_clustering(cl: Clustering, cluster_edges, new_i: int, term_levels) -> Clustering:
    """Merge clusters joined by (cid1, cid2) edges; result labelled new_i."""
    uf = UnionFind(cl.cluster_ids)
    for c1, c2 in cluster_edges:
        uf.union(c1, c2)
    assignment = tuple(uf.find(cid) for cid in cl.assignment)
    return Clustering(cl.t, new_i, assignment, term_levels)


def check_refinement(fine: Clustering, coarse: Clustering) -> bool:
    """True iff every fine cluster is contained in one coarse cluster."""
    if fine.t > coarse.t:
        raise ConfigError("fine clustering covers terminals the coarse one lacks")
    for ms in fine.members.values():
        target = coarse.assignment[ms[0]]
        if any(coarse.assignment[k] != target for k in ms[1:]):
            return False
    return True


def contracted_weights(dist: np.ndarray, assignment) -> tuple[tuple[int, ...], np.ndarray]:
    """Super-edge weight matrix of the contracted graph.

    W[p, q] = min original distance between members of cluster ids[p] and
    ids[q]; zero diagonal. The graph is complete, so W is finite everywhere.
    """
    asn = np.asarray(assignment)
    ids = tuple(sorted(set(assignment)))
    K = len(ids)
    T = len(assignment)
    rows = np.empty((K, T), dtype=np.int64)
    for k, cid in enumerate(ids):
        rows[k] = dist[asn == cid].min(axis=0)
    W = np.empty((K, K), dtype=np.int64)
    for k, cid in enumerate(ids):
        W[:, k] = rows[:, asn == cid].min(axis=1)
    np.fill_diagonal(W, 0)
    return ids, W


def floyd_warshall(W: np.ndarray) -> np.ndarray:
    D = W.copy()
    for k in range(len(D)):
        np.minimum(D, D[:, k, None] + D[None, k, :], out=D)
    return D


@dataclasses.dataclass(frozen=True)
class ClusterPath:
    """Shortest super-node path with one realized original edge per hop."""

    distance: int
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]


def _super_assignment(assignment, contracted_by):
    """Compose cluster assignment with union-find over contracted edges."""
    uf = UnionFind(set(assignment))
    for a, b in contracted_by:
        uf.union(assignment[a], assignment[b])
    return tuple(uf.find(cid) for cid in assignment), uf


def _realize_hop(dist, members_p, members_q):
    """Cheapest original edge between two super-nodes.

    Ties broken by the lexicographically smallest normalized (min, max) pair.
    """
    best = None
    for a in members_p:
        row = dist[a]
        for b in members_q:
            key = (int(row[b]), (a, b) if a < b else (b, a))
            if best is None or key < best:
                best = key
    return best  # (weight, edge)


def cluster_distance(view: InstanceView, assignment, contracted_by, C1: int, C2: int) -> ClusterPath:
    """Shortest path between two clusters in the doubly contracted graph.

    The graph contracts each cluster of `assignment` to a vertex, then merges
    vertices joined by the original edges in `contracted_by`. Returns the
    distance together with the realized original edge of every hop; ties go
    to the lexicographically smallest super-node id sequence.
    """
    if C1 not in assignment or C2 not in assignment:
        raise ConfigError(f"cluster {C1 if C1 not in assignment else C2} not in clustering")
    T = view.num_terminals
    for a, b in contracted_by:
        if a >= T or b >= T:
            raise ConfigError("contracted_by touches a terminal that has not arrived")
    sup, uf = _super_assignment(assignment, contracted_by)
    src, dst = uf.find(C1), uf.find(C2)
    if src == dst:
        return ClusterPath(0, (src,), ())

    dist = view.dist_matrix()
    ids, W = contracted_weights(dist, sup)
    pos = {cid: k for k, cid in enumerate(ids)}
    D = floyd_warshall(W)
    si, di = pos[src], pos[dst]
    total = int(D[si, di])

    members = {cid: [] for cid in ids}
    for k, cid in enumerate(sup):
        members[cid].append(k)

    # Greedy walk: always step to the smallest super id that still completes
    # a shortest path; super-edge weights are >= 1 so this terminates.
    nodes = [src]
    edges = []
    cur = src
    sofar = 0
    while cur != dst:
        ci = pos[cur]
        nxt = None
        for q in ids:
            if q == cur:
                continue
            qi = pos[q]
            if sofar + int(W[ci, qi]) + int(D[qi, di]) == total:
                nxt = q
                break
        if nxt is None:
            raise AssertionError("shortest-path walk stalled (internal bug)")
        w, edge = _realize_hop(dist, members[cur], members[nxt])
        if w != int(W[pos[cur], pos[nxt]]):
            raise AssertionError("realized hop weight mismatch (internal bug)")
        sofar += w
        edges.append(edge)
        nodes.append(nxt)
        cur = nxt
    if sofar != total:
        raise AssertionError("path length mismatch (internal bug)")
    return ClusterPath(total, tuple(nodes), tuple(edges))


def level_threshold(i: int) -> int:
    # Distances are capped at 2^62 - 1, so clamping the threshold there keeps
    # the comparison exact while staying inside int64.
    return min(1 << (i + 1), 1 << 62)


def _active_virtual_edges(D, ids, cl: Clustering, i: int):
    """Edges of H_i given contracted distances D over `ids` (canonical order)."""
    act = [cid for cid in ids if cl.cluster_level[cid] >= i]
    if len(act) < 2:
        return (), act
    pos = {cid: k for k, cid in enumerate(ids)}
    ai = np.array([pos[c] for c in act])
    sub = D[np.ix_(ai, ai)]
    hit = np.argwhere(np.triu(sub < level_threshold(i), k=1))
    return tuple((act[x], act[y]) for x, y in hit), act


def virtual_graph(view: InstanceView, cl: Clustering) -> tuple[tuple[int, int], ...]:
    """Level-i virtual edges: i-active cluster pairs at contracted distance < 2^(i+1)."""
    ids, W = contracted_weights(view.dist_matrix(), cl.assignment)
    D = floyd_warshall(W)
    edges, _ = _active_virtual_edges(D, ids, cl, cl.i)
    return edges


@dataclasses.dataclass(frozen=True)
class Hierarchy:
    """Per-arrival clustering hierarchy C_0 .. C_{L+1} plus virtual graphs."""

    t: int
    L: int
    clusterings: tuple[Clustering, ...]  # length L + 2
    vgraphs: tuple[tuple[tuple[int, int], ...], ...]  # length L + 1
    term_levels: tuple[int, ...]

    def clustering(self, i: int) -> Clustering:
        # Levels above the top alias C_{L+1} (with an empty virtual graph).
        return self.clusterings[min(i, self.L + 1)]

    def virtual_edges(self, i: int) -> tuple[tuple[int, int], ...]:
        return self.vgraphs[i] if i <= self.L else ()

    @property
    def top(self) -> Clustering:
        return self.clusterings[self.L + 1]


def build_hierarchy(view: InstanceView) -> Hierarchy:
    """Run the clustering procedure for one arrival prefix.

    Contracted distances are recomputed only after levels that merged
    something; a level that merges nothing keeps the same partition and
    therefore the same contracted metric.
    """
    if view.t < 1:
        raise ConfigError("hierarchy needs at least one arrived pair")
    levels = terminal_levels(view)
    L = max(levels)
    dist = view.dist_matrix()

    cl = trivial_clustering(view, levels)
    clusterings = [cl]
    vgraphs = []
    ids = None
    D = None
    for i in range(L + 1):
        if D is None:
            ids, W = contracted_weights(dist, cl.assignment)
            D = floyd_warshall(W)
        edges, act = _active_virtual_edges(D, ids, cl, i)

        # Distinct i-active clusters must sit at contracted distance >= 2^i:
        # level i-1 already merged anything closer.
        if len(act) >= 2:
            pos = {cid: k for k, cid in enumerate(ids)}
            ai = np.array([pos[c] for c in act])
            sub = D[np.ix_(ai, ai)].copy()
            np.fill_diagonal(sub, np.iinfo(np.int64).max)
            if int(sub.min()) < min(1 << i, 1 << 62):
                raise AssertionError(f"active clusters too close at level {i} (internal bug)")

        vgraphs.append(edges)
        if edges:
            cl = contract_clustering(cl, edges, i + 1, levels)
            D = None
        else:
            cl = Clustering(view.t, i + 1, cl.assignment, levels)
        clusterings.append(cl)

    top = clusterings[-1]
    for u, v in view.demands:
        if top.assignment[u] != top.assignment[v]:
            raise AssertionError("demand pair split at the top clustering (internal bug)")
    return Hierarchy(view.t, L, tuple(clusterings), tuple(vgraphs), levels)


def dump_hierarchy(h: Hierarchy) -> str:
    """Stable debug dump: one line per (level, cluster)."""
    lines = []
    for i, cl in enumerate(h.clusterings):
        for cid in cl.cluster_ids:
            tag = "active" if cl.cluster_level[cid] >= i else "inactive"
            ms = " ".join(str(k) for k in cl.members[cid])
            lines.append(f"{i} | {cid}: {ms} [{tag}]")
    return "\n".join(lines) + "\n"
