"""The online low-recourse forest: inheritance, pinning, and snapshots.

Per arrival the algorithm rebuilds the clustering hierarchy, carries over as
many virtual edges as possible from the previous arrival (an edge survives if
its endpoint clusters are still separate, and its realized original edges are
reused verbatim), completes each level's spanning forest giving priority to
the carried-over edges, and realizes the fresh edges by shortest paths in the
pin-contracted cluster graph. A 1/lambda fraction of every purchased path is
pinned permanently; paths shorter than lambda edges accumulate in a buffer
that pins its single cheapest edge once it reaches lambda entries.

All iteration orders are canonical (levels ascending, edges by endpoint ids)
so a rerun reproduces every snapshot and ledger row exactly.
"""

from __future__ import annotations

import dataclasses

from .clustering import (
    Clustering,
    Hierarchy,
    build_hierarchy,
    check_refinement,
    cluster_distance,
    contract_clustering,
)
from .errors import ConfigError
from .metric import Instance, InstanceView
from .unionfind import UnionFind

Edge = tuple  # (a, b) terminal ids, a < b


def edge_cost(view: InstanceView, e: Edge) -> int:
    return view.d(e[0], e[1])


def recourse_diff(prev, now) -> tuple[int, int]:
    """(insertions, deletions) between two edge sets."""
    prev = set(prev)
    now = set(now)
    return len(now - prev), len(prev - now)


@dataclasses.dataclass
class VirtualEdge:
    """One chosen virtual edge of the level-i spanning forest at arrival t."""

    level: int
    c1: int
    c2: int
    inherited: bool
    parent: tuple[int, int] | None  # endpoints of the parent edge at t-1
    eorig: frozenset
    created_at: int  # arrival whose pinning pass realized eorig

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.c1, self.c2)


class PinnedSet:
    """Growing forest of permanently pinned original edges."""

    def __init__(self):
        self._pin_arrival: dict[Edge, int] = {}
        self._order: list[Edge] = []
        self._uf = UnionFind()

    def add(self, e: Edge, t: int) -> None:
        if e in self._pin_arrival:
            raise AssertionError(f"edge {e} pinned twice (internal bug)")
        if not self._uf.union(e[0], e[1]):
            raise AssertionError(f"pinning {e} would close a cycle (internal bug)")
        self._pin_arrival[e] = t
        self._order.append(e)

    def __contains__(self, e: Edge) -> bool:
        return e in self._pin_arrival

    def __len__(self) -> int:
        return len(self._order)

    def edges(self) -> tuple[Edge, ...]:
        return tuple(self._order)

    def pin_arrival(self, e: Edge) -> int:
        return self._pin_arrival[e]

    def items(self) -> tuple[tuple[Edge, int], ...]:
        return tuple((e, self._pin_arrival[e]) for e in self._order)


@dataclasses.dataclass(frozen=True)
class PinEvent:
    kind: str  # "batch" (floor(|E|/lam) cheapest of a path) or "single" (cheapest of buffer)
    arrival: int
    level: int
    edges: tuple
    cost: int
    source_size: int  # |E_orig| for batch, |B| at pin time for single


@dataclasses.dataclass(frozen=True)
class ArrivalLedger:
    t: int
    insertions: int
    deletions: int
    pins_added: int
    pin_events: tuple
    buffer_end: int


class RecourseLedger:
    def __init__(self):
        self.entries: list[ArrivalLedger] = []

    def record(self, entry: ArrivalLedger) -> None:
        self.entries.append(entry)

    @property
    def insertions_total(self) -> int:
        return sum(e.insertions for e in self.entries)

    @property
    def deletions_total(self) -> int:
        return sum(e.deletions for e in self.entries)


@dataclasses.dataclass(frozen=True)
class Snapshot:
    t: int
    edges: frozenset
    cost: int


class OnlineState:
    """Mutable loop state of the online algorithm (one instance, one lambda)."""

    def __init__(self, instance: Instance, lam: int):
        if lam < 1 or int(lam) != lam:
            raise ConfigError("lambda must be an integer >= 1")
        self.instance = instance
        self.lam = int(lam)
        self.t = 0
        self.hierarchy: Hierarchy | None = None
        self.forest: dict[int, list[VirtualEdge]] = {}
        self.cinh: dict[int, Clustering] = {}
        self.pinned = PinnedSet()
        self.snapshot_edges: frozenset = frozenset()
        self.ledger = RecourseLedger()
        self.last_outcome: ArrivalOutcome | None = None


def classify_inheritance(prev_edges, prev_cl: Clustering, new_cl: Clustering, h_edges):
    """Map the previous level-i forest into inherited edges of H_i^(t).

    A previous edge is inheritable iff its endpoint clusters land in two
    different current clusters; the image edge joins those clusters. When
    several inheritable edges share an image, the parent is the one with the
    lexicographically smallest endpoint pair.
    """
    if prev_edges and not check_refinement(prev_cl, new_cl):
        raise ConfigError("previous clustering does not refine the current one")
    h_set = set(h_edges)
    parents: dict[tuple[int, int], VirtualEdge] = {}
    for pe in sorted(prev_edges, key=lambda e: (e.c1, e.c2)):
        d1 = new_cl.assignment[pe.c1]
        d2 = new_cl.assignment[pe.c2]
        if d1 == d2:
            continue  # non-inheritable: both endpoints merged into one cluster
        img = (d1, d2) if d1 < d2 else (d2, d1)
        if img not in h_set:
            raise AssertionError("inheritable edge image missing from virtual graph (internal bug)")
        if img not in parents:
            parents[img] = pe
    return parents


def select_spanning_forest(h_edges, inherited_images):
    """Spanning forest of H_i preferring inherited edges.

    Kruskal-style scan: inherited edges first (canonical order), then the
    rest, keeping whatever does not close a cycle. Returns (inherited part,
    augmenting part); their union spans every component of H_i.
    """
    uf = UnionFind()
    inherited_set = set(inherited_images)
    f_inh = []
    f_rest = []
    for e in sorted(inherited_set):
        if uf.union(e[0], e[1]):
            f_inh.append(e)
    for e in h_edges:
        if e in inherited_set:
            continue
        if uf.union(e[0], e[1]):
            f_rest.append(e)
    return f_inh, f_rest


def pin_and_realize(view, hier, pending, pinned, lam, t):
    """Realize the fresh virtual edges and grow the pin set.

    `pending` holds the non-inherited forest edges in pinning order (levels
    ascending, canonical within a level). Each is realized by a shortest path
    in the cluster graph contracted by the CURRENT pin set, which grows as
    the loop runs. Long realizations pin their floor(|E|/lambda) cheapest
    edges directly; short ones feed the buffer, which pins its cheapest edge
    whenever it reaches lambda entries. The buffer starts empty each arrival
    and every pin empties it.
    """
    buffer: list[Edge] = []  # multiset: duplicates kept on purpose
    events: list[PinEvent] = []
    for ve in pending:
        cl = hier.clustering(ve.level)
        path = cluster_distance(view, cl.assignment, pinned.edges(), ve.c1, ve.c2)
        eorig = frozenset(path.edges)
        ve.eorig = eorig
        ve.created_at = t
        if path.distance > 1 << (ve.level + 1):
            raise AssertionError("realized path exceeds the level budget (internal bug)")
        if len(eorig) >= lam:
            take = len(eorig) // lam
            chosen = sorted(eorig, key=lambda e: (edge_cost(view, e), e))[:take]
            for e in chosen:
                pinned.add(e, t)
            events.append(PinEvent("batch", t, ve.level, tuple(chosen),
                                   sum(edge_cost(view, e) for e in chosen), len(eorig)))
            buffer.clear()
        else:
            buffer.extend(sorted(eorig))
            if len(buffer) > 2 * lam:
                raise AssertionError("buffer exceeded its momentary 2*lambda bound (internal bug)")
            if len(buffer) >= lam:
                e = min(buffer, key=lambda e: (edge_cost(view, e), e))
                size_at_pin = len(buffer)
                pinned.add(e, t)
                events.append(PinEvent("single", t, ve.level, (e,),
                                       edge_cost(view, e), size_at_pin))
                buffer.clear()
    if len(buffer) >= lam:
        raise AssertionError("buffer not drained at end of arrival (internal bug)")
    return events, len(buffer)


@dataclasses.dataclass
class ArrivalOutcome:
    """Everything advance() produced for one arrival (feeds trace + reports)."""

    t: int
    hierarchy: Hierarchy
    forest: dict
    cinh: dict
    pinned_after: tuple  # ((edge, pin arrival), ...)
    snapshot: Snapshot
    ledger: ArrivalLedger
    cost_pinned: int
    cost_forestforming: int


def advance(state: OnlineState, pair) -> tuple[OnlineState, Snapshot, ArrivalLedger]:
    """Process the next demand pair and rebuild the snapshot.

    Raises ConfigError if `pair` is not the instance's next demand. The
    returned ledger entry carries the arrival's recourse and pin events; the
    full outcome (with hierarchy and forests) lands in state.last_outcome.
    """
    inst = state.instance
    t = state.t + 1
    if t > inst.n or tuple(pair) != inst.demands[t - 1]:
        raise ConfigError(f"pair {pair} is not demand #{t} of the instance")
    view = inst.view(t)
    hier = build_hierarchy(view)
    levels_vec = hier.term_levels
    prev_hier = state.hierarchy

    forest: dict[int, list[VirtualEdge]] = {}
    cinh: dict[int, Clustering] = {}
    pending: list[VirtualEdge] = []
    for i in range(hier.L + 1):
        h_edges = hier.virtual_edges(i)
        prev_edges = state.forest.get(i, ())
        if prev_edges:
            parents = classify_inheritance(prev_edges, prev_hier.clustering(i),
                                           hier.clustering(i), h_edges)
        else:
            parents = {}
        f_inh, f_rest = select_spanning_forest(h_edges, parents.keys())
        cl_i = hier.clustering(i)
        cl_next = hier.clustering(i + 1)

        cinh_i = contract_clustering(cl_i, f_inh, i, levels_vec)
        check = contract_clustering(cl_i, f_inh + f_rest, i + 1, levels_vec)
        if check.assignment != cl_next.assignment:
            raise AssertionError("forest contraction disagrees with hierarchy (internal bug)")
        if len(f_inh) + len(f_rest) != len(cl_i.cluster_ids) - len(cl_next.cluster_ids):
            raise AssertionError("forest size identity broken (internal bug)")
        if len(f_inh) != len(cl_i.cluster_ids) - len(cinh_i.cluster_ids):
            raise AssertionError("inherited forest size identity broken (internal bug)")
        if prev_hier is not None and not check_refinement(prev_hier.clustering(i + 1), cinh_i):
            raise AssertionError("previous C_{i+1} does not refine C_inh (internal bug)")

        inh_set = set(f_inh)
        entries = []
        for e in sorted(f_inh + f_rest):
            if e in inh_set:
                pe = parents[e]
                entries.append(VirtualEdge(i, e[0], e[1], True, pe.endpoints,
                                           pe.eorig, pe.created_at))
            else:
                ve = VirtualEdge(i, e[0], e[1], False, None, frozenset(), t)
                entries.append(ve)
                pending.append(ve)
        forest[i] = entries
        cinh[i] = cinh_i

    events, buffer_end = pin_and_realize(view, hier, pending, state.pinned, state.lam, t)
    pins_added = sum(len(ev.edges) for ev in events)

    F = set(state.pinned.edges())
    cost_ff = 0
    for entries in forest.values():
        for ve in entries:
            c = sum(edge_cost(view, e) for e in ve.eorig)
            if c > 1 << (ve.level + 1):
                raise AssertionError("virtual edge over budget at assembly (internal bug)")
            cost_ff += c
            F.update(ve.eorig)
    F = frozenset(F)

    uf = UnionFind(range(view.num_terminals))
    for a, b in F:
        uf.union(a, b)
    for u, v in view.demands:
        if not uf.connected(u, v):
            raise AssertionError("snapshot infeasible (internal bug)")

    cost_f = sum(edge_cost(view, e) for e in F)
    cost_a = sum(edge_cost(view, e) for e in state.pinned.edges())
    ins, dels = recourse_diff(state.snapshot_edges, F)
    snapshot = Snapshot(t, F, cost_f)
    entry = ArrivalLedger(t, ins, dels, pins_added, tuple(events), buffer_end)
    state.ledger.record(entry)

    state.t = t
    state.hierarchy = hier
    state.forest = forest
    state.cinh = cinh
    state.snapshot_edges = F
    state.last_outcome = ArrivalOutcome(
        t=t,
        hierarchy=hier,
        forest=forest,
        cinh=cinh,
        pinned_after=state.pinned.items(),
        snapshot=snapshot,
        ledger=entry,
        cost_pinned=cost_a,
        cost_forestforming=cost_ff,
    )
    return state, snapshot, entry
