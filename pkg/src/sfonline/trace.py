"""Run driver and on-disk traces.

A run trace is everything the certifier needs to re-verify a run without
re-executing it: per arrival, the clustering hierarchy, the chosen forests
with their realized edge sets, the intermediate inherited-only clusterings,
the pin set, and the snapshot. On disk a trace is a directory of plain-text
files (instance + meta + one JSON document per arrival), so runs and
certification are decoupled and traces from other implementations can be
checked for conformance.
"""

from __future__ import annotations

import dataclasses
import json
import os

from .clustering import (
    Hierarchy,
    _active_virtual_edges,
    contracted_weights,
    floyd_warshall,
    make_clustering,
    terminal_levels,
)
from .errors import ConfigError, FormatError
from .forest import (
    ArrivalLedger,
    ArrivalOutcome,
    OnlineState,
    PinEvent,
    RecourseLedger,
    Snapshot,
    VirtualEdge,
    advance,
    recourse_diff,
)
from .metric import Instance, load_instance_file, save_instance_file

TRACE_FORMAT = 1


@dataclasses.dataclass
class RunTrace:
    instance: Instance
    lam: int
    arrivals: list  # ArrivalOutcome per arrival
    ledger: RecourseLedger
    nhat_doubling: bool = False

    @property
    def n(self) -> int:
        return self.instance.n

    def final(self) -> ArrivalOutcome:
        return self.arrivals[-1]


def run_online(instance: Instance, lam: int, nhat_doubling: bool = False) -> RunTrace:
    """Run the online algorithm over the full demand sequence.

    With nhat_doubling the run pretends n is unknown: whenever the arrival
    count exceeds the current estimate the estimate doubles and the algorithm
    restarts on the whole prefix. Recourse is then measured on the visible
    snapshots (the restarted internals are not charged edge by edge).
    """
    if not nhat_doubling:
        state = OnlineState(instance, lam)
        outcomes = []
        for pair in instance.demands:
            advance(state, pair)
            outcomes.append(state.last_outcome)
        return RunTrace(instance, lam, outcomes, state.ledger)

    nhat = 1
    state = OnlineState(instance, lam)
    visible = frozenset()
    ledger = RecourseLedger()
    outcomes = []
    for t, pair in enumerate(instance.demands, 1):
        if t > nhat:
            nhat *= 2
            state = OnlineState(instance, lam)
            for p in instance.demands[: t - 1]:
                advance(state, p)
        advance(state, pair)
        out = state.last_outcome
        ins, dels = recourse_diff(visible, out.snapshot.edges)
        entry = ArrivalLedger(t, ins, dels, out.ledger.pins_added,
                              out.ledger.pin_events, out.ledger.buffer_end)
        ledger.record(entry)
        out = dataclasses.replace(out, ledger=entry)
        outcomes.append(out)
        visible = out.snapshot.edges
    return RunTrace(instance, lam, outcomes, ledger, nhat_doubling=True)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _edge_list(edges):
    return [list(e) for e in sorted(edges)]


def _arrival_payload(out: ArrivalOutcome) -> dict:
    h = out.hierarchy
    led = out.ledger
    return {
        "t": out.t,
        "L": h.L,
        "clusterings": [
            [list(cl.members[cid]) for cid in cl.cluster_ids] for cl in h.clusterings
        ],
        "forest": {
            str(i): [
                {
                    "c1": ve.c1,
                    "c2": ve.c2,
                    "inherited": ve.inherited,
                    "parent": list(ve.parent) if ve.parent else None,
                    "eorig": _edge_list(ve.eorig),
                    "created_at": ve.created_at,
                }
                for ve in entries
            ]
            for i, entries in sorted(out.forest.items())
        },
        "cinh": {
            str(i): [list(cl.members[cid]) for cid in cl.cluster_ids]
            for i, cl in sorted(out.cinh.items())
        },
        "pinned": [[list(e), pt] for e, pt in out.pinned_after],
        "snapshot": _edge_list(out.snapshot.edges),
        "cost_f": out.snapshot.cost,
        "cost_pinned": out.cost_pinned,
        "cost_forestforming": out.cost_forestforming,
        "ledger": {
            "insertions": led.insertions,
            "deletions": led.deletions,
            "pins_added": led.pins_added,
            "buffer_end": led.buffer_end,
            "pin_events": [
                {
                    "kind": ev.kind,
                    "level": ev.level,
                    "edges": _edge_list(ev.edges),
                    "cost": ev.cost,
                    "source_size": ev.source_size,
                }
                for ev in led.pin_events
            ],
        },
    }


def save_trace(trace: RunTrace, dirpath) -> None:
    os.makedirs(dirpath, exist_ok=True)
    save_instance_file(trace.instance, os.path.join(dirpath, "instance.sfo"))
    meta = {
        "format": TRACE_FORMAT,
        "lam": trace.lam,
        "n": trace.n,
        "arrivals": len(trace.arrivals),
        "nhat_doubling": trace.nhat_doubling,
    }
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    for out in trace.arrivals:
        path = os.path.join(dirpath, f"arrival_{out.t:04d}.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_arrival_payload(out), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")


def _clustering_from_members(view, i, member_lists, levels):
    T = view.num_terminals
    assignment = [None] * T
    for ms in member_lists:
        cid = min(ms)
        for k in ms:
            if not 0 <= k < T or assignment[k] is not None:
                raise FormatError(f"cluster member {k} invalid or repeated in trace")
        for k in ms:
            assignment[k] = cid
    if any(a is None for a in assignment):
        raise FormatError("trace clustering does not cover all arrived terminals")
    return make_clustering(view, i, tuple(assignment), levels)


def _hierarchy_from_payload(view, payload, levels) -> Hierarchy:
    L = payload["L"]
    stored = payload["clusterings"]
    if len(stored) != L + 2:
        raise FormatError(f"trace stores {len(stored)} clusterings, wants L+2 = {L + 2}")
    clusterings = tuple(
        _clustering_from_members(view, i, member_lists, levels)
        for i, member_lists in enumerate(stored)
    )
    # Virtual graphs are definitional; recompute them from the recorded
    # clusterings so conformance checks see the same H_i any implementation
    # must have used.
    dist = view.dist_matrix()
    vgraphs = []
    prev_assignment = None
    ids = D = None
    for i in range(L + 1):
        cl = clusterings[i]
        if cl.assignment != prev_assignment:
            ids, W = contracted_weights(dist, cl.assignment)
            D = floyd_warshall(W)
            prev_assignment = cl.assignment
        edges, _ = _active_virtual_edges(D, ids, cl, i)
        vgraphs.append(edges)
    return Hierarchy(view.t, L, clusterings, tuple(vgraphs), levels)


def load_trace(dirpath) -> RunTrace:
    meta_path = os.path.join(dirpath, "meta.json")
    if not os.path.exists(meta_path):
        raise FormatError(f"no meta.json under {dirpath}")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != TRACE_FORMAT:
        raise FormatError(f"unsupported trace format {meta.get('format')!r}")
    instance = load_instance_file(os.path.join(dirpath, "instance.sfo"))
    lam = int(meta["lam"])
    count = int(meta["arrivals"])

    outcomes = []
    ledger = RecourseLedger()
    for t in range(1, count + 1):
        path = os.path.join(dirpath, f"arrival_{t:04d}.json")
        if not os.path.exists(path):
            raise FormatError(f"missing arrival file {path}")
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload["t"] != t:
            raise FormatError(f"arrival file {path} stores t={payload['t']}")
        view = instance.view(t)
        levels = terminal_levels(view)
        hier = _hierarchy_from_payload(view, payload, levels)
        forest = {}
        for key, entries in payload["forest"].items():
            i = int(key)
            forest[i] = [
                VirtualEdge(
                    level=i,
                    c1=rec["c1"],
                    c2=rec["c2"],
                    inherited=rec["inherited"],
                    parent=tuple(rec["parent"]) if rec["parent"] else None,
                    eorig=frozenset(tuple(e) for e in rec["eorig"]),
                    created_at=rec["created_at"],
                )
                for rec in entries
            ]
        cinh = {
            int(key): _clustering_from_members(view, int(key), member_lists, levels)
            for key, member_lists in payload["cinh"].items()
        }
        pinned_after = tuple((tuple(e), pt) for e, pt in payload["pinned"])
        snapshot = Snapshot(t, frozenset(tuple(e) for e in payload["snapshot"]),
                            payload["cost_f"])
        led = payload["ledger"]
        entry = ArrivalLedger(
            t=t,
            insertions=led["insertions"],
            deletions=led["deletions"],
            pins_added=led["pins_added"],
            pin_events=tuple(
                PinEvent(ev["kind"], t, ev["level"],
                         tuple(tuple(e) for e in ev["edges"]), ev["cost"], ev["source_size"])
                for ev in led["pin_events"]
            ),
            buffer_end=led["buffer_end"],
        )
        ledger.record(entry)
        outcomes.append(ArrivalOutcome(
            t=t,
            hierarchy=hier,
            forest=forest,
            cinh=cinh,
            pinned_after=pinned_after,
            snapshot=snapshot,
            ledger=entry,
            cost_pinned=payload["cost_pinned"],
            cost_forestforming=payload["cost_forestforming"],
        ))
    if len(outcomes) == 0:
        raise ConfigError("trace holds no arrivals")
    return RunTrace(instance, lam, outcomes, ledger,
                    nhat_doubling=bool(meta.get("nhat_doubling", False)))
