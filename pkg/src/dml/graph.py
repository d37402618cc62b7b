"""Lowering of high-level circuit graphs to flat netlists.

A graph is a set of banks (nodes with a kind and a shape) joined by
stereotyped connectivity patterns. Compilation expands every bank element
into compartments and every edge into synapses, producing a netlist with
stable index maps. Compilation is a pure function of the graph: the same
graph always yields a byte-identical serialized netlist.

Node kinds
----------
* ``latch-bank``  one latch per element.
* ``tonic-bank``  one tonic compartment per element.
* ``gate-bank``   one hard-reset integrator per element; its threshold is
  set to the sum of its incoming weights, so it fires only on a same-step
  coincidence of all its inputs (AND).
* ``srif-bank``   one memory + soft-reset integrator pair per element,
  internally coupled. Edges into the bank deposit charge on the memory
  compartment; edges out of it originate at the integrator output.
* ``port``        no compartments; one external input line per element.

Patterns
--------
* ``one-to-one``     equal shapes, elementwise.
* ``all-to-all``     every source element to every destination element.
* ``gate``           per-element AND of the source with a shared enable
  bank (enable shape must equal a leading prefix of the source shape);
  destination must be a gate-bank of the source's shape.
* ``outer-product``  two sources; destination shape is the concatenation
  of the source shapes. Each destination element is fed through a
  dedicated AND gate of its two coordinates (the gates are owned by the
  edge, not by any bank).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from itertools import product
import numpy as np

from .kernel import (
    HARD,
    LATCH,
    MEMORY,
    SOFT,
    TONIC,
    Compartment,
    InputTap,
    Network,
    Synapse,
)

LATCH_BANK = "latch-bank"
SRIF_BANK = "srif-bank"
GATE_BANK = "gate-bank"
TONIC_BANK = "tonic-bank"
PORT = "port"
NODE_KINDS = (LATCH_BANK, SRIF_BANK, GATE_BANK, TONIC_BANK, PORT)

ONE_TO_ONE = "one-to-one"
ALL_TO_ALL = "all-to-all"
OUTER_PRODUCT = "outer-product"
GATE = "gate"
PATTERNS = (ONE_TO_ONE, ALL_TO_ALL, OUTER_PRODUCT, GATE)


class GraphError(ValueError):
    """Raised for malformed graphs (bad dims, unknown ids, bad patterns)."""


class CompileCycleWarning(UserWarning):
    """A cycle through gated nodes; legitimate for feedback circuits."""


def _as_dims(dims) -> tuple[int, ...]:
    if isinstance(dims, int):
        dims = (dims,)
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise GraphError(f"dims must be positive, got {dims}")
    return dims


def _coords(dims: tuple[int, ...]):
    return product(*(range(d) for d in dims))


def _size(dims: tuple[int, ...]) -> int:
    return int(np.prod(dims))


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    dims: tuple[int, ...]
    params: dict


@dataclass(frozen=True)
class Edge:
    srcs: tuple[str, ...]
    dst: str
    pattern: str
    weight: int
    enable: str | None = None


class CircuitGraph:
    """Builder for bank/edge circuit descriptions."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self._by_id: dict[str, Node] = {}

    def add_node(self, kind: str, dims, id: str | None = None, **params) -> str:
        if kind not in NODE_KINDS:
            raise GraphError(f"unknown node kind {kind!r}")
        dims = _as_dims(dims)
        if id is None:
            id = f"{kind.split('-')[0]}{len(self.nodes)}"
        if id in self._by_id:
            raise GraphError(f"duplicate node id {id!r}")
        if kind == SRIF_BANK:
            theta = int(params.setdefault("theta", 64))
            if theta < 1:
                raise GraphError("srif-bank theta must be >= 1")
            q_init = params.setdefault("q_init", theta // 2)
            if q_init is None:
                params["q_init"] = theta // 2
            elif not 0 <= int(q_init) <= theta:
                raise GraphError("srif-bank q_init must lie in [0, theta]")
        elif params:
            raise GraphError(f"{kind} takes no parameters, got {params}")
        node = Node(id, kind, dims, dict(params))
        self.nodes.append(node)
        self._by_id[id] = node
        return id

    def node(self, id: str) -> Node:
        try:
            return self._by_id[id]
        except KeyError:
            raise GraphError(f"unknown node id {id!r}") from None

    def connect(
        self,
        src,
        dst: str,
        pattern: str,
        weight: int,
        enable: str | None = None,
    ) -> None:
        if pattern not in PATTERNS:
            raise GraphError(f"unknown pattern {pattern!r}")
        if weight == 0:
            raise GraphError("edge weight must be nonzero")
        srcs = tuple(src) if isinstance(src, (tuple, list)) else (src,)
        for s in srcs:
            self.node(s)
        d = self.node(dst)
        if d.kind == PORT:
            raise GraphError("ports are inputs; they cannot be a destination")

        if pattern == OUTER_PRODUCT:
            if len(srcs) != 2:
                raise GraphError("outer-product requires exactly two sources")
            a, b = (self.node(s) for s in srcs)
            if d.dims != a.dims + b.dims:
                raise GraphError(
                    f"outer-product destination dims {d.dims} != "
                    f"{a.dims} x {b.dims}"
                )
            if enable is not None:
                raise GraphError("outer-product takes no enable")
        else:
            if len(srcs) != 1:
                raise GraphError(f"{pattern} takes exactly one source")
            s = self.node(srcs[0])
            if pattern == ONE_TO_ONE and s.dims != d.dims:
                raise GraphError(
                    f"one-to-one requires equal dims, got {s.dims} vs {d.dims}"
                )
            if pattern == GATE:
                if enable is None:
                    raise GraphError("gate pattern requires an enable node")
                e = self.node(enable)
                if d.kind != GATE_BANK:
                    raise GraphError("gate pattern destination must be a gate-bank")
                if s.dims != d.dims:
                    raise GraphError("gate pattern requires src dims == dst dims")
                if e.dims != s.dims[: len(e.dims)]:
                    raise GraphError(
                        f"enable dims {e.dims} must be a prefix of src dims {s.dims}"
                    )
            elif enable is not None:
                raise GraphError(f"{pattern} takes no enable")
        self.edges.append(Edge(srcs, dst, pattern, int(weight), enable))


class IndexMap:
    """(node id, element coordinate, role) -> compartment index.

    The default role is the element's canonical compartment: the latch,
    tonic, or gate compartment, or the integrator output of an srif-bank
    (role ``"out"``); srif-bank elements additionally expose role
    ``"mem"``. Port elements map to external input line indices through
    :meth:`input_line`. Gates owned by outer-product edges are reachable
    under the pseudo-node id ``"<edge-id>:gate"``.
    """

    def __init__(self):
        self._comp: dict[tuple[str, tuple[int, ...], str], int] = {}
        self._inputs: dict[tuple[str, tuple[int, ...]], int] = {}

    def _put(self, node: str, coord, role: str, index: int) -> None:
        self._comp[(node, tuple(coord), role)] = index

    def get(self, node: str, coord=(), role: str = "") -> int:
        key = (node, tuple(coord) if not isinstance(coord, int) else (coord,), role)
        try:
            return self._comp[key]
        except KeyError:
            raise GraphError(f"no compartment for {key}") from None

    def input_line(self, node: str, coord=()) -> int:
        key = (node, tuple(coord) if not isinstance(coord, int) else (coord,))
        try:
            return self._inputs[key]
        except KeyError:
            raise GraphError(f"no input line for {key}") from None

    def array(self, node: str, dims, role: str = "") -> np.ndarray:
        """All compartment indices of a bank, shaped like its dims."""
        dims = _as_dims(dims)
        out = np.empty(dims, dtype=np.int64)
        for c in _coords(dims):
            out[c] = self.get(node, c, role)
        return out

    def input_array(self, node: str, dims) -> np.ndarray:
        dims = _as_dims(dims)
        out = np.empty(dims, dtype=np.int64)
        for c in _coords(dims):
            out[c] = self.input_line(node, c)
        return out

    def items(self):
        return self._comp.items()


@dataclass
class Netlist:
    """Flat compiled program: compartments, synapses, input taps, maps."""

    compartments: list[Compartment]
    synapses: list[Synapse]
    inputs: list[InputTap]
    init_charges: list[tuple[int, int]]
    index: IndexMap

    @property
    def n_compartments(self) -> int:
        return len(self.compartments)

    @property
    def n_synapses(self) -> int:
        return len(self.synapses)

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    def report(self) -> dict:
        return {
            "compartments": self.n_compartments,
            "synapses": self.n_synapses,
            "inputs": self.n_inputs,
        }

    def build(self, use_numba: bool | None = None) -> Network:
        """Instantiate simulation state and apply initial memory charges."""
        net = Network(
            self.compartments, self.synapses, self.inputs, use_numba=use_numba
        )
        for idx, q in self.init_charges:
            net.set_memory_charge(idx, q)
        return net

    def to_json(self) -> str:
        doc = {
            "compartments": [
                {"kind": c.kind, "threshold": c.threshold}
                for c in self.compartments
            ],
            "synapses": [
                {"pre": s.pre, "post": s.post, "weight": s.weight}
                for s in self.synapses
            ],
            "inputs": [
                [[p, w] for p, w in zip(t.posts, t.weights)] for t in self.inputs
            ],
            "init": [[i, q] for i, q in self.init_charges],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "Netlist":
        doc = json.loads(text)
        comps = [
            Compartment(c["kind"], c["threshold"]) for c in doc["compartments"]
        ]
        syns = [Synapse(s["pre"], s["post"], s["weight"]) for s in doc["synapses"]]
        taps = [
            InputTap(tuple(p for p, _ in tap), tuple(w for _, w in tap))
            for tap in doc["inputs"]
        ]
        init = [(i, q) for i, q in doc["init"]]
        return Netlist(comps, syns, taps, init, IndexMap())


_GATE_INPUT_W = 1  # charge quantum per gate input; thresholds count inputs


def compile_graph(g: CircuitGraph) -> Netlist:
    """Lower a circuit graph to a netlist.

    Deterministic ordering: compartments follow node insertion order with
    elements in row-major coordinate order (srif elements as mem, out),
    then edge-owned gates in edge order; synapses follow the same scheme.
    """
    index = IndexMap()
    comps: list[Compartment] = []
    syns: list[Synapse] = []
    init: list[tuple[int, int]] = []
    n_lines = 0
    tap_entries: dict[int, list[tuple[int, int]]] = {}

    def new_comp(c: Compartment) -> int:
        comps.append(c)
        return len(comps) - 1

    for node in g.nodes:
        if node.kind == PORT:
            for c in _coords(node.dims):
                index._inputs[(node.id, c)] = n_lines
                tap_entries[n_lines] = []
                n_lines += 1
            continue
        for c in _coords(node.dims):
            tag = f"{node.id}{list(c)}"
            if node.kind == LATCH_BANK:
                index._put(node.id, c, "", new_comp(Compartment(LATCH, label=tag)))
            elif node.kind == TONIC_BANK:
                index._put(node.id, c, "", new_comp(Compartment(TONIC, label=tag)))
            elif node.kind == GATE_BANK:
                # threshold patched after edge expansion
                index._put(node.id, c, "", new_comp(Compartment(HARD, 1, label=tag)))
            elif node.kind == SRIF_BANK:
                theta = node.params["theta"]
                m = new_comp(Compartment(MEMORY, theta, label=f"{tag}.mem"))
                o = new_comp(Compartment(SOFT, theta, label=f"{tag}.out"))
                index._put(node.id, c, "mem", m)
                index._put(node.id, c, "", o)
                index._put(node.id, c, "out", o)
                syns.append(Synapse(m, o, 1))
                init.append((m, int(node.params["q_init"])))

    def src_ref(node: Node, coord):
        """(is_line, index) of the element's output."""
        if node.kind == PORT:
            return True, index.input_line(node.id, coord)
        if node.kind == SRIF_BANK:
            return False, index.get(node.id, coord, "out")
        return False, index.get(node.id, coord, "")

    def dst_ref(node: Node, coord) -> int:
        if node.kind == SRIF_BANK:
            return index.get(node.id, coord, "mem")
        return index.get(node.id, coord, "")

    def attach(src, dst: int, weight: int):
        is_line, i = src
        if is_line:
            tap_entries[i].append((dst, weight))
        else:
            syns.append(Synapse(i, dst, weight))

    for k, edge in enumerate(g.edges):
        dst = g.node(edge.dst)
        if edge.pattern == ONE_TO_ONE:
            src = g.node(edge.srcs[0])
            for c in _coords(src.dims):
                attach(src_ref(src, c), dst_ref(dst, c), edge.weight)
        elif edge.pattern == ALL_TO_ALL:
            src = g.node(edge.srcs[0])
            for cs in _coords(src.dims):
                ref = src_ref(src, cs)
                for cd in _coords(dst.dims):
                    attach(ref, dst_ref(dst, cd), edge.weight)
        elif edge.pattern == GATE:
            src = g.node(edge.srcs[0])
            en = g.node(edge.enable)
            ndims_en = len(en.dims)
            for c in _coords(src.dims):
                gi = dst_ref(dst, c)
                attach(src_ref(src, c), gi, edge.weight)
                attach(src_ref(en, c[:ndims_en]), gi, edge.weight)
        elif edge.pattern == OUTER_PRODUCT:
            a, b = (g.node(s) for s in edge.srcs)
            eid = f"edge{k}:gate"
            for ca in _coords(a.dims):
                ra = src_ref(a, ca)
                for cb in _coords(b.dims):
                    gi = new_comp(
                        Compartment(
                            HARD,
                            2 * _GATE_INPUT_W,
                            label=f"{eid}{list(ca + cb)}",
                        )
                    )
                    index._put(eid, ca + cb, "", gi)
                    attach(ra, gi, _GATE_INPUT_W)
                    attach(src_ref(b, cb), gi, _GATE_INPUT_W)
                    syns.append(Synapse(gi, dst_ref(dst, ca + cb), edge.weight))

    # patch gate-bank thresholds: one full set of coincident inputs fires
    incoming: dict[int, int] = {}
    for s in syns:
        incoming[s.post] = incoming.get(s.post, 0) + s.weight
    for line, entries in tap_entries.items():
        for p, w in entries:
            incoming[p] = incoming.get(p, 0) + w
    for node in g.nodes:
        if node.kind != GATE_BANK:
            continue
        for c in _coords(node.dims):
            i = index.get(node.id, c, "")
            total = incoming.get(i, 0)
            if total < 0:
                raise GraphError(
                    f"gate {node.id}{list(c)} has net-negative input weight"
                )
            comps[i] = Compartment(HARD, max(total, 1), label=comps[i].label)

    _warn_on_cycles(g)

    taps = [
        InputTap(tuple(p for p, _ in tap_entries[i]), tuple(w for _, w in tap_entries[i]))
        for i in range(n_lines)
    ]
    return Netlist(comps, syns, taps, init, index)


def _warn_on_cycles(g: CircuitGraph) -> None:
    adj: dict[str, set[str]] = {n.id: set() for n in g.nodes}
    for e in g.edges:
        for s in e.srcs:
            adj[s].add(e.dst)
        if e.enable is not None:
            adj[e.enable].add(e.dst)
    color: dict[str, int] = {}

    def dfs(u: str) -> bool:
        color[u] = 1
        for v in adj[u]:
            if color.get(v, 0) == 1:
                return True
            if color.get(v, 0) == 0 and dfs(v):
                return True
        color[u] = 2
        return False

    for n in g.nodes:
        if color.get(n.id, 0) == 0 and dfs(n.id):
            warnings.warn(
                "circuit graph contains a feedback cycle (legitimate for "
                "value-circuit feedback); compiling anyway",
                CompileCycleWarning,
                stacklevel=3,
            )
            return
