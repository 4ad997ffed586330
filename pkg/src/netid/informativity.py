"""Generic data informativity from vertex-disjoint path counts.

Signals are vertices: ``w1..wL`` for the nodes and ``e1..ep``, ``r1..rK``
for the external sources. A path check asks for a number of directed
paths from a source set to a sink set that share no vertex, endpoints
included. Counting uses unit-capacity max-flow on the vertex-split graph.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .exceptions import ModelError
from .netmodel import NetworkModel, RationalTF

Path = Tuple[str, ...]


@dataclass(frozen=True)
class SignalGraph:
    """Directed graph of named vertices; sources have no incoming edges."""

    vertices: Tuple[str, ...]
    edges: frozenset

    def successors(self, v: str) -> List[str]:
        return sorted(b for (a, b) in self.edges if a == v)

    def has_path(self, path: Sequence[str]) -> bool:
        return all(v in self.vertices for v in path) and \
            all((a, b) in self.edges for a, b in zip(path, path[1:]))

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[str, str]], vertices=()):
        edges = frozenset(edges)
        vs = set(vertices) | {v for e in edges for v in e}
        return cls(tuple(sorted(vs, key=_vertex_key)), edges)

    @classmethod
    def from_model(cls, model: NetworkModel) -> "SignalGraph":
        vs = [f"w{j + 1}" for j in range(model.L)] + [f"e{s + 1}" for s in range(model.p)] + \
             [f"r{k + 1}" for k in range(model.K)]
        edges = {(f"w{l + 1}", f"w{j + 1}") for (j, l) in model.G}
        edges |= {(f"e{s + 1}", f"w{j + 1}") for (j, s) in model.H}
        edges |= {(f"r{k + 1}", f"w{j + 1}") for (j, k) in model.R}
        return cls(tuple(vs), frozenset(edges))


def _vertex_key(v: str):
    head, tail = v[:1], v[1:]
    return (head, int(tail)) if tail.isdigit() else (head, 0, tail)


def max_disjoint_paths(graph: SignalGraph, sources: Iterable[str],
                       sinks: Iterable[str]) -> Tuple[int, List[Path]]:
    """Maximum number of vertex-disjoint source-to-sink paths and one witness set.

    Each vertex is split into an in and an out half joined by a unit
    capacity arc; BFS augmenting paths give the integral max-flow. A vertex
    that is both source and sink is a path of length zero.
    """
    sources = [v for v in dict.fromkeys(sources) if v in graph.vertices]
    sinks = set(v for v in sinks if v in graph.vertices)
    if not sources or not sinks:
        return 0, []
    S, T = ("S",), ("T",)
    cap: Dict[tuple, Dict[tuple, int]] = {}

    def arc(a, b):
        cap.setdefault(a, {}).setdefault(b, 0)
        cap.setdefault(b, {}).setdefault(a, 0)
        cap[a][b] += 1

    for v in graph.vertices:
        arc((v, "in"), (v, "out"))
    for a, b in sorted(graph.edges):
        arc((a, "out"), (b, "in"))
    for v in sources:
        arc(S, (v, "in"))
    for v in sorted(sinks, key=_vertex_key):
        arc((v, "out"), T)

    orig = {a: dict(d) for a, d in cap.items()}
    flow = 0
    while True:
        prev = {S: None}
        queue = deque([S])
        while queue and T not in prev:
            a = queue.popleft()
            for b, c in cap[a].items():
                if c > 0 and b not in prev:
                    prev[b] = a
                    queue.append(b)
        if T not in prev:
            break
        b = T
        while prev[b] is not None:
            a = prev[b]
            cap[a][b] -= 1
            cap[b][a] += 1
            b = a
        flow += 1

    # flow decomposition: follow saturated original arcs from each used source
    flow_on = {(a, b): orig[a][b] - cap[a][b] for a in orig for b in orig[a] if orig[a][b] > 0}
    witness = []
    for v in sources:
        if flow_on.get((S, (v, "in")), 0) <= 0:
            continue
        path, node = [v], (v, "out")
        while flow_on.get((node, T), 0) <= 0:
            nxt = min((b for (a, b), f in flow_on.items() if a == node and f > 0),
                      key=lambda x: _vertex_key(x[0]))
            flow_on[(node, nxt)] -= 1
            node = (nxt[0], "out")
            path.append(node[0])
        flow_on[(node, T)] -= 1
        witness.append(tuple(path))
    return flow, witness


def verify_witness(graph: SignalGraph, paths: Sequence[Path], sources, sinks) -> bool:
    """Paths exist edge by edge, run source to sink and are pairwise vertex-disjoint."""
    sources, sinks = set(sources), set(sinks)
    seen = set()
    for p in paths:
        if not p or p[0] not in sources or p[-1] not in sinks or not graph.has_path(p):
            return False
        if seen & set(p) or len(set(p)) != len(p):
            return False
        seen |= set(p)
    return True


@dataclass
class PathCheckReport:
    required: int
    achieved: int
    sources: Tuple[str, ...] = ()
    sinks: Tuple[str, ...] = ()
    witness: List[Path] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.achieved >= self.required

    def to_dict(self):
        return {"required": self.required, "achieved": self.achieved,
                "satisfied": self.satisfied, "sources": list(self.sources),
                "sinks": list(self.sinks), "witness": [" -> ".join(p) for p in self.witness]}


def _check(graph, sources, sinks, required) -> PathCheckReport:
    count, witness = max_disjoint_paths(graph, sources, sinks)
    return PathCheckReport(required, count, tuple(sources), tuple(sinks), witness)


def excite_nodes(model: NetworkModel, nodes: Iterable[int]) -> NetworkModel:
    """Replace the excitation by one unit signal per listed node (0-based)."""
    nodes = sorted(set(nodes))
    if any(not 0 <= j < model.L for j in nodes):
        raise ModelError("excited node out of range")
    R = {(j, k): RationalTF([1.0]) for k, j in enumerate(nodes)}
    return model.with_excitation(R, len(nodes))


def _require_ordered(model: NetworkModel):
    for j in range(model.p):
        tf = model.H.get((j, j))
        if tf is None or abs(tf.feedthrough - 1.0) > 1e-12:
            raise ModelError(f"nodes are not ordered: H[{j + 1}][{j + 1}] must be monic "
                             f"for the first p = {model.p} nodes")


def check_prop3(model: NetworkModel, r_assignment: Optional[Iterable[int]] = None
                ) -> PathCheckReport:
    """L disjoint paths from all noise sources and the r_b signals to w.

    ``r_assignment`` (0-based node indices) replaces the model's excitation
    by one signal per listed node; r_b are the signals entering only nodes
    ``p+1..L``.
    """
    if r_assignment is not None:
        model = excite_nodes(model, r_assignment)
    _require_ordered(model)
    g = SignalGraph.from_model(model)
    sources = [f"e{s + 1}" for s in range(model.p)] + [f"r{k + 1}" for k in model.rb_signals()]
    sinks = [f"w{j + 1}" for j in range(model.L)]
    return _check(g, sources, sinks, model.L)


def check_prop4(model: NetworkModel, node: int, noise_set=None,
                r_assignment: Optional[Iterable[int]] = None) -> PathCheckReport:
    """|N_j| disjoint paths from all r and the noises outside V_j to w_{N_j}.

    ``node`` is 0-based; ``noise_set`` defaults to the model's V_j.
    """
    if not 0 <= node < model.L:
        raise ModelError(f"node {node + 1} out of range 1..{model.L}")
    if r_assignment is not None:
        model = excite_nodes(model, r_assignment)
    V = set(model.noise_inputs(node) if noise_set is None else noise_set)
    g = SignalGraph.from_model(model)
    sources = [f"e{s + 1}" for s in range(model.p) if s not in V] + \
              [f"r{k + 1}" for k in range(model.K)]
    sinks = [f"w{l + 1}" for l in model.neighbors(node)]
    return _check(g, sources, sinks, len(sinks))


def _all_pass(model: NetworkModel, nodes) -> bool:
    if not check_prop3(model, nodes).satisfied:
        return False
    return all(check_prop4(model, j, r_assignment=nodes).satisfied for j in range(model.L))


def _deficit(model: NetworkModel, nodes) -> int:
    rep = [check_prop3(model, nodes)] + \
          [check_prop4(model, j, r_assignment=nodes) for j in range(model.L)]
    return sum(max(r.required - r.achieved, 0) for r in rep)


@dataclass
class ExcitationSuggestion:
    nodes: Tuple[int, ...]      # 0-based
    feasible: bool
    exhaustive: bool

    def labels(self) -> List[str]:
        return [f"r{j + 1}" for j in self.nodes]


def suggest_excitation(model: NetworkModel, exhaustive: bool = False) -> ExcitationSuggestion:
    """Small set of nodes to excite so that both path conditions hold.

    Greedy: add the node that most reduces the total path deficit, lowest
    index first on ties, until all checks pass. The model's own excitation
    is ignored. ``exhaustive`` searches subsets by increasing size instead
    and returns a cardinality-minimal set (networks up to 12 nodes).
    """
    L = model.L
    if exhaustive:
        if L > 12:
            raise ModelError("exhaustive search is limited to 12 nodes")
        for size in range(L + 1):
            for nodes in itertools.combinations(range(L), size):
                if _all_pass(model, nodes):
                    return ExcitationSuggestion(nodes, True, True)
        return ExcitationSuggestion(tuple(range(L)), False, True)
    chosen: List[int] = []
    while True:
        if _all_pass(model, chosen):
            return ExcitationSuggestion(tuple(sorted(chosen)), True, False)
        rest = [j for j in range(L) if j not in chosen]
        if not rest:
            return ExcitationSuggestion(tuple(chosen), False, False)
        best = min(rest, key=lambda j: (_deficit(model, chosen + [j]), j))
        chosen.append(best)


def informativity_report(model: NetworkModel, exhaustive: bool = False) -> dict:
    """Both path conditions for the model's own excitation plus a suggestion."""
    p3 = check_prop3(model)
    p4 = {str(j + 1): check_prop4(model, j).to_dict() for j in range(model.L)}
    sug = suggest_excitation(model, exhaustive=exhaustive)
    return {"network": model.name, "L": model.L, "p": model.p,
            "r_b": [f"r{k + 1}" for k in model.rb_signals()],
            "r_b_nodes": sorted({j + 1 for (j, k) in model.R if k in model.rb_signals()}),
            "prop3": p3.to_dict(), "prop4": p4,
            "suggested_excitation": {"nodes": [j + 1 for j in sug.nodes],
                                     "signals": sug.labels(), "feasible": sug.feasible,
                                     "exhaustive": sug.exhaustive}}
