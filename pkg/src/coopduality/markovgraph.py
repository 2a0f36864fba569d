"""Graphical sufficient conditions for Markov chains A - C - B.

Two methods: separation in the undirected graph whose cliques are the factors
of a PMF factorization, and d-separation in a functional dependence graph.
Neither implies the other, so a False verdict means "not certified".
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .probability import (
    Alphabet,
    ConditionalPmf,
    JointPmf,
    compose,
    mutual_information,
    random_conditional,
    random_joint,
)


class GraphError(ValueError):
    pass


def _names(xs: Iterable[str]) -> frozenset[str]:
    if isinstance(xs, str):
        return frozenset([xs])
    return frozenset(xs)


@dataclass(frozen=True)
class MarkovQuery:
    a: frozenset
    b: frozenset
    c: frozenset = frozenset()

    def __init__(self, a, b, c=()):
        object.__setattr__(self, "a", _names(a))
        object.__setattr__(self, "b", _names(b))
        object.__setattr__(self, "c", _names(c))
        if not self.a or not self.b:
            raise GraphError("query sets A and B must be nonempty")
        if self.a & self.b or self.a & self.c or self.b & self.c:
            raise GraphError("query sets must be pairwise disjoint")

    @property
    def variables(self) -> frozenset:
        return self.a | self.b | self.c


@dataclass(frozen=True)
class Factor:
    """A term of a factorization; ``children`` are its output variables (may be empty)."""

    scope: frozenset
    children: frozenset = frozenset()

    def __init__(self, scope, children=()):
        object.__setattr__(self, "scope", _names(scope))
        object.__setattr__(self, "children", _names(children))
        if not self.scope:
            raise GraphError("factor scope must be nonempty")
        if not self.children <= self.scope:
            raise GraphError("factor outputs must lie in its scope")

    @property
    def parents(self) -> frozenset:
        return self.scope - self.children


@dataclass(frozen=True)
class FactorGraphSpec:
    variables: tuple
    factors: tuple

    def __init__(self, variables: Sequence[str], factors: Sequence[Factor | Iterable[str]]):
        variables = tuple(dict.fromkeys(variables))
        facs = tuple(f if isinstance(f, Factor) else Factor(f) for f in factors)
        known = set(variables)
        for f in facs:
            missing = f.scope - known
            if missing:
                raise GraphError(f"factor mentions undeclared variables {sorted(missing)}")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "factors", facs)

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.variables}
        for f in self.factors:
            for u in f.scope:
                adj[u] |= f.scope - {u}
        return adj


@dataclass(frozen=True)
class Fdg:
    nodes: tuple
    edges: frozenset = field(default_factory=frozenset)

    def __init__(self, nodes: Sequence[str], edges: Iterable[tuple[str, str]]):
        nodes = tuple(dict.fromkeys(nodes))
        edges = frozenset((str(u), str(v)) for u, v in edges)
        known = set(nodes)
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop on {u}")
            if u not in known or v not in known:
                raise GraphError(f"edge {u} -> {v} uses an undeclared node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        self.topological_order()

    def parents(self, v: str) -> set[str]:
        return {a for a, b in self.edges if b == v}

    def topological_order(self) -> list[str]:
        indeg = {v: 0 for v in self.nodes}
        out: dict[str, list[str]] = {v: [] for v in self.nodes}
        for u, v in sorted(self.edges):
            indeg[v] += 1
            out[u].append(v)
        queue = deque(v for v in self.nodes if indeg[v] == 0)
        order = []
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in out[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        if len(order) != len(self.nodes):
            raise GraphError("graph has a directed cycle")
        return order

    def ancestors(self, seeds: Iterable[str]) -> set[str]:
        """Closure under moving backward along edges; includes the seeds."""
        seen = set(seeds)
        stack = list(seen)
        while stack:
            v = stack.pop()
            for p in self.parents(v):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def to_dot(self) -> str:
        lines = ["digraph fdg {"]
        lines += [f'  "{v}";' for v in self.nodes]
        lines += [f'  "{u}" -> "{v}";' for u, v in sorted(self.edges)]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _check_declared(q: MarkovQuery, names: Iterable[str]) -> None:
    missing = q.variables - set(names)
    if missing:
        raise GraphError(f"query mentions undeclared variables {sorted(missing)}")


def _connected(adj: Mapping[str, set[str]], a: frozenset, b: frozenset, blocked: frozenset) -> bool:
    """BFS from A avoiding ``blocked``; True when some vertex of B is reached."""
    seen = set(a)
    queue = deque(a)
    while queue:
        u = queue.popleft()
        if u in b:
            return True
        for v in adj.get(u, ()):
            if v not in seen and v not in blocked:
                seen.add(v)
                queue.append(v)
    return False


def undirected_markov_check(spec: FactorGraphSpec, q: MarkovQuery) -> bool:
    _check_declared(q, spec.variables)
    return not _connected(spec.adjacency(), q.a, q.b, q.c)


def d_separation_check(g: Fdg, q: MarkovQuery) -> bool:
    _check_declared(q, g.nodes)
    keep = g.ancestors(q.variables)
    adj: dict[str, set[str]] = {v: set() for v in keep}
    for u, v in g.edges:
        if u in keep and v in keep and u not in q.c:
            adj[u].add(v)
            adj[v].add(u)
    return not _connected(adj, q.a, q.b, frozenset())


def fdg_from_factorization(spec: FactorGraphSpec) -> Fdg:
    """Edges from every factor's conditioning variables to its outputs."""
    edges = set()
    for f in spec.factors:
        for c in f.children:
            for p in f.parents:
                edges.add((p, c))
    return Fdg(spec.variables, edges)


def factorization_from_fdg(g: Fdg) -> FactorGraphSpec:
    """One factor P(v | parents(v)) per node."""
    return FactorGraphSpec(g.nodes, [Factor(g.parents(v) | {v}, {v}) for v in g.topological_order()])


# --- numeric instantiation ------------------------------------------------------

def instantiate_fdg(g: Fdg, rng: np.random.Generator, sizes: Mapping[str, int] | int = 2,
                    concentration: float = 0.5) -> JointPmf:
    """Random joint PMF that factors along ``g`` (random conditional per node)."""
    size = (lambda v: sizes) if isinstance(sizes, int) else (lambda v: sizes[v])
    alph = {v: Alphabet(v, size(v)) for v in g.nodes}
    p: JointPmf | None = None
    for v in g.topological_order():
        parents = sorted(g.parents(v), key=g.nodes.index)
        if not parents:
            marg = random_joint(rng, [alph[v]], concentration)
            p = marg if p is None else JointPmf(p.axes + marg.axes, np.multiply.outer(p.values, marg.values), check=False)
        else:
            cond = random_conditional(rng, [alph[v]], [alph[u] for u in parents], concentration)
            p = compose(p, cond)
    assert p is not None
    return p


def instantiate_factors(spec: FactorGraphSpec, rng: np.random.Generator, sizes: Mapping[str, int] | int = 2,
                        concentration: float = 0.5) -> JointPmf:
    """Random PMF proportional to a product of nonnegative potentials, one per factor."""
    size = (lambda v: sizes) if isinstance(sizes, int) else (lambda v: sizes[v])
    names = list(spec.variables)
    shape = tuple(size(v) for v in names)
    vals = np.ones(shape)
    for f in spec.factors:
        idx = sorted(names.index(v) for v in f.scope)
        pot = rng.gamma(concentration, size=tuple(shape[i] for i in idx))
        view = [1] * len(names)
        for i in idx:
            view[i] = shape[i]
        vals = vals * pot.reshape(view)
    vals = vals / vals.sum()
    return JointPmf([Alphabet(v, s) for v, s in zip(names, shape)], vals)


@dataclass(frozen=True)
class CrosscheckReport:
    instantiations: int
    graphical_true: bool
    max_cmi: float
    violations: int

    @property
    def sound(self) -> bool:
        return self.violations == 0


def soundness_crosscheck(q: MarkovQuery, verdict: bool, sampler: Callable[[np.random.Generator], JointPmf],
                         count: int = 50, seed: int = 0, tol: float = 1e-9) -> CrosscheckReport:
    """Numeric CMI over sampled instantiations; a violation is verdict True with CMI > tol."""
    worst, bad = 0.0, 0
    if verdict:
        for k in range(count):
            p = sampler(np.random.default_rng([seed, k]))
            cmi = mutual_information(p, sorted(q.a), sorted(q.b), sorted(q.c))
            worst = max(worst, cmi)
            bad += cmi > tol
    return CrosscheckReport(count if verdict else 0, verdict, worst, bad)


# --- the block-node cooperation fixture ---------------------------------------------

BLOCK_NODES = ("M1", "M2", "Xpast", "Xq", "Xfut", "Y1past", "Y2past", "Y1q", "Y2q", "Y1fut", "Y2fut")


def block_fdg() -> Fdg:
    """Messages drive the past/current/future input blocks; each block feeds both outputs."""
    edges = []
    for x in ("Xpast", "Xq", "Xfut"):
        edges += [("M1", x), ("M2", x)]
    for blk in ("past", "q", "fut"):
        edges += [("X" + blk, "Y1" + blk), ("X" + blk, "Y2" + blk)]
    return Fdg(BLOCK_NODES, edges)


def block_factorization() -> FactorGraphSpec:
    return factorization_from_fdg(block_fdg())


def block_query() -> MarkovQuery:
    return MarkovQuery({"Y2q"}, {"M1", "M2", "Y1past", "Y1q", "Y1fut", "Y2fut"}, {"Xq"})
