"""Networks, Markov kernels, simulation and exact linear-algebra checks.

A network is a symmetric conductance function a on pairs of nodes together
with the vertex weights m(x) = sum_y a(x, y); the associated kernel
p(x, y) = a(x, y)/m(x) is reversible with respect to m.  Two backends are
provided: a finite explicit one, and a lazy one driven by a neighbour oracle
for infinite graphs, whose nodes are keyed by a canonical byte encoding.

Conductances and probabilities stay in ``fractions.Fraction`` whenever the
input data is rational, so the structural checks (row sums, detailed
balance, stationarity, absorption solves) are exact; float data degrades the
same code paths to tolerance checks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
import json

import numpy as np

from .errors import SchemaError

EXACT_SOLVE_LIMIT = 200


# -- rng ---------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """A named, splittable randomness source.

    Streams are identified by (seed, key); equal identifiers give equal
    generators, and children obtained through :meth:`child` are independent
    of each other in the usual SeedSequence sense.  Anything stochastic in
    the package takes one of these, so runs are reproducible end to end.
    """

    seed: int
    key: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(indices))


def parallel_map_indices(n: int, fn, workers: int = 1) -> list:
    """Evaluate fn(0..n-1), splitting the index range over worker threads.

    Results are returned in index order, so any merge over them is
    independent of the worker count and of scheduling.
    """
    if workers <= 1:
        return [fn(i) for i in range(n)]
    chunks = []
    base = n // workers
    extra = n % workers
    start = 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        chunks.append(range(start, start + size))
        start += size

    def run_chunk(idxs):
        return [fn(i) for i in idxs]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(run_chunk, chunks))
    out = []
    for part in parts:
        out.extend(part)
    return out


# -- conductance values -------------------------------------------------------

def parse_conductance(value):
    """Accept int, float, Fraction or 'p/q' strings; ints stay exact."""
    if isinstance(value, bool):
        raise SchemaError("conductance must be a number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as exc:
            raise SchemaError(f"bad conductance string {value!r}") from exc
    raise SchemaError(f"bad conductance {value!r}")


def conductance_to_json(value):
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else str(value)
    return value


def encode_node(x) -> bytes:
    """Canonical byte key for a node; tuples, ints and strings all work."""
    return repr(x).encode()


# -- networks ------------------------------------------------------------------

class FiniteNetwork:
    """Explicit symmetric network on a finite node set."""

    def __init__(self, nodes, edges) -> None:
        self.nodes = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise SchemaError("duplicate nodes")
        node_set = set(self.nodes)
        self._adj: dict = {x: {} for x in self.nodes}
        for u, v, a in edges:
            if u not in node_set or v not in node_set:
                raise SchemaError(f"edge endpoint not a node: {(u, v)}")
            a = parse_conductance(a)
            if (isinstance(a, Fraction) and a < 0) or (isinstance(a, float) and a < 0):
                raise SchemaError("conductances must be nonnegative")
            if v in self._adj[u]:
                raise SchemaError(f"duplicate edge {(u, v)}")
            self._adj[u][v] = a
            if u != v:
                self._adj[v][u] = a
        self.is_exact = all(
            isinstance(a, Fraction) for nbrs in self._adj.values() for a in nbrs.values()
        )

    def neighbors(self, x):
        return sorted(self._adj[x].items(), key=lambda t: encode_node(t[0]))

    def conductance(self, u, v):
        return self._adj[u].get(v, Fraction(0) if self.is_exact else 0.0)

    def m(self, x):
        zero = Fraction(0) if self.is_exact else 0.0
        return sum((a for a in self._adj[x].values()), zero)

    def encode(self, x) -> bytes:
        return encode_node(x)

    def to_json(self) -> dict:
        edges = []
        seen = set()
        for u in self.nodes:
            for v, a in self.neighbors(u):
                k = (min(encode_node(u), encode_node(v)), max(encode_node(u), encode_node(v)))
                if k in seen:
                    continue
                seen.add(k)
                edges.append([u, v, conductance_to_json(a)])
        return {"nodes": list(self.nodes), "edges": edges}


class LazyNetwork:
    """Network given by a neighbour oracle, for infinite graphs.

    ``neighbors_fn(x)`` must return the full finite list of (neighbour,
    conductance) pairs of x, consistently in both directions.
    """

    def __init__(self, neighbors_fn, encode_fn=encode_node, description: str = "lazy") -> None:
        self._neighbors_fn = neighbors_fn
        self._encode_fn = encode_fn
        self.description = description
        self.is_exact = True

    def neighbors(self, x):
        out = [(y, parse_conductance(a)) for y, a in self._neighbors_fn(x)]
        return sorted(out, key=lambda t: self._encode_fn(t[0]))

    def m(self, x):
        return sum((a for _, a in self.neighbors(x)), Fraction(0))

    def conductance(self, u, v):
        for y, a in self.neighbors(u):
            if y == v:
                return a
        return Fraction(0)

    def encode(self, x) -> bytes:
        return self._encode_fn(x)


def network_from_json(doc) -> FiniteNetwork:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise SchemaError("network document needs 'nodes' and 'edges'")
    nodes = [tuple(x) if isinstance(x, list) else x for x in doc["nodes"]]
    edges = []
    for e in doc["edges"]:
        if len(e) != 3:
            raise SchemaError(f"edge must be [u, v, a]: {e}")
        u, v, a = e
        u = tuple(u) if isinstance(u, list) else u
        v = tuple(v) if isinstance(v, list) else v
        edges.append((u, v, a))
    return FiniteNetwork(nodes, edges)


def integer_line_network() -> LazyNetwork:
    """Simple random walk network on the integers, unit conductances."""
    return LazyNetwork(lambda n: [(n - 1, 1), (n + 1, 1)],
                       description="integer-line")


def cycle_network(n: int) -> FiniteNetwork:
    return FiniteNetwork(range(n), [(i, (i + 1) % n, 1) for i in range(n)])


def path_network(n: int) -> FiniteNetwork:
    return FiniteNetwork(range(n), [(i, i + 1, 1) for i in range(n - 1)])


# -- kernels -------------------------------------------------------------------

def _is_exact_number(p) -> bool:
    return isinstance(p, (Fraction, int))


class MarkovKernel:
    """Transition kernel with finite rows, over a finite or lazy state space."""

    def __init__(self, row_fn, nodes=None, encode_fn=encode_node,
                 reversible_with=None, is_exact=True) -> None:
        self._row_fn = row_fn
        self.nodes = tuple(nodes) if nodes is not None else None
        self._encode_fn = encode_fn
        self.reversible_with = reversible_with
        self.is_exact = is_exact
        self._cache: dict = {}
        if self.nodes is not None:
            for x in self.nodes:
                self._validate_row(x, self.row(x))

    @classmethod
    def finite(cls, rows: dict, reversible_with=None) -> "MarkovKernel":
        rows = {
            x: tuple(sorted(((y, p) for y, p in row), key=lambda t: encode_node(t[0])))
            for x, row in rows.items()
        }
        exact = all(_is_exact_number(p) for row in rows.values() for _, p in row)
        return cls(lambda x: rows[x], nodes=tuple(rows), reversible_with=reversible_with,
                   is_exact=exact)

    @classmethod
    def lazy(cls, row_fn, encode_fn=encode_node, is_exact=True) -> "MarkovKernel":
        return cls(row_fn, nodes=None, encode_fn=encode_fn, is_exact=is_exact)

    def _validate_row(self, x, row) -> None:
        total = sum(p for _, p in row)
        if self.is_exact:
            if total != 1:
                raise ValueError(f"row of {x!r} sums to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"row of {x!r} sums to {total}, not 1")
        if any((p < 0) for _, p in row):
            raise ValueError(f"negative probability in row of {x!r}")

    def row(self, x):
        if x not in self._cache:
            row = tuple(sorted(self._row_fn(x), key=lambda t: self._encode_fn(t[0])))
            if self.nodes is None:
                self._validate_row(x, row)
            self._cache[x] = row
        return self._cache[x]

    def prob(self, x, y):
        for z, p in self.row(x):
            if z == y:
                return p
        return Fraction(0) if self.is_exact else 0.0

    def encode(self, x) -> bytes:
        return self._encode_fn(x)

    def sample_next(self, x, gen: np.random.Generator):
        row = self.row(x)
        u = gen.random()
        acc = 0.0
        for y, p in row:
            acc += float(p)
            if u < acc:
                return y
        return row[-1][0]


def kernel_from_network(net) -> MarkovKernel:
    """p(x, y) = a(x, y) / m(x); fails on isolated nodes."""

    def row_fn(x):
        mx = net.m(x)
        if mx == 0:
            raise ValueError(f"node {x!r} has m = 0, no kernel row")
        return [(y, a / mx) for y, a in net.neighbors(x)]

    if isinstance(net, FiniteNetwork):
        m = {x: net.m(x) for x in net.nodes}
        rows = {x: row_fn(x) for x in net.nodes}
        kern = MarkovKernel.finite(rows, reversible_with=m)
        return kern
    return MarkovKernel.lazy(row_fn, encode_fn=net.encode, is_exact=net.is_exact)


def reversibility_defect(kernel: MarkovKernel, m: dict):
    """max |m(x) p(x,y) - m(y) p(y,x)| over enumerated edges (finite kernels)."""
    worst = Fraction(0) if kernel.is_exact else 0.0
    for x in kernel.nodes:
        for y, p in kernel.row(x):
            d = abs(m[x] * p - m[y] * kernel.prob(y, x))
            worst = max(worst, d)
    return worst


# -- trajectories --------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    start: object
    nodes: tuple
    stream: RngStream

    def __len__(self) -> int:
        return len(self.nodes) - 1


def simulate(kernel: MarkovKernel, start, steps: int, rng: RngStream) -> Trajectory:
    """Run ``steps`` transitions from ``start`` using the given stream."""
    gen = rng.generator()
    x = start
    out = [x]
    for _ in range(steps):
        x = kernel.sample_next(x, gen)
        out.append(x)
    return Trajectory(start=start, nodes=tuple(out), stream=rng)


def occupation_counts(trajectory: Trajectory) -> dict:
    counts: dict = {}
    for x in trajectory.nodes:
        counts[x] = counts.get(x, 0) + 1
    return counts


# -- structural checks ----------------------------------------------------------

def harmonic_defect(kernel: MarkovKernel, f: dict, nodes=None):
    """max over nodes of |sum_y p(x,y) f(y) - f(x)|."""
    if nodes is None:
        nodes = kernel.nodes
    worst = Fraction(0) if kernel.is_exact else 0.0
    for x in nodes:
        px = sum(p * f[y] for y, p in kernel.row(x))
        worst = max(worst, abs(px - f[x]))
    return worst


def check_stationary(kernel: MarkovKernel, nu: dict):
    """max over y of |sum_x nu(x) p(x,y) - nu(y)| on a finite kernel."""
    flow: dict = {y: Fraction(0) if kernel.is_exact else 0.0 for y in kernel.nodes}
    for x in kernel.nodes:
        for y, p in kernel.row(x):
            flow[y] += nu[x] * p
    worst = Fraction(0) if kernel.is_exact else 0.0
    for y in kernel.nodes:
        worst = max(worst, abs(flow[y] - nu[y]))
    return worst


def is_irreducible(kernel: MarkovKernel) -> bool:
    """Strong connectivity of the positive-probability digraph."""
    nodes = kernel.nodes
    if not nodes:
        return False
    fwd = {x: [y for y, p in kernel.row(x) if p > 0] for x in nodes}
    bwd: dict = {x: [] for x in nodes}
    for x, ys in fwd.items():
        for y in ys:
            bwd[y].append(x)

    def reach(adj):
        seen = {nodes[0]}
        stack = [nodes[0]]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen

    return len(reach(fwd)) == len(nodes) and len(reach(bwd)) == len(nodes)


# -- linear solves ---------------------------------------------------------------

def solve_exact(rows: list[list[Fraction]], rhs_cols: list[list[Fraction]]) -> list[list[Fraction]]:
    """Gaussian elimination over the rationals; rhs_cols holds columns.

    Returns the solution columns.  Intended for systems up to
    ``EXACT_SOLVE_LIMIT`` unknowns; larger systems should go through the
    float path.
    """
    n = len(rows)
    if n > EXACT_SOLVE_LIMIT:
        raise ValueError(f"exact solve limited to {EXACT_SOLVE_LIMIT} unknowns")
    k = len(rhs_cols)
    aug = [rows[i][:] + [rhs_cols[j][i] for j in range(k)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular system")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [[aug[i][n + j] for i in range(n)] for j in range(k)]


def solve_float(rows, rhs_cols):
    """Float solve with one step of iterative refinement; returns (cols, residual)."""
    a = np.array(rows, dtype=float)
    b = np.array(rhs_cols, dtype=float).T
    x = np.linalg.solve(a, b)
    r = b - a @ x
    x = x + np.linalg.solve(a, r)
    resid = float(np.max(np.abs(b - a @ x))) if b.size else 0.0
    return [list(x[:, j]) for j in range(x.shape[1])], resid


def hitting_matrix(kernel: MarkovKernel, absorbing) -> dict:
    """Absorption probabilities alpha(x, y) = P_x(hit y first among absorbing).

    Returns {x: {y: prob}} for every node x of a finite kernel, with
    alpha(y, .) a point mass for y absorbing.  States that cannot reach the
    absorbing set get sub-stochastic (possibly zero) rows.
    """
    absorbing = list(absorbing)
    absorbing_set = set(absorbing)
    nodes = kernel.nodes
    transient = [x for x in nodes if x not in absorbing_set]
    # restrict to transient states that can reach the absorbing set
    reach_a = set(absorbing)
    changed = True
    while changed:
        changed = False
        for x in transient:
            if x in reach_a:
                continue
            if any(y in reach_a and p > 0 for y, p in kernel.row(x)):
                reach_a.add(x)
                changed = True
    solvable = [x for x in transient if x in reach_a]
    idx = {x: i for i, x in enumerate(solvable)}
    n = len(solvable)
    exact = kernel.is_exact and n <= EXACT_SOLVE_LIMIT
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0

    rows = [[zero] * n for _ in range(n)]
    rhs = [[zero] * n for _ in absorbing]
    for x in solvable:
        i = idx[x]
        rows[i][i] += one
        for y, p in kernel.row(x):
            p = p if exact else float(p)
            if y in idx:
                rows[i][idx[y]] -= p
            elif y in absorbing_set:
                rhs[absorbing.index(y)][i] += p
            # transitions into unreachable states lose their mass
    if n > 0:
        if exact:
            cols = solve_exact(rows, rhs)
        else:
            cols, _ = solve_float(rows, rhs)
    else:
        cols = [[] for _ in absorbing]

    out: dict = {}
    for x in nodes:
        if x in absorbing_set:
            out[x] = {y: (one if y == x else zero) for y in absorbing}
        elif x in idx:
            out[x] = {y: cols[j][idx[x]] for j, y in enumerate(absorbing)}
        else:
            out[x] = {y: zero for y in absorbing}
    return out


def hitting_distribution(kernel: MarkovKernel, absorbing, start) -> dict:
    """Distribution over the absorbing set of the first absorption from start."""
    return hitting_matrix(kernel, absorbing)[start]
