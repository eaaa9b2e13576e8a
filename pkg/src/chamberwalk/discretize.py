"""Induced walks on subsets and discretization of walks to lattice measures.

For a walk (Z_j) and a subset Y of the state space, the visit times are
tau_-1 = -1, tau_{k+1} = inf{j > tau_k : Z_j in Y}, and the induced chain
S_k = Z_{tau_k} has kernel q(x, y) = P_x(Z_{tau_1} = y).  Harmonic functions
transfer both ways across the induction, hitting distributions on subsets of
Y are preserved, and inducing is transitive in Y.

For a group G acting on the network with orbit Y = G.o, pulling the induced
kernel back to the group gives the step law

    mu(g) = q(o, g.o) / |G_o|,

a probability measure on G whose convolution walk projects back to the
induced walk.  Exact values come from absorption solves; a Monte Carlo
estimator with an explicit unresolved bucket covers the cases with no
finite enclosure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .action import FiniteAction, IntegerTranslationAction
from .netwalk import (
    FiniteNetwork,
    MarkovKernel,
    RngStream,
    hitting_matrix,
    kernel_from_network,
)


def stopping_times(nodes, in_subset):
    """Visit times and values of a trajectory in a subset.

    Returns (taus, values) where taus lists every j with nodes[j] in the
    subset, starting from tau_0 (so a start inside the subset gives
    taus[0] = 0).
    """
    taus = [j for j, z in enumerate(nodes) if in_subset(z)]
    return taus, [nodes[j] for j in taus]


def induced_kernel_exact(kernel: MarkovKernel, subset) -> MarkovKernel:
    """The kernel of the induced chain on a subset of a finite chain.

    q(x, y) = sum_z p(x, z) alpha(z, y) with alpha the absorption matrix of
    the subset; fails loudly if the subset is not almost surely revisited.
    """
    subset = list(subset)
    alpha = hitting_matrix(kernel, subset)
    rows = {}
    for x in subset:
        row: dict = {}
        for z, p in kernel.row(x):
            for y, a in alpha[z].items():
                if a != 0:
                    row[y] = row.get(y, Fraction(0)) + p * a
        total = sum(row.values())
        if total != 1:
            raise ValueError(
                f"induced row at {x!r} sums to {total}; subset not a.s. revisited"
            )
        rows[x] = sorted(row.items(), key=lambda t: repr(t[0]))
    return MarkovKernel.finite(rows)


def induced_kernel_mc(kernel: MarkovKernel, subset, samples: int, rng: RngStream,
                      horizon: int = 10**6):
    """Monte Carlo estimate of the induced kernel rows, with unresolved mass."""
    subset = list(subset)
    subset_set = set(subset)
    rows = {}
    unresolved = {}
    for xi, x in enumerate(subset):
        counts: dict = {}
        bad = 0
        for i in range(samples):
            gen = rng.child(xi, i).generator()
            z = kernel.sample_next(x, gen)
            t = 1
            while z not in subset_set:
                if t >= horizon:
                    bad += 1
                    z = None
                    break
                z = kernel.sample_next(z, gen)
                t += 1
            if z is not None:
                counts[z] = counts.get(z, 0) + 1
        rows[x] = {y: c / samples for y, c in counts.items()}
        unresolved[x] = bad / samples
    return rows, unresolved


@dataclass(frozen=True)
class HarmonicTransferReport:
    restriction_defect: object
    interior_defect: object
    q_harmonic_input: bool
    global_defect: object | None

    @property
    def verdict(self) -> bool:
        ok = self.restriction_defect == 0 and self.interior_defect == 0
        if self.q_harmonic_input:
            ok = ok and self.global_defect == 0
        return ok


def harmonic_extension(kernel: MarkovKernel, subset, f: dict) -> dict:
    """h(x) = E_x f(S_0): the harmonic extension of f from the subset."""
    alpha = hitting_matrix(kernel, list(subset))
    return {
        x: sum((a * f[y] for y, a in alpha[x].items() if a != 0), Fraction(0))
        for x in kernel.nodes
    }


def harmonic_transfer_check(kernel: MarkovKernel, subset, f: dict) -> HarmonicTransferReport:
    """Verify the harmonic correspondence between a chain and its induced chain.

    The extension h(x) = E_x f(S_0) restricts to f on the subset and is
    P-harmonic off it; when f is additionally harmonic for the induced
    kernel, h is P-harmonic everywhere.
    """
    subset = list(subset)
    subset_set = set(subset)
    h = harmonic_extension(kernel, subset, f)
    restriction = max(abs(h[y] - f[y]) for y in subset)
    interior_nodes = [x for x in kernel.nodes if x not in subset_set]
    interior = Fraction(0)
    for x in interior_nodes:
        ph = sum(p * h[y] for y, p in kernel.row(x))
        interior = max(interior, abs(ph - h[x]))
    q = induced_kernel_exact(kernel, subset)
    qf_defect = Fraction(0)
    for x in subset:
        qf = sum(p * f[y] for y, p in q.row(x))
        qf_defect = max(qf_defect, abs(qf - f[x]))
    global_defect = None
    if qf_defect == 0:
        global_defect = Fraction(0)
        for x in kernel.nodes:
            ph = sum(p * h[y] for y, p in kernel.row(x))
            global_defect = max(global_defect, abs(ph - h[x]))
    return HarmonicTransferReport(
        restriction_defect=restriction,
        interior_defect=interior,
        q_harmonic_input=qf_defect == 0,
        global_defect=global_defect,
    )


# -- lattice discretization -----------------------------------------------------------

@dataclass(frozen=True)
class LatticeMeasure:
    """A step law on group elements, mu(g) = q(o, g.o)/|G_o|."""

    base: object
    entries: tuple          # ((key, prob), ...) sorted by repr(key)
    provenance: str         # "exact" or "mc"
    symmetric: bool
    unresolved: float
    stabilizer_order: int

    def prob(self, key):
        for k, p in self.entries:
            if k == key:
                return p
        return Fraction(0) if self.provenance == "exact" else 0.0

    def total(self):
        return sum(p for _, p in self.entries)

    def support(self):
        return [k for k, _ in self.entries]

    def first_moment(self, action):
        return sum(p * action.key_distance(k) for k, p in self.entries)

    def exponential_moment(self, action, c: float) -> float:
        from math import exp

        return float(sum(float(p) * exp(c * action.key_distance(k))
                         for k, p in self.entries))

    def to_json(self) -> dict:
        from .netwalk import conductance_to_json

        return {
            "base": repr(self.base),
            "provenance": self.provenance,
            "symmetric": self.symmetric,
            "stabilizer_order": self.stabilizer_order,
            "unresolved": self.unresolved,
            "measure": [
                {"element": repr(k), "prob": conductance_to_json(p)
                 if isinstance(p, Fraction) else p}
                for k, p in self.entries
            ],
        }


def _group_elements_mapping(action, o, y):
    """All group keys g with g.o = y (finite actions), or the unique one."""
    if isinstance(action, FiniteAction):
        return [g for g in action.element_keys() if action.translate(g, o) == y]
    return [action.element_for(o, y)]


def _is_transitive(action) -> bool:
    return len(action.fundamental_domain()) == 1


def _measure_from_row(action, o, row_items, provenance, unresolved=0.0) -> LatticeMeasure:
    stab = action.stabilizer_order(o)
    entries = []
    for y, qprob in row_items:
        if qprob == 0:
            continue
        for g in _group_elements_mapping(action, o, y):
            entries.append((g, qprob / stab))
    entries.sort(key=lambda t: repr(t[0]))
    mu = dict(entries)
    symmetric = all(mu.get(action.inverse_key(g)) == p for g, p in entries)
    return LatticeMeasure(
        base=o,
        entries=tuple(entries),
        provenance=provenance,
        symmetric=symmetric,
        unresolved=unresolved,
        stabilizer_order=stab,
    )


def discretize_lattice(net, action, o, rng: RngStream | None = None,
                       samples: int = 100000, horizon: int = 10**6,
                       method: str = "auto") -> LatticeMeasure:
    """The step law of the walk induced on the orbit of o, pulled to the group.

    Exact routes: transitive actions read the kernel row at o directly (on
    finite networks this is cross-checked against the full induced-kernel
    computation); integer translation subgroups on the nearest-neighbour
    line get an absorption solve on one period window; finite ambient
    networks get the induced kernel on the orbit.  Everything else falls
    back to Monte Carlo with an explicit unresolved bucket; method="mc"
    forces that path, method="exact" refuses to sample.
    """
    if method not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    kernel = kernel_from_network(net)
    if method != "mc":
        if _is_transitive(action):
            row = kernel.row(o)
            if isinstance(net, FiniteNetwork):
                induced = induced_kernel_exact(kernel, action.orbit(o)
                                               if isinstance(action, FiniteAction)
                                               else list(net.nodes))
                if dict(induced.row(o)) != dict(row):
                    raise AssertionError(
                        "transitive fast path disagrees with induced kernel")
            return _measure_from_row(action, o, row, "exact")
        if isinstance(action, IntegerTranslationAction):
            try:
                return _integer_line_exact(net, action, o, kernel)
            except ValueError:
                pass
        if isinstance(net, FiniteNetwork) and isinstance(action, FiniteAction):
            induced = induced_kernel_exact(kernel, action.orbit(o))
            return _measure_from_row(action, o, induced.row(o), "exact")
        if method == "exact":
            raise ValueError("no exact route for this network/action pair")
    if rng is None:
        raise ValueError("Monte Carlo discretization needs an RngStream")
    return _lattice_measure_mc(kernel, action, o, rng, samples, horizon)


def _integer_line_exact(net, action: IntegerTranslationAction, o: int,
                        kernel: MarkovKernel) -> LatticeMeasure:
    k = action.k
    for probe in (o, o + 1, o - 1):
        nbrs = sorted(y for y, _ in net.neighbors(probe))
        if nbrs != [probe - 1, probe + 1]:
            raise ValueError("exact window solve needs the nearest-neighbour line")
    window = list(range(o - k, o + k + 1))
    absorbing = [o - k, o, o + k]
    rows = {}
    for x in window:
        if x in absorbing:
            rows[x] = [(x, Fraction(1))]
        else:
            rows[x] = [(y, p) for y, p in kernel.row(x)]
    restricted = MarkovKernel.finite(rows)
    alpha = hitting_matrix(restricted, absorbing)
    row: dict = {}
    for z, p in kernel.row(o):
        for y, a in alpha[z].items():
            if a != 0:
                row[y] = row.get(y, Fraction(0)) + p * a
    if sum(row.values()) != 1:
        raise ValueError("window absorption did not resolve all mass")
    return _measure_from_row(action, o, sorted(row.items()), "exact")


def _lattice_measure_mc(kernel: MarkovKernel, action, o, rng: RngStream,
                        samples: int, horizon: int) -> LatticeMeasure:
    counts: dict = {}
    bad = 0
    for i in range(samples):
        gen = rng.child(i).generator()
        z = kernel.sample_next(o, gen)
        t = 1
        while action.canonicalize(z) != action.canonicalize(o):
            if t >= horizon:
                bad += 1
                z = None
                break
            z = kernel.sample_next(z, gen)
            t += 1
        if z is not None:
            counts[z] = counts.get(z, 0) + 1
    row = [(y, c / samples) for y, c in sorted(counts.items(), key=lambda t: repr(t[0]))]
    return _measure_from_row(action, o, row, "mc", unresolved=bad / samples)
