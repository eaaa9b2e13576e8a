"""Concrete building models with sigma-distances, sectors and cylinders.

Three families:

* ``TreeBuilding(q)``: the (q+1)-regular tree, vertices encoded as words with
  no immediate backtrack.  Rank-1 model; sigma is graph distance in units of
  the fundamental coweight.
* ``A2Ball(p, radius)``: the ball of the rank-2 p-adic affine building.
  Vertices are homothety classes of rank-3 lattices, canonicalized as
  Hermite-form integer matrices; adjacency is index-p inclusion; sigma comes
  from elementary divisors.
* ``SphericalA2(q)``: flags of the projective plane of order q with
  Weyl-distance, residues, projections, and the opposite-chamber search.

Sector germs are handled through finite data: deep vertices inside the
truncation for A2Ball, ray words for trees.  Every germ-dependent operation
states its depth requirement and raises when the available data is too
shallow, rather than extrapolating.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .coxeter import WeylElement, WeylGroup, root_system
from .errors import SizeGuardError
from .netwalk import LazyNetwork, FiniteNetwork


# -- cylinders -------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderId:
    """The set of chambers at infinity whose sector from base passes through target."""

    base: object
    target: object


def is_between(model, x, y, z) -> bool:
    """y on a sigma-geodesic from x to z: sigma(x,y) + sigma(y,z) = sigma(x,z)."""
    a, b, c = model.sigma(x, y), model.sigma(y, z), model.sigma(x, z)
    return tuple(u + v for u, v in zip(a, b)) == c


def refines(model, fine: CylinderId, coarse: CylinderId) -> bool:
    if fine.base != coarse.base:
        raise ValueError("refinement compares cylinders at a common base")
    return is_between(model, fine.base, coarse.target, fine.target)


# -- trees -----------------------------------------------------------------------

class TreeBuilding:
    """The (q+1)-regular tree with words over q+1 letters, no immediate repeat."""

    def __init__(self, q: int) -> None:
        if q < 2:
            raise ValueError("thick trees need branching q >= 2")
        self.q = q
        self.degree = q + 1
        self.root_system = root_system("A1")
        self.origin: tuple = ()

    def neighbors(self, w):
        out = [w[:-1]] if w else []
        out.extend(w + (a,) for a in range(self.degree) if not w or a != w[-1])
        return out

    def distance(self, u, v) -> int:
        c = 0
        for a, b in zip(u, v):
            if a != b:
                break
            c += 1
        return (len(u) - c) + (len(v) - c)

    def sigma(self, x, y):
        return (self.distance(x, y),)

    def sphere(self, x, k: int):
        """All vertices at graph distance exactly k from x."""
        if k == 0:
            return [x]
        prev, cur = {x}, {x}
        for _ in range(k):
            nxt = {n for w in cur for n in self.neighbors(w)} - prev
            prev |= nxt
            cur = nxt
        return sorted(cur)

    def v_lambda(self, x, lam):
        return self.sphere(x, lam[0])

    def geodesic(self, u, v):
        """Vertex path from u to v through their last common ancestor."""
        c = 0
        for a, b in zip(u, v):
            if a != b:
                break
            c += 1
        down = [u[:k] for k in range(len(u), c, -1)]
        up = [v[:k] for k in range(c, len(v) + 1)]
        return down + up

    def network(self) -> LazyNetwork:
        return LazyNetwork(
            lambda w: [(n, 1) for n in self.neighbors(w)],
            description=f"tree-{self.q}",
        )

    # -- ends: rays from the origin, given as finite deep words ------------------

    def same_end(self, e1, e2) -> bool:
        """Two ray words represent the same end iff one extends the other."""
        k = min(len(e1), len(e2))
        return e1[:k] == e2[:k]

    def ray(self, end, depth: int | None = None):
        n = len(end) if depth is None else depth
        return [end[:k] for k in range(n + 1)]

    def _branch_depth(self, x, end) -> int:
        c = 0
        for a, b in zip(x, end):
            if a != b:
                break
            c += 1
        return c

    def busemann_h(self, x, y, end):
        """h(x,y; end) = sigma(x,z) - sigma(y,z) for z deep on the ray.

        Needs the ray word at least two letters past both branch points;
        the value is checked to be stable over the available tail.
        """
        need = max(self._branch_depth(x, end), self._branch_depth(y, end)) + 2
        if len(end) < need:
            raise ValueError(f"ray too shallow: need depth {need}, have {len(end)}")
        tail = [end[:k] for k in range(need, len(end) + 1)]
        vals = {self.distance(x, z) - self.distance(y, z) for z in tail}
        if len(vals) != 1:
            raise AssertionError("Busemann value did not stabilize")
        return (vals.pop(),)

    def line_between(self, e1, e2):
        """Vertices of the geodesic line joining two distinct ends (truncated)."""
        if self.same_end(e1, e2):
            raise ValueError("ends coincide")
        c = 0
        for a, b in zip(e1, e2):
            if a != b:
                break
            c += 1
        side1 = [e1[:k] for k in range(len(e1), c, -1)]
        side2 = [e2[:k] for k in range(c, len(e2) + 1)]
        return side1 + side2

    def distance_to_line(self, x, e1, e2) -> int:
        line = self.line_between(e1, e2)
        d, best = min((self.distance(x, v), v) for v in line)
        if d > 0 and best in (line[0], line[-1]):
            raise ValueError("line truncation too shallow near the projection")
        return d

    def beta(self, x, e1, e2):
        """beta_x(end1, end2) = h(x,z;end1) + h(x,z;end2), z on their line."""
        if self.same_end(e1, e2):
            raise ValueError("beta needs two distinct ends")
        c = 0
        for a, b in zip(e1, e2):
            if a != b:
                break
            c += 1
        z = e1[:c]  # the branch vertex lies on the line
        h1 = self.busemann_h(x, z, e1)
        h2 = self.busemann_h(x, z, e2)
        return (h1[0] + h2[0],)

    @staticmethod
    def relabel(w, perm):
        """Apply a letter permutation; an origin-fixing tree automorphism."""
        return tuple(perm[a] for a in w)


# -- p-adic lattice classes --------------------------------------------------------

def _vp(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _matmul3(a, b):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3))
        for i in range(3)
    )


def _adjugate3(m):
    (a, b, c), (d, e, f), (g, h, i) = m
    return (
        (e * i - f * h, c * h - b * i, b * f - c * e),
        (f * g - d * i, a * i - c * g, c * d - a * f),
        (d * h - e * g, b * g - a * h, a * e - b * d),
    )


def _det3(m) -> int:
    (a, b, c), (d, e, f), (g, h, i) = m
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def _hnf_rows(rows):
    """Row Hermite form of a full-rank integer row span: upper triangular,
    positive pivots, entries above each pivot reduced into [0, pivot)."""
    work = [list(r) for r in rows]
    basis = []
    for col in range(3):
        pool = [r for r in work if r[col] != 0]
        rest = [r for r in work if r[col] == 0]
        if not pool:
            raise ValueError("rank-deficient lattice matrix")
        while len(pool) > 1:
            pool.sort(key=lambda r: abs(r[col]))
            a = pool[0]
            reduced = []
            for r in pool[1:]:
                k = r[col] // a[col]
                nr = [r[j] - k * a[j] for j in range(3)]
                if nr[col]:
                    reduced.append(nr)
                elif any(nr):
                    rest.append(nr)
            pool = [a] + reduced
        piv = pool[0]
        if piv[col] < 0:
            piv = [-v for v in piv]
        basis.append(piv)
        work = rest
    for i in range(3):
        for j in range(i + 1, 3):
            k = basis[i][j] // basis[j][j]
            if k:
                basis[i] = [basis[i][t] - k * basis[j][t] for t in range(3)]
    return tuple(tuple(r) for r in basis)


def _canonical_class(rows, p: int):
    """Canonical matrix of the homothety class: Hermite form, divided by p
    until some entry is a p-unit."""
    h = [list(r) for r in _hnf_rows(rows)]
    while all(v % p == 0 for r in h for v in r):
        h = [[v // p for v in r] for r in h]
    return tuple(tuple(r) for r in h)


def _sigma_valuations(c, p: int):
    """Ascending elementary-divisor exponents of a 3x3 p-power-determinant
    integer matrix, via gcd valuations of minors."""
    e1 = min(_vp(v, p) for r in c for v in r if v)
    pairs = ((0, 1), (0, 2), (1, 2))
    m2 = None
    for r0, r1 in pairs:
        for c0, c1 in pairs:
            minor = c[r0][c0] * c[r1][c1] - c[r0][c1] * c[r1][c0]
            if minor:
                v = _vp(minor, p)
                m2 = v if m2 is None else min(m2, v)
    e3 = _vp(abs(_det3(c)), p)
    return e1, m2 - e1, e3 - m2


class A2Ball:
    """Ball of the rank-2 p-adic affine building around the standard class.

    Vertices are canonical Hermite forms of rank-3 lattice classes with
    sigma-box at most ``radius`` from the identity class; adjacency is
    index-p or index-p^2 inclusion up to homothety.
    """

    MAX_RADIUS = 4
    MAX_VERTICES = 300000

    def __init__(self, p: int, radius: int, max_vertices: int | None = None) -> None:
        if p < 2 or any(p % d == 0 for d in range(2, int(p ** 0.5) + 1)):
            raise ValueError(f"p must be prime, got {p}")
        if radius < 1 or radius > self.MAX_RADIUS:
            raise SizeGuardError(f"radius must be in 1..{self.MAX_RADIUS}")
        self.p = p
        self.radius = radius
        self.root_system = root_system("A2")
        self.weyl = WeylGroup(self.root_system)
        cap = self.MAX_VERTICES if max_vertices is None else max_vertices
        self.origin = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
        self._sublattice_mats = (
            [((p, 0, 0), (0, 1, 0), (0, 0, 1))]
            + [((1, a, 0), (0, p, 0), (0, 0, 1)) for a in range(p)]
            + [((1, 0, b), (0, 1, c), (0, 0, p)) for b in range(p) for c in range(p)]
        )
        self._proj_points = (
            [(1, a, b) for a in range(p) for b in range(p)]
            + [(0, 1, c) for c in range(p)]
            + [(0, 0, 1)]
        )
        verts = {self.origin}
        adj: dict = {}
        queue = deque([self.origin])
        while queue:
            x = queue.popleft()
            kept = []
            for y in self.neighbor_classes(x):
                if y in verts:
                    kept.append(y)
                    continue
                if max(self._sigma_from_origin(y)) <= radius:
                    if len(verts) >= cap:
                        raise SizeGuardError(f"ball exceeds {cap} vertices")
                    verts.add(y)
                    queue.append(y)
                    kept.append(y)
            adj[x] = tuple(kept)
        self.vertices = tuple(sorted(verts))
        self._adj = adj
        self._index = {v: i for i, v in enumerate(self.vertices)}
        self._partition_cache: dict = {}

    # -- local structure ---------------------------------------------------------

    def neighbor_classes(self, x):
        """All 2(p^2+p+1) adjacent lattice classes, ball membership ignored."""
        p = self.p
        out = [_canonical_class(_matmul3(s, x), p) for s in self._sublattice_mats]
        for v in self._proj_points:
            w = [sum(v[i] * x[i][j] for i in range(3)) for j in range(3)]
            rows = [[p * e for e in row] for row in x] + [w]
            out.append(_canonical_class(rows, p))
        return out

    def neighbors(self, x):
        """Adjacent vertices inside the ball."""
        return self._adj[x]

    def contains(self, x) -> bool:
        return x in self._index

    def _sigma_from_origin(self, y):
        e1, e2, e3 = _sigma_valuations(y, self.p)
        return (e3 - e2, e2 - e1)

    def sigma(self, x, y):
        """Dominant coweight distance via elementary divisors; works for any
        two lattice classes, in or out of the ball."""
        if x == self.origin:
            return self._sigma_from_origin(y)
        c = _matmul3(y, _adjugate3(x))
        e1, e2, e3 = _sigma_valuations(c, self.p)
        return (e3 - e2, e2 - e1)

    def type_of(self, x) -> int:
        return _vp(_det3(x), self.p) % 3

    def sigma_partition(self, o):
        """{lambda: sorted vertex list} over the whole ball, cached per base."""
        if o not in self._partition_cache:
            part: dict = {}
            for y in self.vertices:
                part.setdefault(self.sigma(o, y), []).append(y)
            self._partition_cache[o] = part
        return self._partition_cache[o]

    def v_lambda(self, o, lam):
        """V_lambda(o), refusing bases/levels whose sphere may leave the ball."""
        nu = self.sigma(self.origin, o)
        if nu == (0, 0):
            if max(lam) > self.radius:
                raise ValueError("lambda-sphere exceeds the ball radius")
        else:
            a, b = nu[0] + lam[0], nu[1] + lam[1]
            if max(a + b // 2, b + a // 2) > self.radius:
                raise ValueError("lambda-sphere may exceed the ball radius")
        return list(self.sigma_partition(o).get(lam, []))

    def chambers_at(self, o):
        """Chambers of the link of o: adjacent pairs (u, v) with
        sigma(o,u) = lambda_1 and sigma(o,v) = lambda_2."""
        nbrs = self.neighbor_classes(o)
        us = [u for u in nbrs if self.sigma(o, u) == (1, 0)]
        vs = [v for v in nbrs if self.sigma(o, v) == (0, 1)]
        return [(u, v) for u in us for v in vs
                if self.sigma(u, v) in ((1, 0), (0, 1))]

    def to_network(self) -> FiniteNetwork:
        edges = []
        for x in self.vertices:
            for y in self._adj[x]:
                if x < y:
                    edges.append((x, y, 1))
        return FiniteNetwork(self.vertices, edges)

    def to_json(self) -> dict:
        return {
            "family": "a2ball",
            "p": self.p,
            "radius": self.radius,
            "vertices": [[list(r) for r in v] for v in self.vertices],
            "types": [self.type_of(v) for v in self.vertices],
            "edges": sorted(
                [self._index[x], self._index[y]]
                for x in self.vertices for y in self._adj[x] if x < y
            ),
        }

    # -- sector germs at a vertex --------------------------------------------------

    def first_chamber(self, o, z):
        """The initial link chamber of the sector from o toward a regular z.

        Needs sigma(o,z) with both coordinates >= 1; the two direction
        vertices are the unique neighbors of each type lying on a
        sigma-geodesic from o to z.
        """
        m = self.sigma(o, z)
        if m[0] < 1 or m[1] < 1:
            raise ValueError(f"sector target must be regular, got sigma={m}")
        nbrs = self.neighbor_classes(o)
        us = [u for u in nbrs
              if self.sigma(o, u) == (1, 0) and is_between(self, o, u, z)]
        vs = [v for v in nbrs
              if self.sigma(o, v) == (0, 1) and is_between(self, o, v, z)]
        if len(us) != 1 or len(vs) != 1:
            raise AssertionError(f"sector direction not unique: {len(us)}, {len(vs)}")
        return us[0], vs[0]

    def link_opposite(self, c1, c2) -> bool:
        """Opposition of two link chambers: neither flag's line lies in the
        other's plane (no cross-incidence)."""
        (u1, v1), (u2, v2) = c1, c2
        cross1 = self.sigma(u1, v2) in ((1, 0), (0, 1))
        cross2 = self.sigma(u2, v1) in ((1, 0), (0, 1))
        return not cross1 and not cross2

    def link_opposition_check(self, o, z, zp) -> bool:
        """Whether the sector germs at o toward z and zp point into a common
        apartment through o, decided inside the link of o."""
        return self.link_opposite(self.first_chamber(o, z), self.first_chamber(o, zp))

    def busemann_h(self, x, y, sector_vertices):
        """sigma(x,z) - sigma(y,z) for deep sector vertices z, stability-checked.

        The caller supplies at least two vertices along the sector, deepest
        last; all must give the same difference.
        """
        if len(sector_vertices) < 2:
            raise ValueError("need at least two sector vertices for stability")
        vals = {
            tuple(a - b for a, b in zip(self.sigma(x, z), self.sigma(y, z)))
            for z in sector_vertices
        }
        if len(vals) != 1:
            raise ValueError("Busemann value not stable at this depth")
        return vals.pop()


def a2_ball_build(p: int, radius: int) -> A2Ball:
    return A2Ball(p, radius)


# -- spherical A2 buildings from projective planes ---------------------------------

class SphericalA2:
    """Flags of the projective plane of order q (q prime), with W-distance."""

    def __init__(self, q: int) -> None:
        if q < 2 or any(q % d == 0 for d in range(2, int(q ** 0.5) + 1)):
            raise ValueError(f"q must be prime, got {q}")
        self.q = q
        self.root_system = root_system("A2")
        self.weyl = WeylGroup(self.root_system)
        self.points = (
            [(1, a, b) for a in range(q) for b in range(q)]
            + [(0, 1, c) for c in range(q)]
            + [(0, 0, 1)]
        )
        self.lines = list(self.points)
        self.chambers = tuple(
            (pt, ln) for pt in self.points for ln in self.lines
            if self.incident(pt, ln)
        )
        self._on_line = {ln: tuple(pt for pt in self.points if self.incident(pt, ln))
                         for ln in self.lines}
        self._through_point = {pt: tuple(ln for ln in self.lines if self.incident(pt, ln))
                               for pt in self.points}

    def incident(self, pt, ln) -> bool:
        return sum(a * b for a, b in zip(pt, ln)) % self.q == 0

    def weyl_distance(self, c1, c2) -> WeylElement:
        """delta(c1, c2): e / s1 (line shared) / s2 (point shared) / s1s2 /
        s2s1 / w0 by the incidence pattern."""
        (pt1, ln1), (pt2, ln2) = c1, c2
        if c1 == c2:
            return self.weyl.identity
        if ln1 == ln2:
            return self.weyl.from_word((1,))
        if pt1 == pt2:
            return self.weyl.from_word((2,))
        if self.incident(pt2, ln1):
            return self.weyl.from_word((1, 2))
        if self.incident(pt1, ln2):
            return self.weyl.from_word((2, 1))
        return self.weyl.from_word((1, 2, 1))

    def residue(self, c, subset):
        """All chambers at W-distance inside the standard parabolic of subset."""
        allowed = set(subset)
        if not allowed:
            return [c]
        if allowed == {1}:
            pt, ln = c
            return [(p2, ln) for p2 in self._on_line[ln]]
        if allowed == {2}:
            pt, ln = c
            return [(pt, l2) for l2 in self._through_point[pt]]
        return list(self.chambers)

    def proj_residue(self, residue_chambers, c):
        """The gate: unique gallery-distance minimizer to c in the residue."""
        best = min(self.weyl_distance(d, c).length for d in residue_chambers)
        gates = [d for d in residue_chambers
                 if self.weyl_distance(d, c).length == best]
        if len(gates) != 1:
            raise AssertionError("projection is not unique; not a residue?")
        return gates[0]

    def opposite_to_both(self, c1, c2):
        chamber, _ = self.opposite_to_both_verbose(c1, c2)
        return chamber

    def opposite_to_both_verbose(self, c1, c2):
        """A chamber opposite to both inputs, plus the improvement-step count.

        Start from any chamber opposite c1; while delta(c0, c2) = w is not
        w0, take s with l(sw) = l(w)+1: every other chamber of the s-panel
        of c0 moves delta(., c2) up to sw, and all but the gate toward c1
        stay opposite c1.  Thickness leaves at least one choice.
        """
        w0 = self.weyl.longest_element()
        c0 = next(d for d in self.chambers if self.weyl_distance(d, c1) == w0)
        steps = 0
        while True:
            w = self.weyl_distance(c0, c2)
            if w == w0:
                return c0, steps
            steps += 1
            if steps > w0.length:
                raise AssertionError("opposite-chamber search failed to terminate")
            s = next(i for i in (1, 2)
                     if self.weyl.mult(self.weyl.generator(i), w).length == w.length + 1)
            panel = self.residue(c0, {s})
            gate1 = self.proj_residue(panel, c1)
            c0 = next(d for d in panel if d != c0 and d != gate1)


# -- generic operation aliases ------------------------------------------------------

def sigma(model, x, y):
    return model.sigma(x, y)


def v_lambda(model, o, lam):
    return model.v_lambda(o, lam)


def weyl_distance(s: SphericalA2, c1, c2) -> WeylElement:
    return s.weyl_distance(c1, c2)


def residue(s: SphericalA2, c, subset):
    return s.residue(c, subset)


def proj_residue(s: SphericalA2, residue_chambers, c):
    return s.proj_residue(residue_chambers, c)


def opposite_to_both(s: SphericalA2, c1, c2):
    return s.opposite_to_both(c1, c2)


def link_opposition_check(b: A2Ball, o, z, zp) -> bool:
    return b.link_opposition_check(o, z, zp)


def busemann_h(model, x, y, sector_data):
    return model.busemann_h(x, y, sector_data)


def beta(b: TreeBuilding, x, e1, e2):
    return b.beta(x, e1, e2)
