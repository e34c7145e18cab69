"""Planar embedded graphs, isoradiality, diamond-graph angles and lattice builders.

The embedding works in complex coordinates.  Every primal edge owns a rhombus
record with a canonical direction (v1 -> v2), the adjacent circumcenters
f1 (right) / f2 (left), the embedding half-angle theta_bar and a lifted pair
(alpha_bar, beta_bar) with beta_bar - alpha_bar = 2 theta_bar.  Boundary
rhombus pairs additionally carry the pinned lifts (alpha_l, beta_l, alpha_r,
beta_r) of the two quarter-rhombi at the midpoint vertex, with
beta_l = alpha_r + 2 pi.
"""

import cmath
import json
import math
from dataclasses import dataclass, field

from .errors import (
    DomainError,
    EmbeddingError,
    InfeasibleError,
    IsoradialityError,
    ParseError,
)

RADIUS = 2.0
_GEOM_TOL = 1e-9
DEFAULT_EPSILON = 0.05


def _tau(z):
    """Angle of a complex vector in [0, 2 pi)."""
    a = cmath.phase(z)
    return a + 2.0 * math.pi if a < 0 else a


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def _seg_intersect(p1, p2, q1, q2):
    """Proper or improper intersection of open segments (shared endpoints excluded)."""
    d1 = _cross(p2 - p1, q1 - p1)
    d2 = _cross(p2 - p1, q2 - p1)
    d3 = _cross(q2 - q1, p1 - q1)
    d4 = _cross(q2 - q1, p2 - q1)
    eps = 1e-12
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    return False


@dataclass
class PlanarGraph:
    """Straight-line planar embedded graph with derived rotation system and faces."""

    coords: dict
    edges: list
    adj: dict = field(default_factory=dict)
    faces: list = field(default_factory=list)          # bounded faces, CCW cycles
    outer_face: tuple = ()                              # CW cycle

    def __post_init__(self):
        if not self.adj:
            self._derive()

    def _derive(self):
        ids = sorted(self.coords)
        if len(ids) != len(set(ids)):
            raise ParseError("duplicate vertex ids")
        seen = set()
        edges = []
        for a, b in self.edges:
            if a == b:
                raise ParseError(f"loop edge at vertex {a}")
            if a not in self.coords or b not in self.coords:
                raise ParseError(f"edge ({a},{b}) references unknown vertex")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ParseError(f"duplicate edge {key}")
            seen.add(key)
            edges.append(key)
        self.edges = sorted(edges)
        adj = {v: [] for v in ids}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for v in ids:
            if not adj[v]:
                raise ParseError(f"isolated vertex {v}")
            adj[v].sort(key=lambda w: _tau(self.coords[w] - self.coords[v]))
        self.adj = adj
        self._check_planarity()
        self._trace_faces()

    def _check_planarity(self):
        es = self.edges
        for i in range(len(es)):
            a, b = es[i]
            for j in range(i + 1, len(es)):
                c, d = es[j]
                if len({a, b, c, d}) < 4:
                    continue
                if _seg_intersect(self.coords[a], self.coords[b],
                                  self.coords[c], self.coords[d]):
                    raise EmbeddingError(f"edges {es[i]} and {es[j]} cross")

    def _trace_faces(self):
        # Next directed edge: at v, turn to the neighbor just clockwise of u.
        # With CCW-sorted rotations this traces the face to the left of (u, v);
        # bounded faces come out CCW, the outer face CW.
        remaining = set()
        for a, b in self.edges:
            remaining.add((a, b))
            remaining.add((b, a))
        faces = []
        while remaining:
            start = min(remaining)
            cycle = []
            cur = start
            while True:
                cycle.append(cur[0])
                remaining.discard(cur)
                u, v = cur
                nbrs = self.adj[v]
                i = nbrs.index(u)
                w = nbrs[i - 1]
                cur = (v, w)
                if cur == start:
                    break
            faces.append(tuple(cycle))
        outer, bounded = [], []
        for f in faces:
            area = 0.0
            for i in range(len(f)):
                area += _cross(self.coords[f[i]], self.coords[f[(i + 1) % len(f)]])
            (bounded if area > 0 else outer).append((f, area))
        if len(outer) != 1:
            raise EmbeddingError("embedding does not have a unique outer face")
        self.outer_face = outer[0][0]
        self.faces = sorted((f for f, _ in bounded), key=lambda f: min(f))
        n_v, n_e, n_f = len(self.coords), len(self.edges), len(self.faces) + 1
        if n_v - n_e + n_f != 2:
            raise EmbeddingError(f"Euler check failed: V={n_v} E={n_e} F={n_f}")

    def boundary_edges(self):
        out = set()
        f = self.outer_face
        for i in range(len(f)):
            a, b = f[i], f[(i + 1) % len(f)]
            out.add((min(a, b), max(a, b)))
        return out

    def boundary_vertices(self):
        return set(self.outer_face)


def load_graph(json_bytes):
    """Parse the normative graph JSON into a PlanarGraph.

    Expected format:
    {"radius": 2.0, "vertices": [{"id": int, "x": float, "y": float}, ...],
     "edges": [[int, int], ...]}.
    """
    try:
        data = json.loads(json_bytes)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    try:
        if abs(float(data["radius"]) - RADIUS) > _GEOM_TOL:
            raise ParseError(f"radius must be {RADIUS}, got {data['radius']}")
        coords = {int(v["id"]): complex(float(v["x"]), float(v["y"]))
                  for v in data["vertices"]}
        edges = [(int(a), int(b)) for a, b in data["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed graph JSON: {exc}") from exc
    return PlanarGraph(coords=coords, edges=edges)


def dump_graph(g):
    """Inverse of load_graph; deterministic key order."""
    data = {
        "radius": RADIUS,
        "vertices": [{"id": v, "x": g.coords[v].real, "y": g.coords[v].imag}
                     for v in sorted(g.coords)],
        "edges": [[a, b] for a, b in g.edges],
    }
    return json.dumps(data, sort_keys=True, indent=1)


def _circumcenter(points):
    """Common center of |z - c| = RADIUS through all points; None if inconsistent."""
    p0 = points[0]
    best = None
    for i in range(1, len(points)):
        for j in range(i + 1, len(points)):
            a, b = points[i] - p0, points[j] - p0
            det = 2.0 * _cross(a, b)
            if abs(det) < 1e-9:
                continue
            ux = (b.imag * abs(a) ** 2 - a.imag * abs(b) ** 2) / det
            uy = (a.real * abs(b) ** 2 - b.real * abs(a) ** 2) / det
            best = p0 + complex(ux, uy)
            break
        if best is not None:
            break
    if best is None:
        return None
    for q in points:
        if abs(abs(q - best) - RADIUS) > _GEOM_TOL:
            return None
    return best


def _point_in_polygon(z, poly):
    inside = False
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (a.imag > z.imag) != (b.imag > z.imag):
            xcross = a.real + (z.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            if z.real < xcross:
                inside = not inside
    return inside


@dataclass
class RhombusRecord:
    """Diamond-graph data of one primal edge, canonical direction (v1, v2).

    f1/f2 are face indices (into IsoradialGraph.face_centers) of the right/left
    circumcenter; f2 is None for boundary edges (the reflected outer point is
    virtual).  alpha_bar/beta_bar are the lifted rhombus-vector angles with
    2 e^{i alpha_bar} on the right of (v1, v2).
    """

    edge_id: int
    v1: int
    v2: int
    f1: int
    f2: object
    theta_bar: float
    alpha_bar: float
    beta_bar: float
    boundary: bool


@dataclass
class BoundaryPair:
    """A boundary rhombus pair: vertices (vl, vc, vr), inner center fc.

    wl/wr are the edge ids of (vl, vc) and (vc, vr); alpha_l..beta_r are the
    lifted quarter-rhombus vectors of the double-graph edges (vc, wl) and
    (vc, wr), pinned so that beta_l = alpha_r + 2 pi.
    """

    vl: int
    vc: int
    vr: int
    fc: int
    wl: int
    wr: int
    theta_bar: float
    alpha_l: float
    beta_l: float
    alpha_r: float
    beta_r: float
    is_root: bool = False


@dataclass
class TrainTrack:
    rhombi: tuple       # ordered edge ids
    direction: float    # common parallel direction mod pi


@dataclass
class IsoradialGraph:
    base: PlanarGraph
    face_centers: list            # circumcenter per bounded face (index = face id)
    dual_edges: list              # ((face_i, face_j), edge_id) for inner primal edges
    rhombi: dict                  # edge_id -> RhombusRecord
    edge_ids: dict                # (a, b) sorted pair -> edge_id
    boundary_pairs: list          # BoundaryPair, sorted by vc
    midpoints: set                # the added boundary midpoint vertices
    root: int                     # chosen root midpoint
    epsilon: float
    original: PlanarGraph = None  # the pre-split input graph

    # --- convenience -----------------------------------------------------
    def edge_list(self):
        return sorted(self.rhombi)

    def pair_of_vc(self, vc):
        for bp in self.boundary_pairs:
            if bp.vc == vc:
                return bp
        raise KeyError(vc)

    def root_pair(self):
        return self.pair_of_vc(self.root)

    def vertex_edge_fans(self):
        """For each vertex: incident edge ids in CCW order."""
        fans = {}
        for v, nbrs in self.base.adj.items():
            fans[v] = [self.edge_ids[(min(v, w), max(v, w))] for w in nbrs]
        return fans

    def rhombus_vectors_from(self, edge_id, v):
        """Lifted (right, left) rhombus-vector angles of an edge seen from endpoint v."""
        r = self.rhombi[edge_id]
        if v == r.v1:
            return r.alpha_bar, r.beta_bar
        if v == r.v2:
            return r.alpha_bar + math.pi, r.beta_bar + math.pi
        raise KeyError(f"vertex {v} not an endpoint of edge {edge_id}")

    def graph_hash(self):
        import hashlib

        blob = dump_graph(self.base) + f"|root={self.root}"
        return hashlib.sha1(blob.encode()).hexdigest()[:12]


def _validate_isoradial_faces(g, epsilon):
    centers = []
    for f in g.faces:
        pts = [g.coords[v] for v in f]
        c = _circumcenter(pts)
        if c is None:
            raise IsoradialityError(
                f"face {f} is not inscribed in a circle of radius {RADIUS}")
        if not _point_in_polygon(c, pts):
            raise IsoradialityError(f"circumcenter of face {f} lies outside the face")
        centers.append(c)
    return centers


def make_isoradial(g, epsilon=DEFAULT_EPSILON, root_hint=None):
    """Build the full isoradial structure from a radius-2 isoradial planar graph.

    Adds the arc-midpoint vertex on every boundary edge, derives the restricted
    dual, the per-edge rhombus records with consistent angle lifts, and the
    boundary rhombus pairs with the pinned left lift beta_l = alpha_r + 2 pi.
    """
    if not g.faces:
        raise IsoradialityError("graph has no bounded face")
    _validate_isoradial_faces(g, epsilon)

    # face id of the unique bounded face containing a boundary edge
    edge_faces = {}
    for fi, f in enumerate(g.faces):
        for i in range(len(f)):
            a, b = f[i], f[(i + 1) % len(f)]
            edge_faces.setdefault((min(a, b), max(a, b)), []).append(fi)

    boundary = sorted(g.boundary_edges())
    for v in g.boundary_vertices():
        n_b = sum(1 for e in boundary if v in e)
        if n_b != 2:
            raise IsoradialityError(
                f"boundary vertex {v} has {n_b} incident boundary edges (need 2)")

    coords = dict(g.coords)
    next_id = max(coords) + 1
    midpoints = set()
    new_edges = [e for e in g.edges if e not in set(boundary)]
    mid_of_edge = {}
    face_centers_pre = _validate_isoradial_faces(g, epsilon)
    for (a, b) in boundary:
        flist = edge_faces[(a, b)]
        if len(flist) != 1:
            raise IsoradialityError(f"boundary edge {(a, b)} adjacent to {len(flist)} faces")
        c = face_centers_pre[flist[0]]
        mid = 0.5 * (coords[a] + coords[b])
        if abs(mid - c) < _GEOM_TOL:
            raise IsoradialityError(f"degenerate boundary edge {(a, b)}")
        m = c + RADIUS * (mid - c) / abs(mid - c)
        coords[next_id] = m
        midpoints.add(next_id)
        mid_of_edge[(a, b)] = next_id
        new_edges.append((a, next_id))
        new_edges.append((next_id, b))
        next_id += 1

    base = PlanarGraph(coords=coords, edges=new_edges)
    face_centers = _validate_isoradial_faces(base, epsilon)

    # face ids adjacent to each edge of the split graph
    edge_faces2 = {}
    for fi, f in enumerate(base.faces):
        for i in range(len(f)):
            a, b = f[i], f[(i + 1) % len(f)]
            edge_faces2.setdefault((min(a, b), max(a, b)), []).append(fi)
    boundary2 = base.boundary_edges()

    edge_ids = {e: i for i, e in enumerate(base.edges)}
    rhombi = {}
    dual_edges = []

    def theta_of(v1, v2, c):
        # half-angle of the rhombus at the primal vertices
        half_chord = 0.5 * abs(base.coords[v2] - base.coords[v1])
        psi = math.asin(min(1.0, half_chord / RADIUS))
        return math.pi / 2 - psi

    def right_face(v1, v2, fi):
        c = face_centers[fi]
        return _cross(base.coords[v2] - base.coords[v1], c - base.coords[v1]) < 0

    for (a, b), eid in sorted(edge_ids.items(), key=lambda kv: kv[1]):
        flist = edge_faces2[(a, b)]
        is_bnd = (a, b) in boundary2
        if is_bnd:
            if len(flist) != 1:
                raise IsoradialityError(f"boundary edge {(a, b)} face count {len(flist)}")
            fc = flist[0]
            # canonical direction with the bounded face on the right
            v1, v2 = (a, b) if right_face(a, b, fc) else (b, a)
            f1, f2 = fc, None
        else:
            if len(flist) != 2:
                raise IsoradialityError(f"inner edge {(a, b)} face count {len(flist)}")
            v1, v2 = a, b
            f1 = flist[0] if right_face(v1, v2, flist[0]) else flist[1]
            f2 = flist[1] if f1 == flist[0] else flist[0]
            dual_edges.append(((min(f1, f2), max(f1, f2)), eid))
        theta = theta_of(v1, v2, f1)
        if not (epsilon < theta < math.pi / 2 - epsilon):
            raise IsoradialityError(
                f"edge {(a, b)}: half-angle {theta:.4f} outside ({epsilon}, pi/2-{epsilon})")
        d = _tau(base.coords[v2] - base.coords[v1])
        alpha = (d - theta) % (2.0 * math.pi)
        beta = alpha + 2.0 * theta
        rhombi[eid] = RhombusRecord(eid, v1, v2, f1, f2, theta, alpha, beta, is_bnd)

    # boundary pairs: one per midpoint vertex; re-lift the left rhombus
    pairs = []
    for vc in sorted(midpoints):
        nbrs = base.adj[vc]
        if len(nbrs) != 2:
            raise IsoradialityError(f"midpoint {vc} has degree {len(nbrs)}")
        x, y = nbrs
        e_x = edge_ids[(min(vc, x), max(vc, x))]
        fc = rhombi[e_x].f1
        c = face_centers[fc]
        # vl is the endpoint with fc on the right of (vl -> vc)
        if _cross(base.coords[vc] - base.coords[x], c - base.coords[x]) < 0:
            vl, vr = x, y
        else:
            vl, vr = y, x
        el = edge_ids[(min(vc, vl), max(vc, vl))]
        er = edge_ids[(min(vc, vr), max(vc, vr))]
        rl, rr = rhombi[el], rhombi[er]
        if not (rl.v1 == vl and rl.v2 == vc and rr.v1 == vc and rr.v2 == vr):
            raise IsoradialityError(f"boundary pair at {vc}: unexpected canonical directions")
        theta = rl.theta_bar
        if abs(rr.theta_bar - theta) > 1e-9:
            raise IsoradialityError(f"boundary pair at {vc}: unequal half-angles")
        # pin: beta_bar(left edge) = alpha_bar(right edge) + pi
        new_beta = rr.alpha_bar + math.pi
        shift = new_beta - rl.beta_bar
        n_turns = round(shift / (2.0 * math.pi))
        if abs(shift - 2.0 * math.pi * n_turns) > 1e-9:
            raise IsoradialityError(f"boundary pair at {vc}: lift mismatch {shift:.6f}")
        rl.alpha_bar += 2.0 * math.pi * n_turns
        rl.beta_bar += 2.0 * math.pi * n_turns
        # pair-record vectors are the from-vc quarter-rhombus vectors
        al, bl = rl.alpha_bar + math.pi, rl.beta_bar + math.pi
        ar, br = rr.alpha_bar, rr.beta_bar
        gap = 0.5 * (al - br)
        if not (2 * epsilon < gap < math.pi - 2 * epsilon):
            raise IsoradialityError(f"boundary pair at {vc}: gap {gap:.4f} out of range")
        pairs.append(BoundaryPair(vl, vc, vr, fc, el, er, theta, al, bl, ar, br))

    if not pairs:
        raise IsoradialityError("graph has no boundary pairs")

    # default root: midpoint of the boundary edge with smallest endpoint pair
    if root_hint is not None:
        if root_hint not in midpoints:
            raise DomainError(f"root_hint {root_hint} is not a boundary midpoint vertex")
        root = root_hint
    else:
        root = mid_of_edge[min(mid_of_edge)]
    for bp in pairs:
        bp.is_root = bp.vc == root

    return IsoradialGraph(base=base, face_centers=face_centers, dual_edges=dual_edges,
                          rhombi=rhombi, edge_ids=edge_ids, boundary_pairs=pairs,
                          midpoints=midpoints, root=root, epsilon=epsilon, original=g)


def train_tracks(ig):
    """Maximal chains of edge-adjacent rhombi with parallel crossed sides."""
    # side slots per rhombus: 0:(v1,f1) dir alpha, 1:(f1,v2) dir beta,
    # 2:(v2,f2) dir alpha+pi, 3:(f2,v1) dir beta+pi; axes {0,2} and {1,3}.
    def side_key(eid, slot):
        r = ig.rhombi[eid]
        corners = [(r.v1, ("f", r.f1)), (("f", r.f1), r.v2),
                   (r.v2, ("f", r.f2)), (("f", r.f2), r.v1)]
        a, b = corners[slot]
        if r.f2 is None and slot in (2, 3):
            return ("virt", eid, slot)
        return ("side", tuple(sorted((a, b), key=str)))

    shared = {}
    for eid in ig.rhombi:
        for slot in range(4):
            shared.setdefault(side_key(eid, slot), []).append((eid, slot))
    for key, lst in shared.items():
        if key[0] == "side" and len(lst) > 2:
            raise IsoradialityError(f"side {key} shared by {len(lst)} rhombi")

    used = set()
    tracks = []
    for eid in sorted(ig.rhombi):
        for axis in (0, 1):
            if (eid, axis) in used:
                continue
            chain = [(eid, axis)]
            # walk forward through slot axis+2, backward through slot axis
            for start_slot, forward in ((axis + 2, True), (axis, False)):
                cur, slot = eid, start_slot
                while True:
                    key = side_key(cur, slot)
                    nxt = [t for t in shared.get(key, []) if t[0] != cur]
                    if key[0] == "virt" or not nxt:
                        break
                    cur, in_slot = nxt[0]
                    ax = in_slot % 2
                    if (cur, ax) in used or (cur, ax) in (c for c in chain):
                        break
                    if forward:
                        chain.append((cur, ax))
                    else:
                        chain.insert(0, (cur, ax))
                    slot = (in_slot + 2) % 4
            for item in chain:
                used.add(item)
            r0 = ig.rhombi[chain[0][0]]
            d = (r0.alpha_bar if chain[0][1] == 0 else r0.beta_bar) % math.pi
            tracks.append(TrainTrack(tuple(c[0] for c in chain), d))
    return tracks


def _excluded_set(ig, p, level):
    from .elliptic import angle_transform

    big_k = p.bigK
    period = 4.0 * big_k
    excl = []
    for bp in ig.boundary_pairs:
        al = angle_transform(bp.alpha_l, p)
        bl = angle_transform(bp.beta_l, p)
        if level == "prime":
            excl.append((al + 2.0 * big_k) % period)
        elif level == "doubleprime":
            for x in (al, bl):
                excl.append(x % (2.0 * big_k))
                excl.append(x % (2.0 * big_k) + 2.0 * big_k)
        elif level == "base":
            pass
        else:
            raise DomainError(f"unknown admissibility level {level!r}")
    out = []
    for x in sorted(excl):
        if not out or min(abs(x - y) for y in out) > 1e-9:
            out.append(x)
    return out


def admissible_u(ig, p, level="base", delta=None, count=4):
    """Deterministic admissible spectral values in [0, 4K).

    Points are chosen near the even grid j*4K/count, displaced to keep a
    circular distance >= delta from the excluded set of the given level and
    from each other.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    period = 4.0 * p.bigK
    if delta is None:
        delta = p.bigK / 16.0
    if delta <= 0:
        raise DomainError("delta must be positive")
    excl = _excluded_set(ig, p, level)

    def circ_dist(a, b):
        d = abs(a - b) % period
        return min(d, period - d)

    def admissible(x, chosen):
        return all(circ_dist(x, e) >= delta for e in excl) and all(
            circ_dist(x, c) >= delta for c in chosen)

    n_grid = 8192
    step = period / n_grid
    chosen = []
    for j in range(count):
        target = period * j / count
        found = None
        for off in range(n_grid // 2 + 1):
            for sgn in (1, -1) if off else (1,):
                x = (target + sgn * off * step) % period
                if admissible(x, chosen):
                    found = x
                    break
            if found is not None:
                break
        if found is None:
            raise InfeasibleError(
                f"cannot place {count} admissible points at margin delta={delta}")
        chosen.append(found)
    return chosen


def build_square_lattice(n, m):
    """An n x m block of unit squares scaled so every face has circumradius 2."""
    if n < 1 or m < 1:
        raise DomainError("lattice dimensions must be >= 1")
    s = RADIUS * math.sqrt(2.0)
    coords = {}
    for j in range(m + 1):
        for i in range(n + 1):
            coords[j * (n + 1) + i] = complex(i * s, j * s)
    edges = []
    for j in range(m + 1):
        for i in range(n + 1):
            vid = j * (n + 1) + i
            if i < n:
                edges.append((vid, vid + 1))
            if j < m:
                edges.append((vid, vid + n + 1))
    return PlanarGraph(coords=coords, edges=edges)


def build_hex_triangles():
    """Six equilateral triangles around a central vertex (non-square instance)."""
    s = RADIUS * math.sqrt(3.0)
    coords = {0: 0j}
    edges = []
    for i in range(6):
        coords[1 + i] = s * cmath.exp(1j * (math.pi / 6 + i * math.pi / 3))
    for i in range(6):
        edges.append((0, 1 + i))
        edges.append((1 + i, 1 + (i + 1) % 6))
    return PlanarGraph(coords=coords, edges=edges)


def build_triangle_pair():
    """Two equilateral triangles sharing an edge."""
    s = RADIUS * math.sqrt(3.0)
    h = s * math.sqrt(3.0) / 2.0
    coords = {0: 0j, 1: complex(s, 0.0), 2: complex(s / 2, h), 3: complex(s / 2, -h)}
    edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)]
    return PlanarGraph(coords=coords, edges=edges)


def build_irregular_pair():
    """A triangle and a quadrilateral sharing an edge, with uneven arcs.

    All rhombus half-angles are distinct within each face, which exercises
    the angle-lift machinery far harder than the regular builders.
    """
    c1 = 0j
    ang = [math.radians(a) for a in (15.0, 130.0, 255.0)]
    v = [RADIUS * cmath.exp(1j * a) for a in ang]
    a, b = v[0], v[1]
    d = (b - a) / abs(b - a)
    proj = a + d * ((c1 - a).real * d.real + (c1 - a).imag * d.imag)
    c2 = 2.0 * proj - c1
    base = cmath.phase(c2 - c1)
    coords = {0: v[0], 1: v[1], 2: v[2],
              3: c2 + RADIUS * cmath.exp(1j * (base + 0.55)),
              4: c2 + RADIUS * cmath.exp(1j * (base - 0.70))}
    pts = {i: coords[i] for i in (0, 1, 3, 4)}
    order = sorted(pts, key=lambda i: cmath.phase(pts[i] - c2))
    edges = [(0, 1), (1, 2), (2, 0)]
    for i in range(4):
        x, y = order[i], order[(i + 1) % 4]
        if {x, y} != {0, 1}:
            edges.append((min(x, y), max(x, y)))
    return PlanarGraph(coords=coords, edges=edges)


def builder_graph(spec):
    """Resolve a builder spec string like 'square:3x2', 'hex' or 'tripair'."""
    if spec.startswith("square:"):
        dims = spec.split(":", 1)[1]
        n, m = (int(t) for t in dims.split("x"))
        return build_square_lattice(n, m)
    if spec == "hex":
        return build_hex_triangles()
    if spec == "tripair":
        return build_triangle_pair()
    if spec == "irregular":
        return build_irregular_pair()
    raise DomainError(f"unknown builder spec {spec!r}")
