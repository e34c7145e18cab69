"""Derived graphs: the double graph, Fisher graph, quadri-tiling graph,
Kasteleyn orientations and the combinatorial bijections between their
configurations.

Vertex keys used throughout:
  primal vertex        ("v", id)
  restricted-dual face ("f", face_id)
  double-graph white   ("w", edge_id)
  quadri vertex        ("q", edge_id, corner)   corner in {1,2,3,4}
  Fisher A-vertex      ("a", face_id, vertex_id)
  Fisher B-vertex      ("b", face_id, edge_id)
"""

import math
from dataclasses import dataclass, field

from .errors import BijectionError, IsoradialityError, OracleBudgetError, OrientationError


def vkey(v):
    return ("v", v)


def fkey(f):
    return ("f", f)


def wkey(e):
    return ("w", e)


# ---------------------------------------------------------------------------
# double graph
# ---------------------------------------------------------------------------

@dataclass
class DoubleGraph:
    """The double graph of an isoradial graph, optionally rooted.

    ``gd_edges`` maps (white edge_id, black key) to a record with the lifted
    quarter-rhombus angles seen from the white vertex and the half-angle of
    that quarter rhombus.  In the rooted variant the root vertex and its two
    incident edges are removed.
    """

    ig: object
    rooted: bool
    whites: list = field(default_factory=list)     # edge ids
    blacks: list = field(default_factory=list)     # typed keys, primal then dual
    gd_edges: dict = field(default_factory=dict)   # (w, black) -> dict
    at_white: dict = field(default_factory=dict)
    at_black: dict = field(default_factory=dict)
    theta_w: dict = field(default_factory=dict)    # white -> primal half-angle

    def __post_init__(self):
        if self.gd_edges:
            return
        ig = self.ig
        root = ig.root
        self.whites = ig.edge_list()
        prim = [vkey(v) for v in sorted(ig.base.coords) if not (self.rooted and v == root)]
        dual = [fkey(f) for f in range(len(ig.face_centers))]
        self.blacks = prim + dual
        for eid in self.whites:
            r = ig.rhombi[eid]
            self.theta_w[eid] = r.theta_bar
            a, b = r.alpha_bar, r.beta_bar
            items = [(vkey(r.v2), a, b, "v"),
                     (vkey(r.v1), a + math.pi, b + math.pi, "v"),
                     (fkey(r.f1), b - math.pi, a, "f")]
            if r.f2 is not None:
                items.append((fkey(r.f2), b, a + math.pi, "f"))
            for black, ae, be, kind in items:
                if self.rooted and black == vkey(root):
                    continue
                theta_e = r.theta_bar if kind == "v" else math.pi / 2 - r.theta_bar
                self.gd_edges[(eid, black)] = {
                    "alpha": ae, "beta": be, "theta": theta_e, "kind": kind,
                }
        for (w, black) in self.gd_edges:
            self.at_white.setdefault(w, []).append(black)
            self.at_black.setdefault(black, []).append(w)
        if self.rooted and len(self.blacks) != len(self.whites):
            raise BijectionError("rooted double graph is not balanced")

    def boundary_whites(self):
        out = set()
        for bp in self.ig.boundary_pairs:
            out.add(bp.wl)
            out.add(bp.wr)
        return out


def build_double(ig, rooted=True):
    return DoubleGraph(ig=ig, rooted=rooted)


# ---------------------------------------------------------------------------
# quadri-tiling graph
# ---------------------------------------------------------------------------

@dataclass
class QuadriGraph:
    """The quadri-tiling graph with fixed bipartite coloring.

    Corners of the quadrangle of edge e (rhombus v1,f1,v2,f2):
      1 = side (v1,f1)   black     2 = side (v2,f1)   white
      3 = side (v2,f2)   black     4 = side (v1,f2)   white
    Boundary rhombi carry corners 1,2 only; their quadrangles are single
    edges.  ``edges`` records for every GQ edge the black endpoint, white
    endpoint, its kind ("sn", "cn", "bq", "ext") and the lifted phase angle
    (half-sum convention) of the complex Kasteleyn matrix.
    """

    ig: object
    vertices: list = field(default_factory=list)
    blacks: list = field(default_factory=list)
    whites: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    side_of: dict = field(default_factory=dict)     # vertex -> side key (v, f)
    quad_of: dict = field(default_factory=dict)     # vertex -> edge id (its quadrangle)
    corner_of: dict = field(default_factory=dict)
    pair_role: dict = field(default_factory=dict)   # edge_id -> ("l"|"r", BoundaryPair)
    boundary_quads: list = field(default_factory=list)  # edge ids of boundary rhombi

    def __post_init__(self):
        if self.vertices:
            return
        ig = self.ig
        for bp in ig.boundary_pairs:
            self.pair_role[bp.wl] = ("l", bp)
            self.pair_role[bp.wr] = ("r", bp)

        def corner_side(r, corner):
            return {1: (r.v1, r.f1), 2: (r.v2, r.f1),
                    3: (r.v2, r.f2), 4: (r.v1, r.f2)}[corner]

        side_members = {}
        for eid in ig.edge_list():
            r = ig.rhombi[eid]
            corners = (1, 2) if r.f2 is None else (1, 2, 3, 4)
            if r.f2 is None:
                self.boundary_quads.append(eid)
            for c in corners:
                q = ("q", eid, c)
                self.vertices.append(q)
                self.quad_of[q] = eid
                self.corner_of[q] = c
                s = corner_side(r, c)
                self.side_of[q] = s
                side_members.setdefault(s, []).append(q)
                (self.blacks if c in (1, 3) else self.whites).append(q)

        black_set = set(self.blacks)
        # quadrangle edges
        for eid in ig.edge_list():
            r = ig.rhombi[eid]
            a, b = r.alpha_bar, r.beta_bar
            t = {c: ("q", eid, c) for c in (1, 2, 3, 4)}
            if r.f2 is None:
                role, bp = self.pair_role[eid]
                if role == "l":
                    # swapped embedding: the boundary quadrangle edge is flat
                    phase = bp.beta_l + math.pi / 2
                    self.edges.append((t[1], t[2], "bq", phase))
                else:
                    phase = 0.5 * (bp.alpha_r + bp.beta_r)
                    self.edges.append((t[1], t[2], "bq", phase))
                continue
            self.edges.append((t[1], t[2], "sn", 0.5 * (a + b)))
            self.edges.append((t[3], t[4], "sn", 0.5 * (a + b) + math.pi))
            self.edges.append((t[1], t[4], "cn", 0.5 * (a + b + math.pi)))
            self.edges.append((t[3], t[2], "cn", 0.5 * (a + b - math.pi)))

        # external edges: one per side hosting two triangles
        for s, members in sorted(side_members.items(), key=lambda kv: str(kv[0])):
            if len(members) == 1:
                continue
            if len(members) != 2:
                raise IsoradialityError(f"side {s} hosts {len(members)} triangles")
            x, y = members
            bx = x in black_set
            by = y in black_set
            if bx == by:
                raise OrientationError(f"external edge at side {s} not bicolored")
            blk, wht = (x, y) if bx else (y, x)
            eid = self.quad_of[blk]
            r = self.ig.rhombi[eid]
            role = self.pair_role.get(eid)
            if role and role[0] == "l" and self.corner_of[blk] == 1:
                # swapped embedding: this external edge carries the half-sum phase
                bp = role[1]
                phase = 0.5 * (bp.alpha_l + bp.beta_l)
            else:
                delta = r.alpha_bar if self.corner_of[blk] == 1 else r.alpha_bar + math.pi
                phase = delta - math.pi / 2
            self.edges.append((blk, wht, "ext", phase))

        self.vertices.sort()
        self.blacks.sort()
        self.whites.sort()

    # -- faces (combinatorial), used by the Kasteleyn orientation check -----
    def faces(self):
        ig = self.ig
        out = []
        # inner quadrangles, CCW
        for eid in ig.edge_list():
            if ig.rhombi[eid].f2 is not None:
                out.append(tuple(("q", eid, c) for c in (1, 2, 3, 4)))

        edge_ids = ig.edge_ids

        def corner_at(eid, side):
            r = ig.rhombi[eid]
            table = {(r.v1, r.f1): 1, (r.v2, r.f1): 2}
            if r.f2 is not None:
                table[(r.v2, r.f2)] = 3
                table[(r.v1, r.f2)] = 4
            c = table.get(side)
            if c is None:
                raise KeyError(f"side {side} not in rhombus {eid}")
            return ("q", eid, c)

        # faces around every restricted-dual vertex f: walk the face cycle
        for fi, cyc in enumerate(ig.base.faces):
            n = len(cyc)
            verts = []
            for i in range(n):
                v_a, v_b = cyc[i], cyc[(i + 1) % n]
                eid = edge_ids[(min(v_a, v_b), max(v_a, v_b))]
                verts.append(corner_at(eid, (v_a, fi)))
                verts.append(corner_at(eid, (v_b, fi)))
            out.append(tuple(verts))

        # faces around interior primal vertices
        boundary = ig.base.boundary_vertices()
        for v in sorted(ig.base.coords):
            if v in boundary:
                continue
            nbrs = ig.base.adj[v]
            d = len(nbrs)
            verts = []
            for i in range(d):
                w_a, w_b = nbrs[i], nbrs[(i + 1) % d]
                e_a = edge_ids[(min(v, w_a), max(v, w_a))]
                e_b = edge_ids[(min(v, w_b), max(v, w_b))]
                # shared face between consecutive edges (CCW): right face of (v->w_b)
                r_b = ig.rhombi[e_b]
                f_shared = r_b.f1 if r_b.v1 == v else r_b.f2
                verts.append(corner_at(e_a, (v, f_shared)))
                verts.append(corner_at(e_b, (v, f_shared)))
            out.append(tuple(verts))
        return out


def build_quadri(ig):
    return QuadriGraph(ig=ig)


# ---------------------------------------------------------------------------
# Fisher graph
# ---------------------------------------------------------------------------

@dataclass
class FisherGraph:
    """Fisher decorations over the restricted dual.

    Each decoration (one per bounded face f) is a wheel: A-vertices
    ("a", f, v) on an inner cycle indexed by the corners of the face, and
    B-vertices ("b", f, e) attached outside, one per face edge.  Triangles
    are (a_j, a_{j+1}, b_j) in CCW face order.  External edges join the two
    B-vertices of an inner primal edge; boundary B-vertices (on face edges
    that lie on the outer boundary) have no external edge.
    """

    ig: object
    a_vertices: list = field(default_factory=list)
    b_vertices: list = field(default_factory=list)
    internal_edges: list = field(default_factory=list)
    external_edges: list = field(default_factory=list)  # (bkey, bkey, edge_id)
    a_cycle: dict = field(default_factory=dict)          # f -> list of A keys, CCW
    triangles: dict = field(default_factory=dict)        # bkey -> (a_prev, a_next)
    boundary_b: set = field(default_factory=set)
    coords: dict = field(default_factory=dict)
    orientation: dict = field(default_factory=dict)      # (x, y) -> +-1
    faces: list = field(default_factory=list)

    def __post_init__(self):
        if self.a_vertices:
            return
        ig = self.ig
        edge_ids = ig.edge_ids
        ext_ports = {}
        for fi, cyc in enumerate(ig.base.faces):
            n = len(cyc)
            c = ig.face_centers[fi]
            # ports sit at the rhombus centers; keep the decoration well inside
            rho = min(
                abs(0.5 * (ig.base.coords[cyc[i]] + ig.base.coords[cyc[(i + 1) % n]]) - c)
                for i in range(n))
            a_keys = []
            for i in range(n):
                v = cyc[i]
                key = ("a", fi, v)
                a_keys.append(key)
                self.a_vertices.append(key)
                self.coords[key] = c + 0.30 * rho * (ig.base.coords[v] - c) / abs(
                    ig.base.coords[v] - c)
            self.a_cycle[fi] = a_keys
            for i in range(n):
                v_a, v_b = cyc[i], cyc[(i + 1) % n]
                eid = edge_ids[(min(v_a, v_b), max(v_a, v_b))]
                bkey = ("b", fi, eid)
                self.b_vertices.append(bkey)
                mid = 0.5 * (ig.base.coords[v_a] + ig.base.coords[v_b])
                self.coords[bkey] = c + 0.60 * rho * (mid - c) / abs(mid - c)
                a_prev, a_next = a_keys[i], a_keys[(i + 1) % n]
                self.triangles[bkey] = (a_prev, a_next)
                self.internal_edges.append((a_prev, a_next))
                self.internal_edges.append((bkey, a_prev))
                self.internal_edges.append((bkey, a_next))
                r = ig.rhombi[eid]
                if r.f2 is None:
                    self.boundary_b.add(bkey)
                else:
                    ext_ports.setdefault(eid, []).append(bkey)
        for eid, ports in sorted(ext_ports.items()):
            if len(ports) != 2:
                raise IsoradialityError(f"inner edge {eid} has {len(ports)} Fisher ports")
            self.external_edges.append((ports[0], ports[1], eid))
        self.a_vertices.sort()
        self.b_vertices.sort()

        # planar faces from coordinates, then a Kasteleyn orientation
        all_edges = [(x, y) for x, y in self.internal_edges] + [
            (x, y) for x, y, _ in self.external_edges]
        self.faces = _faces_from_coords(self.coords, all_edges)
        self.orientation = kasteleyn_orient(
            sorted(self.coords), [tuple(sorted(e, key=str)) for e in all_edges],
            self.faces)

    def vertices(self):
        return self.b_vertices + self.a_vertices

    def eps(self, x, y):
        return self.orientation[(x, y)]

    def degree_check(self):
        deg_int = {}
        for x, y in self.internal_edges:
            deg_int[x] = deg_int.get(x, 0) + 1
            deg_int[y] = deg_int.get(y, 0) + 1
        for a in self.a_vertices:
            if deg_int.get(a) != 4:
                raise IsoradialityError(f"A-vertex {a} internal degree {deg_int.get(a)}")
        for b in self.b_vertices:
            want = 2
            if deg_int.get(b) != want:
                raise IsoradialityError(f"B-vertex {b} internal degree {deg_int.get(b)}")


def build_fisher(ig):
    for cyc in ig.base.faces:
        if len(cyc) < 3:
            raise IsoradialityError("face of length < 3")
    fg = FisherGraph(ig=ig)
    fg.degree_check()
    return fg


def _faces_from_coords(coords, edges):
    """Bounded faces (CCW cycles) of a straight-line planar graph."""
    import cmath

    adj = {}
    for x, y in edges:
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)
    for v in adj:
        adj[v].sort(key=lambda w: cmath.phase(coords[w] - coords[v]) % (2 * math.pi))
    remaining = set()
    for x, y in edges:
        remaining.add((x, y))
        remaining.add((y, x))
    faces = []
    while remaining:
        start = min(remaining, key=str)
        cyc = []
        cur = start
        while True:
            cyc.append(cur[0])
            remaining.discard(cur)
            u, v = cur
            nbrs = adj[v]
            i = nbrs.index(u)
            cur = (v, nbrs[i - 1])
            if cur == start:
                break
        area = 0.0
        for i in range(len(cyc)):
            a, b = coords[cyc[i]], coords[cyc[(i + 1) % len(cyc)]]
            area += a.real * b.imag - a.imag * b.real
        if area > 0:
            faces.append(tuple(cyc))
    return faces


def kasteleyn_orient(vertices, edges, faces):
    """Edge orientation with every bounded face clockwise odd.

    Orients a spanning tree arbitrarily, then fixes the remaining edges face
    by face (each step a face with exactly one undecided edge is resolved).
    Returns the antisymmetric sign map (x, y) -> +-1.
    """
    vs = list(vertices)
    es = [tuple(e) for e in edges]
    adj = {}
    for i, (x, y) in enumerate(es):
        adj.setdefault(x, []).append((y, i))
        adj.setdefault(y, []).append((x, i))
    # spanning tree by BFS from the smallest vertex
    root = min(vs, key=str)
    seen = {root}
    tree = set()
    queue = [root]
    while queue:
        x = queue.pop(0)
        for y, i in sorted(adj.get(x, []), key=lambda t: (str(t[0]), t[1])):
            if y not in seen:
                seen.add(y)
                tree.add(i)
                queue.append(y)
    if len(seen) != len(vs):
        raise IsoradialityError("graph is not connected")
    orient = {}
    for i in sorted(tree):
        x, y = es[i]
        orient[i] = (x, y)

    face_edges = []
    eindex = {}
    for i, (x, y) in enumerate(es):
        eindex[(x, y)] = i
        eindex[(y, x)] = i
    for f in faces:
        idxs = []
        for j in range(len(f)):
            idxs.append(eindex[(f[j], f[(j + 1) % len(f)])])
        face_edges.append(idxs)

    undecided = [len([i for i in idxs if i not in orient]) for idxs in face_edges]
    pending = [fi for fi, n in enumerate(undecided) if n >= 0]
    done_faces = set()
    progress = True
    while progress:
        progress = False
        for fi in pending:
            if fi in done_faces:
                continue
            idxs = face_edges[fi]
            missing = [i for i in idxs if i not in orient]
            if len(missing) != 1:
                continue
            f = faces[fi]
            # count clockwise-co-oriented edges (traverse the CCW cycle reversed)
            cw_pairs = [(f[(j + 1) % len(f)], f[j]) for j in range(len(f))]
            n_co = 0
            missing_pair = None
            for (x, y) in cw_pairs:
                i = eindex[(x, y)]
                if i in orient:
                    if orient[i] == (x, y):
                        n_co += 1
                else:
                    missing_pair = (x, y)
            i = missing[0]
            orient[i] = missing_pair if n_co % 2 == 0 else (missing_pair[1], missing_pair[0])
            done_faces.add(fi)
            progress = True
    still = [i for i in range(len(es)) if i not in orient]
    if still:
        raise OrientationError(f"{len(still)} edges left unoriented")
    eps = {}
    for i, (x, y) in enumerate(es):
        if orient[i] == (x, y):
            eps[(x, y)], eps[(y, x)] = 1, -1
        else:
            eps[(x, y)], eps[(y, x)] = -1, 1
    # verify
    check_clockwise_odd(eps, faces, eindex=None)
    return eps


def check_clockwise_odd(eps, faces, eindex=None):
    for f in faces:
        n_co = 0
        for j in range(len(f)):
            x, y = f[(j + 1) % len(f)], f[j]   # clockwise traversal
            if eps[(x, y)] == 1:
                n_co += 1
        if n_co % 2 != 1:
            raise OrientationError(f"face {f} is not clockwise odd")


# ---------------------------------------------------------------------------
# Fisher <-> quadri correspondence and induced orientation
# ---------------------------------------------------------------------------

@dataclass
class FisherQuadriMap:
    """Vertex correspondences between the Fisher and quadri graphs."""

    fg: object
    qg: object
    b_of_black: dict = field(default_factory=dict)   # GQ black -> B key
    black_of_b: dict = field(default_factory=dict)
    a_of_side: dict = field(default_factory=dict)    # side (v,f) -> A key
    a_of_white: dict = field(default_factory=dict)   # GQ white -> A key (I_{W,A})
    a_of_black: dict = field(default_factory=dict)   # GQ black -> A key (D_{BQ,A})
    white_of_a: dict = field(default_factory=dict)
    ext_white: dict = field(default_factory=dict)    # GQ vertex -> its ext partner

    def __post_init__(self):
        if self.b_of_black:
            return
        fg, qg = self.fg, self.qg
        ig = qg.ig
        for (v, f) in {qg.side_of[q] for q in qg.vertices}:
            self.a_of_side[(v, f)] = ("a", f, v)
        for blk in qg.blacks:
            eid = qg.quad_of[blk]
            r = ig.rhombi[eid]
            f = r.f1 if qg.corner_of[blk] == 1 else r.f2
            self.b_of_black[blk] = ("b", f, eid)
            self.black_of_b[("b", f, eid)] = blk
        for x, y, kind, _ in qg.edges:
            if kind == "ext":
                self.ext_white[x] = y
                self.ext_white[y] = x
        for blk in qg.blacks:
            side = qg.side_of[blk]
            self.a_of_black[blk] = self.a_of_side[side]
        for wht in qg.whites:
            side = qg.side_of[wht]
            self.a_of_white[wht] = self.a_of_side[side]
            self.white_of_a[self.a_of_side[side]] = wht


def fisher_quadri_map(fg, qg):
    return FisherQuadriMap(fg=fg, qg=qg)


def induce_orientation_GQ(fg, qg):
    """Induced Kasteleyn orientation of the quadri graph from the Fisher one.

    For a black b with Fisher data (b, a, a') and opposite record (b', a''):
    eps(b_hat, w_ext) = eps(b, a); eps(b_hat, w_sn) = eps(b, a');
    eps(b_hat, w_cn) = eps(b, b') eps(b', a'').  Verified clockwise odd.
    """
    fqm = fisher_quadri_map(fg, qg)
    eps_f = fg.eps
    eps_q = {}
    for blk, wht, kind, _ in qg.edges:
        b = fqm.b_of_black[blk]
        a_ext = fqm.a_of_black[blk]           # A at the external side of blk
        a_prev, a_next = fg.triangles[b]
        a_other = a_next if a_ext == a_prev else a_prev
        if a_ext not in (a_prev, a_next):
            raise OrientationError(f"black {blk}: external A not in its triangle")
        if kind == "ext":
            val = eps_f(b, a_ext)
        elif kind in ("sn", "bq"):
            val = eps_f(b, a_other)
        elif kind == "cn":
            # b' = the B across the external Fisher edge; a'' = A of the
            # opposite white's external side
            bp = next(e for e in fg.external_edges if b in e[:2])
            b_op = bp[0] if bp[1] == b else bp[1]
            a_opp = fqm.a_of_white[wht]
            val = eps_f(b, b_op) * eps_f(b_op, a_opp)
        else:
            raise OrientationError(f"unknown edge kind {kind}")
        eps_q[(blk, wht)] = val
        eps_q[(wht, blk)] = -val
    check_clockwise_odd(eps_q, qg.faces())
    return eps_q


# ---------------------------------------------------------------------------
# Temperley / KPW bijection
# ---------------------------------------------------------------------------

class TemperleyMap:
    """Edge- and configuration-level Temperley bijection on a rooted double graph."""

    def __init__(self, dg):
        if not dg.rooted:
            raise BijectionError("Temperley map needs the rooted double graph")
        self.dg = dg
        self.ig = dg.ig

    def edge_image(self, w, black):
        """Directed primal/dual edge corresponding to the double-graph edge."""
        ig = self.ig
        r = ig.rhombi[w]
        if black[0] == "v":
            v = black[1]
            other = r.v2 if v == r.v1 else r.v1
            return ("v", v, other)
        f = black[1]
        if r.f2 is None:
            if f != r.f1:
                raise BijectionError("dual edge image mismatch")
            return ("f", f, "outer")
        other = r.f2 if f == r.f1 else r.f1
        return ("f", f, other)

    def matching_to_trees(self, matching):
        """Matching -> (primal r-directed tree, dual outer-directed tree)."""
        ig = self.ig
        prim_out, dual_out = {}, {}
        for (w, black) in matching:
            img = self.edge_image(w, black)
            if img[0] == "v":
                prim_out[img[1]] = (img[2], w)
            else:
                dual_out[img[1]] = (img[2], w)
        self._check_tree(prim_out, ig.root, set(ig.base.coords), "primal")
        self._check_tree(dual_out, "outer",
                         set(range(len(ig.face_centers))) | {"outer"}, "dual")
        return prim_out, dual_out

    @staticmethod
    def _check_tree(out_map, root, vertices, name):
        for v in vertices:
            if v == root:
                if v in out_map:
                    raise BijectionError(f"{name} root has an out-edge")
                continue
            if v not in out_map:
                raise BijectionError(f"{name} vertex {v} has no out-edge")
        for v in vertices:
            seen = set()
            cur = v
            while cur != root:
                if cur in seen:
                    raise BijectionError(f"{name} image contains a cycle through {v}")
                seen.add(cur)
                cur = out_map[cur][0]

    def trees_to_matching(self, prim_out, dual_out):
        """(tree, dual tree) -> matching of the rooted double graph."""
        ig = self.ig
        matching = set()
        for v, (v2, _w) in prim_out.items():
            eid = ig.edge_ids[(min(v, v2), max(v, v2))]
            matching.add((eid, vkey(v)))
        for f, (f2, w) in dual_out.items():
            matching.add((w, fkey(f)))
        covered = [w for (w, _b) in matching]
        if sorted(covered) != sorted(self.dg.whites):
            raise BijectionError("tree pair does not cover every white vertex")
        return matching


def temperley_map(dg):
    return TemperleyMap(dg)


def reference_matching_M1(dg):
    """The reference matching built from a BFS dual spanning tree rooted at
    the face next to the root, plus the induced black/white partition of the
    quadri graph.

    Returns (matching, partition) where partition maps "B1","B2","W1","W2"
    (and boundary sub-lists "B1d","W1d") to lists of quadri vertex keys.
    """
    ig = dg.ig
    tm = temperley_map(dg)
    root_pair = ig.root_pair()
    fc_root = root_pair.fc

    # BFS tree of the restricted dual from fc_root
    dual_adj = {}
    for (fa, fb), eid in ig.dual_edges:
        dual_adj.setdefault(fa, []).append((fb, eid))
        dual_adj.setdefault(fb, []).append((fa, eid))
    parent = {fc_root: None}
    order = [fc_root]
    qi = 0
    while qi < len(order):
        f = order[qi]
        qi += 1
        for g, eid in sorted(dual_adj.get(f, [])):
            if g not in parent:
                parent[g] = (f, eid)
                order.append(g)
    if len(parent) != len(ig.face_centers):
        raise BijectionError("restricted dual is not connected")

    dual_out = {}
    for f, par in parent.items():
        if par is None:
            dual_out[f] = ("outer", root_pair.wl)
        else:
            dual_out[f] = (par[0], par[1])
    crossed = {w for (_f, w) in dual_out.values()}
    # primal complement tree, directed toward the root
    prim_edges = [eid for eid in ig.edge_list() if eid not in crossed]
    adj = {}
    for eid in prim_edges:
        r = ig.rhombi[eid]
        adj.setdefault(r.v1, []).append((r.v2, eid))
        adj.setdefault(r.v2, []).append((r.v1, eid))
    parent_v = {ig.root: None}
    stack = [ig.root]
    while stack:
        v = stack.pop()
        for w, eid in sorted(adj.get(v, [])):
            if w not in parent_v:
                parent_v[w] = (v, eid)
                stack.append(w)
    if len(parent_v) != len(ig.base.coords):
        raise BijectionError("primal complement is not spanning")
    prim_out = {v: (pw[0], pw[1]) for v, pw in parent_v.items() if pw is not None}

    # fixed iteration order: summation order must not depend on hash seeds
    matching = tuple(sorted(tm.trees_to_matching(prim_out, dual_out)))

    # partition of quadri vertices
    qg = build_quadri(ig)
    part = {"B1": [], "B2": [], "W1": [], "W2": [], "B1d": [], "W1d": []}
    crossing = {}
    for x, y, kind, _ in qg.edges:
        if kind in ("sn", "cn", "bq"):
            # GQ edge crossing double-graph edge (w, black)
            eid = qg.quad_of[x]
            r = ig.rhombi[eid]
            c_b, c_w = qg.corner_of[x], qg.corner_of[y]
            pair = tuple(sorted((c_b, c_w)))
            black_gd = {(1, 2): fkey(r.f1), (3, 4): fkey(r.f2),
                        (1, 4): vkey(r.v1), (2, 3): vkey(r.v2)}[pair]
            crossing[(eid, black_gd)] = (x, y)
    match_by_white = {w: black for (w, black) in matching}
    for eid in ig.edge_list():
        r = ig.rhombi[eid]
        if r.f2 is None:
            part["B1"].append(("q", eid, 1))
            part["W1"].append(("q", eid, 2))
            part["B1d"].append(("q", eid, 1))
            part["W1d"].append(("q", eid, 2))
            continue
        black = match_by_white[eid]
        b1, w1 = crossing[(eid, black)]
        part["B1"].append(b1)
        part["W1"].append(w1)
        others = [("q", eid, c) for c in (1, 2, 3, 4)]
        for q in others:
            if q in (b1, w1):
                continue
            (part["B2"] if qg.corner_of[q] in (1, 3) else part["W2"]).append(q)
    for key in part:
        part[key].sort()
    return matching, part


def fisher_polygon_map(fg, matching):
    """External edges of a Fisher matching as a polygon configuration of the dual."""
    ext = set()
    ext_lookup = {}
    for x, y, eid in fg.external_edges:
        ext_lookup[tuple(sorted((x, y), key=str))] = eid
    deg = {}
    for e in matching:
        key = tuple(sorted(e, key=str))
        if key in ext_lookup:
            eid = ext_lookup[key]
            ext.add(eid)
            for end in key:
                deg[end[1]] = deg.get(end[1], 0) + 1
    # polygon configurations have even degree at every dual vertex
    dual_deg = {}
    for eid in ext:
        (fa, fb), _eid = next(
            (de for de in fg.ig.dual_edges if de[1] == eid))
        dual_deg[fa] = dual_deg.get(fa, 0) + 1
        dual_deg[fb] = dual_deg.get(fb, 0) + 1
    for f, d in dual_deg.items():
        if d % 2 != 0:
            raise BijectionError(f"odd polygon degree at dual vertex {f}")
    return ext


# ---------------------------------------------------------------------------
# matching enumeration (shared oracle)
# ---------------------------------------------------------------------------

def enumerate_matchings(vertices, edges, weights=None, budget=10 ** 6,
                        collect=False, marginals=False):
    """Weighted perfect-matching sum by exhaustive branching.

    Branches on the currently most constrained uncovered vertex (fail first);
    the naive lowest-id order blows up on Fisher decorations.
    Returns (count, weighted_sum[, matchings][, per-edge weighted sums]).
    """
    vs = sorted(vertices, key=str)
    pos = {v: i for i, v in enumerate(vs)}
    nbr = [[] for _ in vs]
    for idx, (x, y) in enumerate(edges):
        wgt = 1.0 if weights is None else weights[idx]
        nbr[pos[x]].append((pos[y], idx, wgt))
        nbr[pos[y]].append((pos[x], idx, wgt))
    n = len(vs)
    covered = [False] * n
    out = {"count": 0, "sum": 0.0, "nodes": 0}
    found = []
    marg = [0.0] * len(edges)
    stack_edges = []

    def pick():
        best, best_free = -1, None
        for i in range(n):
            if covered[i]:
                continue
            free = [t for t in nbr[i] if not covered[t[0]]]
            if best_free is None or len(free) < len(best_free):
                best, best_free = i, free
                if len(free) <= 1:
                    break
        return best, best_free

    def rec(weight):
        out["nodes"] += 1
        if out["nodes"] > budget:
            raise OracleBudgetError(f"matching enumeration exceeded {budget} nodes")
        i, free = pick()
        if i < 0:
            out["count"] += 1
            out["sum"] += weight
            if collect:
                found.append(tuple(sorted(stack_edges)))
            if marginals:
                for idx in stack_edges:
                    marg[idx] += weight
            return
        if not free:
            return
        covered[i] = True
        for j, idx, wgt in free:
            covered[j] = True
            stack_edges.append(idx)
            rec(weight * wgt)
            stack_edges.pop()
            covered[j] = False
        covered[i] = False

    if n % 2 == 0:
        rec(1.0)
    result = [out["count"], out["sum"]]
    if collect:
        result.append(found)
    if marginals:
        result.append(marg)
    return tuple(result)


# ---------------------------------------------------------------------------
# JSON export of derived graphs (debugging / plotting interface)
# ---------------------------------------------------------------------------

def double_graph_json(dg):
    import json

    ig = dg.ig
    verts = []
    for black in dg.blacks:
        role = "primal" if black[0] == "v" else "dual"
        z = (ig.base.coords[black[1]] if black[0] == "v"
             else ig.face_centers[black[1]])
        verts.append({"key": list(black), "role": role, "x": z.real, "y": z.imag})
    for w in dg.whites:
        r = ig.rhombi[w]
        z = 0.5 * (ig.base.coords[r.v1] + ig.base.coords[r.v2])
        verts.append({"key": ["w", w], "role": "white", "x": z.real, "y": z.imag})
    edges = [{"white": w, "black": list(b)} for (w, b) in sorted(dg.gd_edges)]
    return json.dumps({"vertices": verts, "edges": edges}, sort_keys=True)


def quadri_graph_json(qg):
    import json

    verts = [{"key": list(q), "role": "black" if q in set(qg.blacks) else "white"}
             for q in qg.vertices]
    edges = [{"black": list(b), "white": list(w), "kind": kind}
             for b, w, kind, _ in qg.edges]
    return json.dumps({"vertices": verts, "edges": edges}, sort_keys=True)


def fisher_graph_json(fg):
    import json

    verts = ([{"key": [a[0], a[1], a[2]], "role": "A",
               "x": fg.coords[a].real, "y": fg.coords[a].imag}
              for a in fg.a_vertices]
             + [{"key": [b[0], b[1], b[2]], "role": "B",
                 "boundary": b in fg.boundary_b,
                 "x": fg.coords[b].real, "y": fg.coords[b].imag}
                for b in fg.b_vertices])
    edges = ([{"ends": [list(x), list(y)], "kind": "internal"}
              for x, y in fg.internal_edges]
             + [{"ends": [list(x), list(y)], "kind": "external", "edge": eid}
                for x, y, eid in fg.external_edges])
    return json.dumps({"vertices": verts, "edges": edges}, sort_keys=True)
