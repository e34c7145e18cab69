"""Planar graph machinery, isoradiality validation and angle lifts."""

import json
import math

import numpy as np
import pytest

from isodimer import isoradial as iso
from isodimer.elliptic import complete_integrals
from isodimer.errors import (
    DomainError,
    EmbeddingError,
    InfeasibleError,
    IsoradialityError,
    ParseError,
)


def square_json():
    s = 2.0 * math.sqrt(2.0)
    return json.dumps({
        "radius": 2.0,
        "vertices": [{"id": 0, "x": 0.0, "y": 0.0}, {"id": 1, "x": s, "y": 0.0},
                     {"id": 2, "x": s, "y": s}, {"id": 3, "x": 0.0, "y": s}],
        "edges": [[0, 1], [1, 2], [2, 3], [3, 0]],
    })


def test_load_graph_square():
    g = iso.load_graph(square_json())
    assert len(g.coords) == 4
    assert len(g.faces) == 1
    assert len(g.outer_face) == 4


def test_load_graph_two_triangles():
    g = iso.build_triangle_pair()
    assert len(g.faces) == 2
    assert len(g.outer_face) == 4
    # round-trip through the JSON interface
    g2 = iso.load_graph(iso.dump_graph(g))
    assert g2.edges == g.edges


def test_load_graph_crossing_edges():
    data = json.loads(square_json())
    data["vertices"].append({"id": 4, "x": 1.0, "y": -1.0})
    data["vertices"].append({"id": 5, "x": 1.0, "y": 4.0})
    data["edges"].append([4, 5])
    with pytest.raises(EmbeddingError):
        iso.load_graph(json.dumps(data))


def test_load_graph_parse_errors():
    with pytest.raises(ParseError):
        iso.load_graph(b"{not json")
    with pytest.raises(ParseError):
        iso.load_graph(json.dumps({"radius": 1.0, "vertices": [], "edges": []}))


def test_build_square_lattice_counts():
    g = iso.build_square_lattice(1, 1)
    assert (len(g.coords), len(g.edges), len(g.faces)) == (4, 4, 1)
    g = iso.build_square_lattice(2, 2)
    assert (len(g.coords), len(g.edges), len(g.faces)) == (9, 12, 4)
    with pytest.raises(DomainError):
        iso.build_square_lattice(0, 1)


def test_make_isoradial_basics(ig_2x2):
    ig = ig_2x2
    assert len(ig.base.coords) == 17
    assert len(ig.base.edges) == 20
    assert len(ig.face_centers) == 4
    # Euler |E| = |V| + |V*| - 1
    assert len(ig.base.edges) == len(ig.base.coords) + len(ig.face_centers) - 1
    inner = [r for r in ig.rhombi.values() if not r.boundary]
    assert all(abs(r.theta_bar - math.pi / 4) < 1e-12 for r in inner)
    # boundary pairs have equal half-angles; the arc-midpoint construction
    # gives 3 pi/8 on square lattices
    for bp in ig.boundary_pairs:
        assert abs(bp.theta_bar - 3.0 * math.pi / 8) < 1e-12
        assert abs(bp.beta_l - bp.alpha_r - 2.0 * math.pi) < 1e-12
        gap = 0.5 * (bp.alpha_l - bp.beta_r)
        assert 2 * ig.epsilon < gap < math.pi - 2 * ig.epsilon


def test_make_isoradial_root_rule():
    g = iso.build_square_lattice(2, 2)
    ig = iso.make_isoradial(g)
    # default root = midpoint of the lexicographically smallest boundary edge
    first_boundary = min(g.boundary_edges())
    mids = [bp.vc for bp in ig.boundary_pairs
            if {bp.vl, bp.vr} == set(first_boundary)]
    assert ig.root == mids[0]
    other = [bp.vc for bp in ig.boundary_pairs if bp.vc != ig.root][0]
    ig2 = iso.make_isoradial(g, root_hint=other)
    assert ig2.root == other
    with pytest.raises(DomainError):
        iso.make_isoradial(g, root_hint=0)


def test_make_isoradial_rejects_thin_angle():
    # two faces sharing a near-diameter chord: the shared inner edge has
    # theta = 0.01 < epsilon (boundary edges are immune: the arc midpoint
    # halves their central angle)
    theta = 0.01
    psi = math.pi / 2 - theta
    a, h = 2.0 * math.sin(psi), 2.0 * math.cos(psi)
    g = iso.PlanarGraph(
        coords={0: complex(-a, h), 1: complex(a, h), 2: complex(0.0, -2.0),
                3: complex(0.0, 2.0 * h + 2.0)},
        edges=[(0, 1), (1, 2), (2, 0), (0, 3), (1, 3)])
    with pytest.raises(IsoradialityError):
        iso.make_isoradial(g)


def test_make_isoradial_rejects_non_isoradial():
    g = iso.PlanarGraph(coords={0: 0j, 1: 1 + 0j, 2: 1 + 1j, 3: 0 + 1j},
                        edges=[(0, 1), (1, 2), (2, 3), (3, 0)])
    with pytest.raises(IsoradialityError):
        iso.make_isoradial(g)


def test_dual_is_isoradial(ig_hex):
    # every interior primal vertex is the circumcenter of its dual face
    ig = ig_hex
    boundary = ig.base.boundary_vertices()
    for v in ig.base.coords:
        if v in boundary:
            continue
        for w in ig.base.adj[v]:
            eid = ig.edge_ids[(min(v, w), max(v, w))]
            r = ig.rhombi[eid]
            for f in (r.f1, r.f2):
                if f is not None:
                    assert abs(abs(ig.face_centers[f] - ig.base.coords[v]) - 2.0) < 1e-9


def test_train_tracks_invariants(ig_2x2, ig_hex):
    for ig in (ig_2x2, ig_hex):
        tracks = iso.train_tracks(ig)
        counts = {}
        for t in tracks:
            for e in t.rhombi:
                counts[e] = counts.get(e, 0) + 1
        # each rhombus belongs to exactly two tracks
        assert set(counts.values()) == {2}
        for t in tracks:
            # all crossed sides of a chain are parallel
            assert 0.0 <= t.direction < math.pi


def test_train_track_counts_square():
    # split n x m lattices carry 2(n+m) boundary mini-chains plus 2(n+m)
    # diagonal chains; the idealized unsplit count n+m differs by this
    # boundary convention
    for n, m in ((1, 1), (2, 2), (3, 2)):
        ig = iso.make_isoradial(iso.build_square_lattice(n, m))
        assert len(iso.train_tracks(ig)) == 4 * (n + m)


def test_admissible_u_levels(ig_2x2):
    p = complete_integrals(0.5)
    us = iso.admissible_u(ig_2x2, p, "base", count=4)
    K = p.bigK
    assert np.allclose(us, [0.0, K, 2 * K, 3 * K])
    excl = iso._excluded_set(ig_2x2, p, "doubleprime")
    us = iso.admissible_u(ig_2x2, p, "doubleprime", delta=K / 16, count=4)
    for u in us:
        for e in excl:
            d = abs((u - e) % (4 * K))
            assert min(d, 4 * K - d) >= K / 16 - 1e-12
    with pytest.raises(InfeasibleError):
        iso.admissible_u(ig_2x2, p, "doubleprime", delta=2.0 * K, count=4)


def test_admissible_excluded_set_square(ig_2x2):
    # boundary half-rhombi of the square lattice exclude all multiples of K/2
    p = complete_integrals(0.5)
    excl = iso._excluded_set(ig_2x2, p, "doubleprime")
    expected = {round(j * p.bigK / 2, 9) % round(4 * p.bigK, 9) for j in range(8)}
    assert {round(e, 9) for e in excl} <= {round(j * p.bigK / 2, 9) for j in range(9)}
    assert len(excl) >= 8


def test_graph_hash_depends_on_root():
    g = iso.build_square_lattice(2, 2)
    ig1 = iso.make_isoradial(g)
    other = [bp.vc for bp in ig1.boundary_pairs if bp.vc != ig1.root][0]
    ig2 = iso.make_isoradial(g, root_hint=other)
    assert ig1.graph_hash() != ig2.graph_hash()


def test_boundary_vectors_parallel_pairs(ig_2x2, ig_hex):
    # each of the two boundary-vector families {alpha_l, beta_r} and
    # {alpha_r, beta_l} pairs up within itself (every track exits parallel to
    # how it entered), and their union carries all train-track directions
    from collections import Counter

    for ig in (ig_2x2, ig_hex):
        fam1 = Counter(round(x % math.pi, 9) % round(math.pi, 9)
                       for bp in ig.boundary_pairs
                       for x in (bp.alpha_l, bp.beta_r))
        fam2 = Counter(round(x % math.pi, 9) % round(math.pi, 9)
                       for bp in ig.boundary_pairs
                       for x in (bp.alpha_r, bp.beta_l))
        for fam in (fam1, fam2):
            assert all(v % 2 == 0 for v in fam.values())
        track_dirs = {round(t.direction % math.pi, 9) % round(math.pi, 9)
                      for t in iso.train_tracks(ig)}
        assert set(fam1) | set(fam2) == track_dirs


def test_square_3x2_interior_angles():
    # interior edges of any square-lattice block keep theta = pi/4
    ig = iso.make_isoradial(iso.build_square_lattice(3, 2))
    inner = [r for r in ig.rhombi.values() if not r.boundary]
    assert inner
    assert all(abs(r.theta_bar - math.pi / 4) < 1e-12 for r in inner)
