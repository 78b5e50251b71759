import itertools

import pytest

from isingmotif import INFINITY, TorusLattice
from isingmotif.errors import LatticeTooSmall


def test_square_lattice_neighbors():
    lat = TorusLattice(2, 8, rho=1, p=1)
    assert lat.neighbors((0, 0)) == ((0, 1), (0, 7), (1, 0), (7, 0))
    assert lat.neighbor_count == 4


def test_linf_adds_diagonals():
    lat = TorusLattice(2, 8, rho=1, p=INFINITY)
    assert len(lat.neighbors((0, 0))) == 8


def test_wraparound_d1():
    lat = TorusLattice(1, 4, rho=1, p=1)
    assert lat.neighbors((3,)) == ((0,), (2,))


def test_neighbor_symmetry_and_irreflexivity():
    for p in (1, 2, INFINITY):
        lat = TorusLattice(2, 5, rho=2, p=p)
        for x in lat.vertices():
            nbrs = lat.neighbors(x)
            assert x not in nbrs
            for y in nbrs:
                assert x in lat.neighbors(y)


def test_translation_covariance():
    lat = TorusLattice(2, 6, rho=1, p=INFINITY)
    for x in lat.vertices():
        shifted = tuple(sorted(lat.add(y, x) for y in lat.neighbors((0, 0))))
        assert lat.neighbors(x) == shifted


def test_ball_sizes():
    lat1 = TorusLattice(2, 8, rho=1, p=1)
    assert len(lat1.ball((0, 0), 1).members) == 5
    lat2 = TorusLattice(2, 8, rho=1, p=INFINITY)
    assert len(lat2.ball((0, 0), 1).members) == 9


def test_ball_rejects_small_lattice():
    lat = TorusLattice(1, 4, rho=1, p=1)
    with pytest.raises(LatticeTooSmall):
        lat.ball((0,), 2)


def test_internal_edge_counts():
    lat = TorusLattice(2, 8, rho=1, p=1)
    assert lat.internal_edge_count(lat.ball((0, 0), 1)) == 4
    lat1 = TorusLattice(1, 8, rho=1, p=1)
    assert lat1.internal_edge_count(lat1.ball((0,), 1)) == 2
    # brute-force oracle on the 3x3 Chebyshev block
    latinf = TorusLattice(2, 8, rho=1, p=INFINITY)
    ball = latinf.ball((0, 0), 1)
    brute = sum(
        1
        for u, v in itertools.combinations(ball.members, 2)
        if v in latinf.neighbors(u)
    )
    assert latinf.internal_edge_count(ball) == 20 == brute


def test_beta_alpha_independent_of_n_and_center():
    for p in (1, INFINITY):
        small = TorusLattice(2, 7, rho=1, p=p)
        big = TorusLattice(2, 11, rho=1, p=p)
        for r in (0, 1, 2):
            balls = [small.ball((0, 0), r), small.ball((3, 5), r), big.ball((2, 2), r)]
            sizes = {len(b.members) for b in balls}
            assert sizes == {small.ball_size(r)}
            alphas = {lat.internal_edge_count(b) for lat, b in zip((small, small, big), balls)}
            assert len(alphas) == 1


def test_ball_translation():
    lat = TorusLattice(2, 9, rho=1, p=1)
    base = lat.ball((0, 0), 2)
    shifted = lat.ball((4, 7), 2)
    assert shifted.members == tuple(sorted(lat.add(v, (4, 7)) for v in base.members))


def test_boundary_and_closure():
    lat = TorusLattice(1, 8, rho=1, p=1)
    ball = lat.ball((0,), 1)
    assert lat.boundary(ball) == ((2,), (6,))
    closure = lat.closure(ball)
    assert set(closure.members) == set(ball.members) | set(lat.boundary(ball))
    assert closure.radius == 2


def test_graph_distance_is_a_metric():
    # exhaustive on small lattices
    for d, n in ((1, 6), (2, 4)):
        lat = TorusLattice(d, n, rho=1, p=1)
        verts = list(lat.vertices())
        dist = {(x, y): lat.graph_distance(x, y) for x in verts for y in verts}
        for x in verts:
            assert dist[(x, x)] == 0
            for y in verts:
                assert dist[(x, y)] == dist[(y, x)]
                assert (dist[(x, y)] == 0) == (x == y)
                for z in verts:
                    assert dist[(x, z)] <= dist[(x, y)] + dist[(y, z)]


def test_site_index_roundtrip_and_order():
    lat = TorusLattice(2, 5, rho=1, p=1)
    for i, v in enumerate(lat.vertices()):
        assert lat.site_index(v) == i
        assert lat.vertex_at(i) == v


def test_edges_each_once():
    lat = TorusLattice(2, 4, rho=1, p=1)
    edges = lat.edges()
    assert len(edges) == len(set(edges))
    assert len(edges) == lat.num_sites * lat.neighbor_count // 2
    assert all(i < j for i, j in edges)


def test_tiny_torus_neighbor_dedup():
    # n = 2: +1 and -1 reach the same vertex, which must be listed once
    lat = TorusLattice(1, 2, rho=1, p=1)
    assert lat.neighbors((0,)) == ((1,),)
    assert len(lat.edges()) == 1
