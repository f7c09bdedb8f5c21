import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsynth.geometry import (THRESHOLD_TOL, ControlSystem, Facet, GeometryError, InputSet, MultiAffineField,
                              OverlappingPredicates, PartitionGrid, PointOutsideRect, PredicateOutsideDomain,
                              Rect, all_facets, facet_vertices, facets_of_vertex, initial_grid, interpolate,
                              vertex_weights)


def case_field():
    return MultiAffineField(2, 2, {(1, 0): (-1, 0), (0, 1): (0, -1), (1, 1): (1, 1)})


@st.composite
def rects(draw, n=2):
    a = draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.05, 3), min_size=n, max_size=n))
    return Rect(tuple(a), tuple(x + y for x, y in zip(a, w)))


class TestRect:
    def test_invalid_corners(self):
        with pytest.raises(GeometryError):
            Rect((0, 0), (1, 0))
        with pytest.raises(GeometryError):
            Rect((0,), (1, 1))
        with pytest.raises(GeometryError):
            Rect((0, np.nan), (1, 1))

    def test_vertices_follow_selector_bits(self):
        r = Rect((-1.5, -0.2), (-1.0, 0.2))
        assert np.allclose(r.vertex(0), [-1.5, -0.2])
        assert np.allclose(r.vertex(1), [-1.0, -0.2])
        assert np.allclose(r.vertex(2), [-1.5, 0.2])
        assert np.allclose(r.vertex(3), [-1.0, 0.2])
        assert r.volume == pytest.approx(0.2)

    def test_facets(self):
        assert [str(f) for f in all_facets(2)] == ["-e1", "+e1", "-e2", "+e2"]
        assert Facet.parse("+e2") == Facet(1, 1)
        assert Facet(0, 1).opposite == Facet(0, -1)
        with pytest.raises(GeometryError):
            Facet(0, 0)
        with pytest.raises(GeometryError):
            Facet.parse("e1")
        r = Rect((0, 0), (1, 1))
        assert facet_vertices(r, Facet(0, 1)) == [1, 3]
        assert facets_of_vertex(r, 1) == [Facet(0, 1), Facet(1, -1)]

    @given(rects(), st.lists(st.floats(0, 1), min_size=2, max_size=2))
    def test_weights_are_a_partition_of_unity(self, r, t):
        x = r.lo + np.array(t) * r.widths
        w = vertex_weights(r, x)
        assert np.all(w >= -1e-12)
        assert w.sum() == pytest.approx(1.0)
        # interpolating the coordinates reproduces the point
        coords = [r.vertex(v) for v in range(4)]
        assert np.allclose(interpolate(r, coords, x, check=False), x)

    def test_interpolate_outside_raises(self):
        r = Rect((0, 0), (1, 1))
        with pytest.raises(PointOutsideRect):
            interpolate(r, np.zeros((4, 1)), [2.0, 0.5])


class TestField:
    def test_case_study_drift(self):
        h = case_field()
        assert np.allclose(h.eval([0.5, -2.0]), [-0.5 - 1.0, 2.0 - 1.0])
        assert np.allclose(h([[1, 1], [0, 0]]), [[0, 0], [0, 0]])

    @given(rects(), st.lists(st.floats(0, 1), min_size=2, max_size=2))
    def test_multi_affine_is_its_own_interpolant(self, r, t):
        h = case_field()
        x = r.lo + np.array(t) * r.widths
        at_vertices = [h.eval(r.vertex(v)) for v in range(4)]
        assert np.allclose(interpolate(r, at_vertices, x, check=False), h.eval(x), atol=1e-9)

    def test_bad_terms(self):
        with pytest.raises(GeometryError):
            MultiAffineField(2, 2, {(2, 0): (1, 0)})
        with pytest.raises(GeometryError):
            MultiAffineField(2, 2, {(1, 0): (1,)})

    def test_control_system_shapes(self):
        X = Rect((-2, -2), (2, 2))
        sys = ControlSystem(case_field(), [[1], [1]], InputSet((-1,), (1,)), X)
        assert (sys.n, sys.m) == (2, 1)
        assert np.allclose(sys.rhs([0.0, 0.0], [0.5]), [0.5, 0.5])
        with pytest.raises(GeometryError):
            ControlSystem(case_field(), [[1, 0], [1, 0]], InputSet((-1,), (1,)), X)

    def test_input_set(self):
        U = InputSet((-1, -1), (1, 1), G=((1, 1),), g=(1,))
        assert U.contains([0.5, 0.5])
        assert not U.contains([0.9, 0.9])
        assert not U.contains([-2, 0])


class TestGrid:
    def grid(self):
        X = Rect((0, 0), (4, 2))
        return initial_grid(X, {0: [Rect((1, 0), (2, 1))], 1: [Rect((3, 1), (4, 2))]}, default=2)

    def test_initial_grid_uses_predicate_edges(self):
        g = self.grid()
        assert g.thresholds == ((0, 1, 2, 3, 4), (0, 1, 2))
        assert g.shape == (4, 2)
        assert g.label(g.flat_index((1, 0))) == 0
        assert g.label(g.flat_index((3, 1))) == 1
        assert g.labels.count(2) == 6

    def test_neighbors_and_boundary(self):
        g = self.grid()
        q = g.flat_index((1, 0))
        assert g.neighbor(q, Facet(0, 1)) == g.flat_index((2, 0))
        assert g.neighbor(q, Facet(1, 1)) == g.flat_index((1, 1))
        assert g.neighbor(q, Facet(1, -1)) is None
        assert g.is_boundary(q, Facet(1, -1))

    def test_locate_is_lower_closed(self):
        g = self.grid()
        assert g.locate([1.0, 0.5]) == g.flat_index((1, 0))
        assert g.locate([4.0, 2.0]) == g.flat_index((3, 1))
        assert g.locate([4.1, 0.0]) is None

    def test_refined_inherits_labels(self):
        g = self.grid()
        fine = g.refined([(0, 1, 1.5, 2, 3, 4), (0, 1, 2)])
        assert fine.shape == (5, 2)
        for q in fine.cells():
            assert fine.label(q) == g.label(g.locate(fine.rect(q).center))
        assert fine.volume_of(fine.cells()) == pytest.approx(8.0)

    def test_refined_merges_near_duplicates(self):
        g = self.grid()
        fine = g.refined([(0, 1, 1 + THRESHOLD_TOL / 10, 2, 3, 4), (0, 1, 2)])
        assert fine.thresholds == g.thresholds

    def test_overlapping_predicates(self):
        X = Rect((0, 0), (4, 2))
        with pytest.raises(OverlappingPredicates):
            initial_grid(X, {0: [Rect((0, 0), (2, 1))], 1: [Rect((1, 0), (3, 1))]}, 2)

    def test_predicate_outside(self):
        X = Rect((0, 0), (4, 2))
        with pytest.raises(PredicateOutsideDomain):
            initial_grid(X, {0: [Rect((3, 0), (5, 1))]}, 2)

    def test_bad_grid(self):
        with pytest.raises(GeometryError):
            PartitionGrid(((0, 1),), (0, 1))
        with pytest.raises(GeometryError):
            PartitionGrid(((0, 0, 1),), (0, 1))

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.01, 3.99), max_size=6), st.lists(st.floats(0.01, 1.99), max_size=6))
    def test_refinement_stays_proposition_preserving(self, xs, ys):
        g = self.grid()
        fine = g.refined([list(g.thresholds[0]) + xs, list(g.thresholds[1]) + ys])
        boxes = {0: Rect((1, 0), (2, 1)), 1: Rect((3, 1), (4, 2))}
        for q in fine.cells():
            r = fine.rect(q)
            for p, box in boxes.items():
                if r.interiors_overlap(box):
                    assert box.contains_rect(r) and fine.label(q) == p
