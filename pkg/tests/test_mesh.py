import numpy as np
import pytest
from hypothesis import given, strategies as st

from radcond.mesh import TimeGrid, boundary_measure, build_mesh


def test_uniform_1d_subdivision():
    m = build_mesh(1, [1.0], [4])
    assert m.cell_size == (0.25,)
    np.testing.assert_allclose(m.centers[0], [0.125, 0.375, 0.625, 0.875])
    assert len(m.boundary_faces) == 2
    assert [p.normal.tolist() for p in m.boundary_patches] == [[-1.0], [1.0]]


def test_face_counts_and_normals_3d():
    m = build_mesh(3, [1.0, 2.0, 3.0], [2, 3, 4])
    assert m.n_boundary_faces == 2 * (3 * 4 + 2 * 4 + 2 * 3)
    for p in m.boundary_patches:
        assert np.linalg.norm(p.normal) == 1.0
        assert p.normal[p.axis] == p.side
    np.testing.assert_allclose(boundary_measure(m), 2 * (2 * 3 + 1 * 3 + 1 * 2))


@given(
    dim=st.integers(1, 3),
    data=st.data(),
)
def test_volume_sums_to_box(dim, data):
    extents = data.draw(st.lists(st.floats(0.1, 10.0), min_size=dim, max_size=dim))
    cells = data.draw(st.lists(st.integers(2, 9), min_size=dim, max_size=dim))
    m = build_mesh(dim, extents, cells)
    assert m.n_cells * m.cell_volume == pytest.approx(np.prod(extents), rel=1e-12)
    for a in range(dim):
        assert m.cell_size[a] == pytest.approx(extents[a] / cells[a])


def test_lexicographic_indexing_round_trip():
    m = build_mesh(3, [1, 1, 1], [2, 3, 4])
    assert m.index((0, 0, 1)) == 1
    assert m.index((1, 0, 0)) == 12
    for k in range(m.n_cells):
        assert m.index(m.multi_index(k)) == k


@pytest.mark.parametrize("dim, extents, cells", [
    (0, [1.0], [4]), (4, [1.0] * 4, [2] * 4), (1, [0.0], [4]), (1, [-1.0], [4]),
    (1, [1.0], [1]), (2, [1.0], [4, 4]), (1, [1.0], [2.5]),
])
def test_rejects_invalid(dim, extents, cells):
    with pytest.raises(ValueError):
        build_mesh(dim, extents, cells)


def test_refine_doubles_cells():
    m = build_mesh(2, [1, 2], [3, 4]).refine()
    assert m.shape == (6, 8)


def test_timegrid():
    tg = TimeGrid(0.3, 7)
    assert tg.dt * tg.steps == pytest.approx(0.3, rel=1e-15)
    assert len(tg.times) == 8 and tg.times[0] == 0.0
    for bad in [(0.0, 3), (1.0, 0), (1.0, 1.5), (float("nan"), 2)]:
        with pytest.raises(ValueError):
            TimeGrid(*bad)
