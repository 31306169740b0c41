import numpy as np
import pytest

from holeflow.dvar import DvarParseError, read_dvar, write_dvar
from holeflow.fixtures import circle_mesh, make_fixture


def test_roundtrip_triangle_mesh(tmp_path):
    v = make_fixture("flat_stack", 2, 3, radius=0.2, spacing=0.001)
    path = tmp_path / "mesh.dvar"
    write_dvar(v, path)
    back = read_dvar(path)
    assert np.array_equal(back.vertices, v.vertices)  # 17 digits: exact
    assert np.array_equal(back.faces, v.faces)
    assert np.array_equal(back.multiplicity, v.multiplicity)
    assert np.array_equal(back.boundary, v.boundary)


def test_roundtrip_segment_mesh(tmp_path):
    v = circle_mesh(3)
    path = tmp_path / "circle.dvar"
    write_dvar(v, path)
    back = read_dvar(path)
    assert np.array_equal(back.vertices, v.vertices)
    assert back.ambient_dim == 2


@pytest.mark.parametrize("content,lineno", [
    ("", 1),
    ("DVAR 2 3\n", 1),
    ("DVAR 1 5\n", 1),
    ("DVAR 1 3\nv 1 2\n", 2),
    ("DVAR 1 3\nv a b c\n", 2),
    ("DVAR 1 3\nv 0 0 0\nf 0 0\n", 3),
    ("DVAR 1 3\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2 0\n", 5),
    ("DVAR 1 3\nv 0 0 0\nb x\n", 3),
    ("DVAR 1 3\nq 1\n", 2),
])
def test_parse_errors_carry_line_numbers(tmp_path, content, lineno):
    path = tmp_path / "bad.dvar"
    path.write_text(content)
    with pytest.raises(DvarParseError) as err:
        read_dvar(path)
    assert f"line {lineno}" in str(err.value)


def test_out_of_range_indices(tmp_path):
    path = tmp_path / "oob.dvar"
    path.write_text("DVAR 1 3\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 9 1\n")
    with pytest.raises(DvarParseError, match="out of range"):
        read_dvar(path)
