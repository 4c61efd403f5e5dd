import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mfmaxwell import io
from mfmaxwell.grid import Grid

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, (4, 4, 4), elements=finite), arrays(np.float64, (2, 3, 4, 4, 4), elements=finite))
def test_vtk_round_trip_is_exact(tmp_path_factory, s, v):
    g = Grid(4, margin=1)
    path = tmp_path_factory.mktemp("vtk") / "f.vtk"
    io.write_vtk(path, g, {"a": s}, {"V": v[0] + 1j * v[1], "W": v[0]})
    g2, arr = io.read_vtk(path)
    assert g2.n == 4
    assert np.array_equal(arr["a"], s)
    assert np.array_equal(arr["V"], v[0] + 1j * v[1])
    assert np.array_equal(arr["W"], v[0])


def test_vtk_layout_is_x_fastest(tmp_path):
    g = Grid(3, margin=1)
    a = np.arange(27.0).reshape(3, 3, 3)
    io.write_vtk(tmp_path / "f.vtk", g, {"a": a})
    lines = (tmp_path / "f.vtk").read_text().split("\n")
    start = lines.index("LOOKUP_TABLE default") + 1
    vals = [float(x) for x in lines[start:start + 3]]
    assert vals == [a[0, 0, 0], a[1, 0, 0], a[2, 0, 0]]


def test_vtk_is_lf_ascii_with_nan(tmp_path):
    g = Grid(3, margin=1)
    a = np.full((3, 3, 3), np.nan)
    io.write_vtk(tmp_path / "f.vtk", g, {"a": a})
    raw = (tmp_path / "f.vtk").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    raw.decode("ascii")
    assert np.isnan(io.read_vtk(tmp_path / "f.vtk")[1]["a"]).all()


def test_vtk_shape_errors(tmp_path):
    g = Grid(3, margin=1)
    with pytest.raises(ValueError):
        io.write_vtk(tmp_path / "f.vtk", g, {"a": np.zeros((3, 3))})
    with pytest.raises(ValueError):
        io.write_vtk(tmp_path / "f.vtk", g, vectors={"a": np.zeros((2, 3, 3, 3))})
    (tmp_path / "bad.vtk").write_text("hello\n")
    with pytest.raises(ValueError):
        io.read_vtk(tmp_path / "bad.vtk")


def test_embed_band():
    g = Grid(8)
    a = np.ones(g.band_shape)
    full = io.embed_band(g, a)
    assert full.shape == g.cell_shape
    assert np.nansum(full) == a.size and np.isnan(full[0, 0, 0])


def test_config_hash_ignores_key_order():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 2})


def _manifest(tmp_path):
    (tmp_path / "x.txt").write_text("payload\n")
    m = io.Manifest("synthesize", "c" * 64, "p" * 64, {"n": 8})
    m.add(tmp_path, "x.txt")
    m.timing = {"forward": 1.0}
    m.write(tmp_path)
    return m


def test_manifest_round_trip(tmp_path):
    m = _manifest(tmp_path)
    back = io.Manifest.load(tmp_path)
    assert back.files == m.files and back.dataset_id == m.dataset_id
    d = json.loads((tmp_path / "manifest.json").read_text())
    assert d["dataset_id"] == m.dataset_id and d["tool"] == "mfmaxwell"


def test_dataset_id_ignores_timing(tmp_path):
    m = _manifest(tmp_path)
    before = m.dataset_id
    m.timing = {"forward": 99.0}
    assert m.dataset_id == before


def test_manifest_detects_tampering(tmp_path):
    _manifest(tmp_path)
    (tmp_path / "x.txt").write_text("changed\n")
    with pytest.raises(io.ManifestError, match="checksum"):
        io.Manifest.load(tmp_path)
    io.Manifest.load(tmp_path, verify=False)
    (tmp_path / "x.txt").unlink()
    with pytest.raises(io.ManifestError, match="missing"):
        io.Manifest.load(tmp_path)
    with pytest.raises(io.ManifestError):
        io.Manifest.load(tmp_path / "nowhere")
