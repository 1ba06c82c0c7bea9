import json

import numpy as np
import pytest

from oseenlab.core import GridField, SpectralGrid
from oseenlab.errors import ValidationError
from oseenlab.fieldio import payload_path, read_field, write_field
from oseenlab.profiles import gaussian_poly


def test_round_trip_is_bit_exact(tmp_path):
    grid = SpectralGrid(3.0, 7)
    f = gaussian_poly(1).sample(grid)
    write_field(tmp_path / "v.json", f)
    back = read_field(tmp_path / "v.json")
    assert back.grid == grid
    assert np.array_equal(back.values, f.values)


def test_payload_layout_is_x_fastest(tmp_path):
    grid = SpectralGrid(1.0, 3)
    vals = np.zeros((1,) + grid.shape, complex)
    vals[0, 1, 0, 0] = 1 + 2j
    write_field(tmp_path / "s.json", GridField(grid, vals))
    raw = np.fromfile(payload_path(tmp_path / "s.json"), dtype="<c16")
    assert raw[1] == 1 + 2j and np.count_nonzero(raw) == 1
    header = json.loads((tmp_path / "s.json").read_text())
    assert header["components"] == 1 and header["payload"] == "s.bin"


def test_truncated_payload_rejected(tmp_path):
    grid = SpectralGrid(1.0, 3)
    write_field(tmp_path / "s.json", gaussian_poly(0).sample(grid))
    data = payload_path(tmp_path / "s.json")
    data.write_bytes(data.read_bytes()[:-16])
    with pytest.raises(ValidationError):
        read_field(tmp_path / "s.json")


def test_missing_header_rejected(tmp_path):
    with pytest.raises(ValidationError):
        read_field(tmp_path / "nope.json")
