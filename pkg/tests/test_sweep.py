import numpy as np
import pytest

from segfire.exceptions import InvalidInputError
from segfire.model import SegNetConfig
from segfire.sweep import sweep

TINY = SegNetConfig(input_shape=(16, 16, 3), conv_filters=(2, 2, 2), dense_units=(3,), seed=0)


@pytest.fixture(scope="module")
def grid():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 256, size=(8, 16, 16, 3)).astype(np.uint8)
    y = ["fire", "nonfire"] * 4
    # 16 -> 8 -> 4 -> 2 -> 1 -> 1 -> 0: the deepest cell collapses
    return sweep((x, y), (x, y), conv_range=(3, 5, 11), dense_range=(1, 2), base=TINY, epochs=1,
                 enhancements=(), timing_repetitions=1)


def test_every_cell_present(grid):
    assert grid.shape == (2, 3)
    assert len(grid.cells) == 6


def test_feasible_cells_measured(grid):
    cell = grid.cell(5, 2)
    assert cell.feasible and 0 <= cell.accuracy <= 1
    assert cell.ms_per_image > 0 and cell.macs > 0


def test_infeasible_cell_recorded(grid):
    cell = grid.cell(11, 1)
    assert not cell.feasible and cell.reason
    assert "infeasible" in grid.to_text()


def test_deeper_dense_costs_more(grid):
    assert grid.cell(5, 2).macs > grid.cell(5, 1).macs


def test_csv(grid):
    lines = grid.to_csv().splitlines()
    assert lines[0].startswith("conv_layers,dense_layers")
    assert len(lines) == 7


def test_empty_range():
    with pytest.raises(InvalidInputError):
        sweep(([], []), ([], []), conv_range=())
