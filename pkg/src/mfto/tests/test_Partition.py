# coding: utf8

import numpy as np
import pytest

from mfto.core.Errors import LayoutError
from mfto.core.Models import TRUNCATED, Interval
from mfto.core.Partition import TensorPartition


@pytest.fixture
def part():
    return TensorPartition([Interval(0.0, 1.0), Interval(-2.0, 2.0)], [2, 4])


def test_row_major_cells(part):
    assert part.n == 8
    assert part.cell_index((1, 2)) == 6
    assert tuple(part.multi_index(6)) == (1, 2)
    np.testing.assert_allclose(part.centers()[6], [0.75, 0.5])
    lower, upper = part.cell_box(6)
    np.testing.assert_allclose(lower, [0.5, 0.0])
    np.testing.assert_allclose(upper, [1.0, 1.0])
    assert part.cell_volume == pytest.approx(0.5)


def test_locate(part):
    cells = part.locate(np.array([[0.75, 0.5], [1.0, 2.0], [0.0, -2.0], [1.01, 0.0], [0.5, -2.5]]))
    assert list(cells) == [6, 7, 0, -1, -1]


def test_locate_far_outside_is_clean(part):
    far = np.array([[1e300, 0.0], [-np.inf, 0.5], [0.5, np.inf], [0.25, 0.25]])
    with np.errstate(invalid='raise', over='raise'):
        cells = part.locate(far)
    assert list(cells) == [-1, -1, -1, 2]
    assert list(part.locate(np.array([[np.nan, 0.0]]))) == [-1]


def test_every_centre_is_in_its_own_cell(part):
    assert list(part.locate(part.centers())) == list(range(part.n))


def test_bad_counts():
    with pytest.raises(LayoutError):
        TensorPartition([Interval(0.0, 1.0)], [0])
    with pytest.raises(LayoutError):
        TensorPartition([Interval(0.0, 1.0)], [2, 2])


def test_description_round_trip(part, butane):
    again = TensorPartition.from_description(part.describe())
    assert again.same_grid(part)
    assert again.intervals[1].boundary == TRUNCATED
    torsion = TensorPartition.for_model(butane, 12, coordinates=[2])
    assert torsion.d == 1 and torsion.n == 12
    assert not torsion.same_grid(part)
