import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delay_etc.errors import RejectedInputError
from delay_etc.history import HistoryWindow, euclidean_norm, row_norms, shift


def test_shift_tau1():
    window = HistoryWindow([[1.0, 1.0], [2.0, 2.0]])
    out = shift(window, [3.0, 3.0])
    assert out[-1].tolist() == [2.0, 2.0]
    assert out[0].tolist() == [3.0, 3.0]
    # original untouched
    assert window[0].tolist() == [2.0, 2.0]


def test_shift_tau0():
    out = shift(HistoryWindow([[5.0]]), [7.0])
    assert out.tau == 0
    assert out[0].tolist() == [7.0]


def test_shift_tau2():
    a, b, c, d = [1.0], [2.0], [3.0], [4.0]
    out = shift(HistoryWindow([a, b, c]), d)
    assert [out[s].tolist() for s in (-2, -1, 0)] == [b, c, d]


def test_shift_dimension_mismatch():
    with pytest.raises(RejectedInputError):
        shift(HistoryWindow([[1.0, 1.0], [2.0, 2.0]]), [1.0, 2.0, 3.0])


def test_push_wraps_ring_buffer():
    window = HistoryWindow.zeros(1, tau=2)
    for value in range(1, 8):
        window.push([float(value)])
    assert window.states()[:, 0].tolist() == [5.0, 6.0, 7.0]


def test_offset_out_of_range():
    window = HistoryWindow.constant([1.0], tau=1)
    with pytest.raises(RejectedInputError):
        window[-2]
    with pytest.raises(RejectedInputError):
        window[1]


def test_views_are_read_only():
    window = HistoryWindow.constant([1.0, 2.0], tau=1)
    with pytest.raises(ValueError):
        window[0][0] = 5.0


def test_norms():
    window = HistoryWindow([[3.0, 4.0], [0.0, 1.0]])
    assert window.past_norm == pytest.approx(5.0)
    assert window.window_norm == pytest.approx(5.0)
    assert HistoryWindow([[9.0]]).past_norm == 0.0


def test_mixed_dimensions_rejected():
    with pytest.raises(RejectedInputError):
        HistoryWindow([[1.0], [1.0, 2.0]])


@given(
    tau=st.integers(min_value=0, max_value=5),
    values=st.lists(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=12
    ),
)
@settings(max_examples=100, deadline=None)
def test_shift_preserves_length_and_norm_order(tau, values):
    window = HistoryWindow.zeros(1, tau)
    for v in values:
        window = shift(window, [v])
        assert len(window) == tau + 1
        assert window.window_norm >= window.past_norm >= 0.0
    assert window[0].tolist() == [values[-1]]
    np.testing.assert_array_equal(window.states()[-1], [values[-1]])


def test_norm_of_tiny_state():
    # squaring these entries would underflow to a subnormal or zero
    assert euclidean_norm([4.29e-163, 5.79e-164]) == pytest.approx(4.3289e-163, rel=1e-4, abs=0)
    assert euclidean_norm([3e-200, 4e-200]) == pytest.approx(5e-200, rel=1e-12, abs=0)
    assert euclidean_norm([0.0, 0.0]) == 0.0


def test_row_norms():
    rows = np.array([[3.0, 4.0], [3e-170, -4e-170], [0.0, 0.0]])
    np.testing.assert_allclose(row_norms(rows), [5.0, 5e-170, 0.0], rtol=1e-12)


def test_window_norms_of_tiny_states():
    window = HistoryWindow([[3e-170, 4e-170], [6e-170, 8e-170]])
    assert window.past_norm == pytest.approx(5e-170, rel=1e-12, abs=0)
    assert window.window_norm == pytest.approx(1e-169, rel=1e-12, abs=0)
