import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fnfd.grid import (
    Grid,
    GridFunction,
    backward_difference,
    forward_difference,
    linf_error,
    make_grid,
    piecewise_constant_eval,
    second_difference,
    second_differences,
)


def test_make_grid_symmetric_domain():
    g = make_grid(-1.0, 1.0, 21)
    assert g.h == pytest.approx(0.1, abs=1e-15)
    assert g.x[10] == pytest.approx(0.0, abs=1e-15)
    assert g.x[0] == -1.0 and g.x[-1] == 1.0


def test_make_grid_shifted_domain():
    g = make_grid(2.0, 4.0, 21)
    assert g.h == pytest.approx(0.1, abs=1e-15)
    assert g.x[0] == 2.0 and g.x[-1] == 4.0


@pytest.mark.parametrize("a,b,J", [(0, 1, 2), (0, 1, 3), (1, 0, 10), (0, 0, 10), (0, np.inf, 10), (0, 1, 5.5)])
def test_make_grid_rejects_bad_input(a, b, J):
    with pytest.raises(ValueError):
        make_grid(a, b, J)


def test_from_spacing_requires_whole_cells():
    assert Grid.from_spacing(-1, 1, 0.1).J == 21
    with pytest.raises(ValueError):
        Grid.from_spacing(0, 1, 0.3)


def test_nodes_are_read_only():
    g = make_grid(0, 1, 5)
    with pytest.raises(ValueError):
        g.x[0] = 3.0


def test_grid_function_validation():
    g = make_grid(0, 1, 5)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(g, [0, 1, np.nan, 0, 0])


@given(st.integers(4, 60), st.floats(-5, 5), st.floats(0.1, 10))
def test_second_difference_exact_on_quadratics(J, a, length):
    g = make_grid(a, a + length, J)
    V = g.sample(lambda x: x**2)
    for j in (1, J // 2, J - 2):
        assert second_difference(V, j) == pytest.approx(2.0, rel=1e-6, abs=1e-6)


def test_second_difference_of_constant_and_cubic():
    g = make_grid(-1, 1, 21)
    assert second_difference(g.sample(lambda x: 0 * x + 3.0), 5) == 0.0
    V = g.sample(lambda x: x**3 / 6)
    for j in range(1, 20):
        assert second_difference(V, j) == pytest.approx(g.x[j], abs=1e-12)


def test_second_difference_rejects_boundary_index():
    V = make_grid(0, 1, 5).sample(np.sin)
    for j in (0, 4, 7):
        with pytest.raises(IndexError):
            second_difference(V, j)


def test_first_differences():
    g = make_grid(0, 1, 11)
    lin = g.sample(lambda x: x)
    assert forward_difference(lin, 3) == pytest.approx(1.0)
    assert backward_difference(lin, 3) == pytest.approx(1.0)
    sq = g.sample(lambda x: x**2)
    for j in range(10):
        assert forward_difference(sq, j) == pytest.approx(2 * g.x[j] + g.h, abs=1e-12)
    with pytest.raises(IndexError):
        forward_difference(lin, 10)
    with pytest.raises(IndexError):
        backward_difference(lin, 0)


@settings(max_examples=50)
@given(st.lists(st.floats(-100, 100), min_size=6, max_size=30))
def test_composed_first_differences_equal_second(values):
    g = make_grid(0, 1, len(values))
    V = GridFunction(g, values)
    # Build the forward differences as a grid function, then difference backward.
    fw = np.array([forward_difference(V, j) for j in range(len(values) - 1)] + [0.0])
    D = GridFunction(g, fw)
    for j in range(1, len(values) - 1):
        assert backward_difference(D, j) == pytest.approx(second_difference(V, j), rel=1e-9, abs=1e-6)


def test_vectorised_second_differences_agree():
    g = make_grid(0, 2, 17)
    V = g.sample(np.exp)
    vec = second_differences(V.values, g.h)
    assert np.allclose(vec, [second_difference(V, j) for j in range(1, 16)], rtol=1e-14)


def test_linf_error():
    g = make_grid(0, 1, 11)
    assert linf_error(g.sample(np.sin), np.sin) == 0.0
    assert linf_error(g.function(np.zeros(11)), lambda x: x) == 1.0


def test_piecewise_constant_eval():
    g = make_grid(0, 1, 11)
    U = g.sample(lambda x: 10 * x)
    for j in range(11):
        assert piecewise_constant_eval(U, g.x[j]) == pytest.approx(U[j])
    for j in range(10):
        assert piecewise_constant_eval(U, g.x[j] + g.h / 2) == pytest.approx(U[j])
        assert piecewise_constant_eval(U, g.x[j] + 0.6 * g.h) == pytest.approx(U[j + 1])
    assert piecewise_constant_eval(U, 0.0) == U[0]
    assert piecewise_constant_eval(U, 1.0) == U[10]
    np.testing.assert_allclose(piecewise_constant_eval(U, g.x), U.values)
    with pytest.raises(ValueError):
        piecewise_constant_eval(U, 1.2)
