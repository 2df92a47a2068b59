import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eivlab.errors import ConditioningOnNull, InputError
from eivlab.geometry import ConeUnion, Menu, normal_cone
from eivlab.prior import (
    BLOCK_SIZE,
    MeasureEstimate,
    Patch,
    PriorModel,
    conditional_measure,
    measure,
    sample,
    use_exact,
)

SIMPLEX = Menu(np.eye(3))


def vertex_cell(i):
    return ConeUnion((normal_cone(SIMPLEX, i),), 3)


class TestConstruction:
    def test_unknown_kind(self):
        with pytest.raises(InputError):
            PriorModel("beta", 3)

    def test_negative_seed(self):
        with pytest.raises(InputError):
            PriorModel.uniform(3, -1)

    def test_patch_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            PriorModel("mixture", 3, patches=(Patch(0.5, (1.0, 0.0, -1.0), 0.5),))

    def test_empirical_samples_are_normalized(self):
        p = PriorModel.empirical([[2.0, 0.0, -2.0], [0.0, 3.0, 0.0]])
        np.testing.assert_allclose(p.samples.sum(axis=1), 0.0, atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(p.samples, axis=1), 1.0)

    def test_exact_only_for_uniform_three(self):
        assert PriorModel.uniform(3).exact_available
        assert not PriorModel.uniform(4).exact_available
        with pytest.raises(InputError):
            use_exact(PriorModel.uniform(4), True)


class TestSampling:
    def test_same_seed_same_stream(self):
        a = sample(PriorModel.uniform(3, 7), 1000)
        b = sample(PriorModel.uniform(3, 7), 1000)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = sample(PriorModel.uniform(3, 7), 10)
        b = sample(PriorModel.uniform(3, 8), 10)
        assert not np.allclose(a, b)

    def test_prefix_stable_across_lengths(self):
        p = PriorModel.uniform(4, 3)
        short = sample(p, 100)
        long = sample(PriorModel.uniform(4, 3), 3 * BLOCK_SIZE + 5)
        np.testing.assert_array_equal(short, long[:100])

    def test_samples_are_zero_sum_unit(self):
        U = sample(PriorModel.uniform(5, 1), 2000)
        np.testing.assert_allclose(U.sum(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(U, axis=1), 1.0)

    def test_uniform_is_centered(self):
        U = sample(PriorModel.uniform(3, 2), 100_000)
        assert np.all(np.abs(U.mean(axis=0)) < 0.01)

    def test_thread_safe_draws(self):
        p = PriorModel.uniform(3, 9)
        out = [None] * 8

        def work(k):
            out[k] = p.draw(5 * BLOCK_SIZE)

        threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for o in out[1:]:
            np.testing.assert_array_equal(o, out[0])

    def test_mixture_stays_in_its_cap(self):
        c = np.array([1.0, 0.0, -1.0]) / math.sqrt(2)
        p = PriorModel("mixture", 3, 4, patches=(Patch(1.0, tuple(c), 0.3),))
        U = sample(p, 5000)
        assert np.all(U @ c >= math.cos(0.3) - 1e-12)

    def test_empirical_full_set_when_sizes_match(self):
        S = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, -1.0], [1.0, -1.0, 0.0]])
        p = PriorModel.empirical(S)
        np.testing.assert_array_equal(p.draw(3), p.samples)
        assert p.draw(10).shape == (10, 3)

    def test_draw_bounds(self):
        with pytest.raises(InputError):
            PriorModel.uniform(3).draw(0)


class TestMeasure:
    def test_vertex_cells_are_thirds(self, uniform3):
        for i in range(3):
            assert measure(uniform3, vertex_cell(i)).value == pytest.approx(1 / 3, abs=1e-14)

    def test_exact_versus_monte_carlo(self, uniform3):
        W = vertex_cell(0)
        ex = measure(uniform3, W, exact=True)
        mc = measure(uniform3, W, n=100_000, exact=False)
        assert ex.exact and not mc.exact
        assert abs(mc.value - ex.value) < 4 * mc.std_error

    def test_whole_and_empty(self, uniform3):
        assert measure(uniform3, ConeUnion.whole(3)).value == 1.0
        assert measure(uniform3, ConeUnion.empty(3)).value == 0.0

    def test_additivity_on_disjoint_cells(self, uniform3):
        W = vertex_cell(0).union(vertex_cell(1))
        parts = measure(uniform3, vertex_cell(0)).value + measure(uniform3, vertex_cell(1)).value
        assert measure(uniform3, W).value == pytest.approx(parts, abs=1e-14)

    def test_dimension_mismatch(self, uniform3):
        with pytest.raises(InputError):
            measure(uniform3, ConeUnion.whole(4))

    def test_conditional(self, uniform3):
        V = vertex_cell(0).union(vertex_cell(1))
        got = conditional_measure(uniform3, vertex_cell(0), V)
        assert got.value == pytest.approx(0.5, abs=1e-14)

    def test_conditioning_on_null_exact(self, uniform3):
        with pytest.raises(ConditioningOnNull):
            conditional_measure(uniform3, vertex_cell(0), ConeUnion.empty(3))

    def test_conditioning_on_null_mc(self):
        p = PriorModel.uniform(4, 1)
        with pytest.raises(ConditioningOnNull):
            conditional_measure(p, ConeUnion.whole(4), ConeUnion.empty(4), n=1000)

    def test_standard_error_formula(self):
        m = MeasureEstimate.from_count(250, 1000)
        assert m.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 1000))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_four_outcome_vertex_cells_are_quarters(self, seed):
        # symmetry of the uniform prior makes each vertex of the simplex worth 1/4
        p = PriorModel.uniform(4, seed)
        S = Menu(np.eye(4))
        m = measure(p, ConeUnion((normal_cone(S, 0),), 4), n=20_000)
        assert abs(m.value - 0.25) < 5 * m.std_error
