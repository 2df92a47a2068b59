import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eivlab import circle
from eivlab.axiomlab import entropy_eiv, random_experiment, twin_batteries
from eivlab.errors import DegenerateTies, InputError, InvalidExperiment
from eivlab.geometry import ConeUnion, Menu
from eivlab.identification import (
    Experiment,
    RandomizedExperiment,
    coarsen,
    disjointify,
    family_of_regions,
    identified_family,
    is_transparent,
    mu_equivalent,
    transparency,
)
from eivlab.prior import PriorModel

from batteries import A_PTS, P, P_PRIME, Q
from oracles import cell_measures, mc_cell_measures

# menu whose last point is never a strict maximiser
F_PTS = [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [0.2, 0.7, 0.1], [0.5, 0.1, 0.4], [0.3, 0.3, 0.4]]
F_ARCS = [0.2802594295809191, 0.28025942958091926, 0.30307390375241416, 0.13640723708574753, 0.0]
F_GROUPED = [0.41666666666666663, 0.28025942958091926, 0.30307390375241416]


class TestExperiment:
    def test_partition_must_cover(self):
        with pytest.raises(InvalidExperiment):
            Experiment(Menu(A_PTS), ((0, 1), (2,)))

    def test_partition_cells_disjoint(self):
        with pytest.raises(InvalidExperiment):
            Experiment(Menu(A_PTS), ((0, 1), (1, 2), (3,)))

    def test_empty_cell(self):
        with pytest.raises(InvalidExperiment):
            Experiment(Menu(A_PTS), ((0, 1, 2, 3), ()))

    def test_cells_are_sorted(self):
        e = Experiment(Menu(A_PTS), ((3, 0), (2, 1)))
        assert e.partition == ((0, 3), (1, 2))
        assert e.cell_of(3) == 0

    def test_finer_than(self):
        menu = Menu(A_PTS)
        assert Experiment(menu, P).is_finer_than(Experiment(menu, P_PRIME))
        assert not Experiment(menu, P_PRIME).is_finer_than(Experiment(menu, Q))

    def test_labels_length(self):
        with pytest.raises(InvalidExperiment):
            Experiment(Menu(A_PTS), P, cell_labels=("x",))


class TestRandomized:
    def test_weights_sum_to_one(self):
        e = Experiment.trivial(Menu(A_PTS))
        with pytest.raises(InvalidExperiment):
            RandomizedExperiment(((e, 0.5), (e, 0.4)))

    def test_weights_positive(self):
        e = Experiment.trivial(Menu(A_PTS))
        with pytest.raises(InvalidExperiment):
            RandomizedExperiment(((e, 1.5), (e, -0.5)))

    def test_mix_drops_unused_side(self):
        e = Experiment.trivial(Menu(A_PTS))
        f = Experiment.discrete(Menu(A_PTS))
        assert len(RandomizedExperiment.mix(1.0, e, f).atoms) == 1
        assert [w for _, w in RandomizedExperiment.mix(0.25, e, f).atoms] == [0.25, 0.75]


class TestFamilies:
    def test_arc_measures_match_oracle(self, uniform3):
        fam = identified_family(Experiment.discrete(Menu(F_PTS)), uniform3)
        assert fam.exact
        np.testing.assert_allclose(fam.values(), F_ARCS, atol=1e-15)

    def test_grouped_cells(self, uniform3):
        e = Experiment(Menu(F_PTS), ((0, 3), (1, 4), (2,)))
        fam = identified_family(e, uniform3)
        np.testing.assert_allclose(fam.values(), F_GROUPED, atol=1e-15)
        assert fam.positive() == [0, 1, 2]

    def test_null_point_is_not_positive(self, uniform3):
        fam = identified_family(Experiment.discrete(Menu(F_PTS)), uniform3)
        assert fam.positive() == [0, 1, 2, 3]

    def test_monte_carlo_agrees_with_independent_sampler(self, uniform3):
        e = Experiment.discrete(Menu(F_PTS))
        fam = identified_family(e, uniform3, n=100_000, exact=False)
        ref = mc_cell_measures(F_PTS, e.partition, 100_000, seed=99)
        for m, r in zip(fam.measures, ref):
            assert abs(m.value - r) < 4 * np.sqrt(2) * max(m.std_error, 1e-3)

    def test_symmetric_simplex(self, uniform3, simplex3):
        fam = identified_family(Experiment.discrete(simplex3), uniform3)
        np.testing.assert_allclose(fam.values(), [1 / 3] * 3, atol=1e-15)
        mc = identified_family(Experiment.discrete(simplex3), uniform3, n=100_000, exact=False)
        for m in mc.measures:
            assert abs(m.value - 1 / 3) <= 4 * m.std_error

    def test_degenerate_ties_abort(self):
        # two utility samples both tie between the menu's points
        S = np.array([[0.0, 1.0, -1.0], [0.0, -1.0, 1.0], [1.0, -1.0, 0.0]])
        prior = PriorModel.empirical(S)
        e = Experiment.discrete(Menu([[1, 0, 0], [0, 0.5, 0.5]]))
        with pytest.raises(DegenerateTies):
            identified_family(e, prior)

    def test_dimension_mismatch(self, uniform3):
        with pytest.raises(InputError):
            identified_family(Experiment.discrete(Menu(np.eye(4))), uniform3)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_measures_sum_to_one_and_match_oracle(self, seed):
        e = random_experiment(np.random.default_rng(seed), 3, 1, 7)
        fam = identified_family(e, PriorModel.uniform(3))
        assert fam.values().sum() == pytest.approx(1.0, abs=1e-12)
        ref = cell_measures(e.menu.points, e.partition)
        np.testing.assert_allclose(fam.values(), ref, atol=1e-12)


class TestMuEquivalence:
    def test_twin_batteries(self, uniform3):
        e1, e2 = twin_batteries()
        F1, F2 = identified_family(e1, uniform3), identified_family(e2, uniform3)
        assert len(F1.positive()) == len(F2.positive()) == 6
        res = mu_equivalent(F1, F2, tol=1e-9)
        assert res.equivalent and len(res.matching) == 6
        np.testing.assert_allclose(F1.values()[list(res.matching)], F2.values()[list(res.matching.values())])

    def test_twin_batteries_monte_carlo(self, uniform3):
        e1, e2 = twin_batteries()
        F1 = identified_family(e1, uniform3, n=50_000, exact=False)
        F2 = identified_family(e2, uniform3, n=50_000, exact=False)
        assert mu_equivalent(F1, F2)

    def test_coarsening_breaks_equivalence(self, uniform3):
        e1, e2 = twin_batteries()
        res = mu_equivalent(
            identified_family(coarsen(e1, [(0, 1)]), uniform3), identified_family(e2, uniform3)
        )
        assert not res.equivalent
        assert res.witness is not None

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_reflexive_and_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        prior = PriorModel.uniform(3)
        F = identified_family(random_experiment(rng), prior)
        G = identified_family(random_experiment(rng), prior)
        assert mu_equivalent(F, F)
        assert bool(mu_equivalent(F, G)) == bool(mu_equivalent(G, F))

    def test_null_cells_are_ignored(self, uniform3):
        full = Experiment.discrete(Menu(F_PTS))
        trimmed = Experiment.discrete(Menu(F_PTS[:4]))
        assert mu_equivalent(identified_family(full, uniform3), identified_family(trimmed, uniform3))


class TestCoarsenAndDisjointify:
    def test_coarsen_pairs_chain(self):
        e = Experiment(Menu(A_PTS), P)
        assert coarsen(e, [(0, 1), (2, 3)]).partition == P_PRIME
        assert coarsen(e, [(0, 1), (1, 2), (2, 3)]).partition == ((0, 1, 2, 3),)

    def test_coarsen_bad_index(self):
        with pytest.raises(InvalidExperiment):
            coarsen(Experiment(Menu(A_PTS), P), [(0, 9)])

    def test_disjointify_exact(self, uniform3):
        a = circle.ArcSet.arc(0.0, 2.0)
        b = circle.ArcSet.arc(1.0, 2.0)
        D = disjointify(family_of_regions([a, b], uniform3))
        np.testing.assert_allclose(D.values() * circle.TWO_PI, [2.0, 1.0])

    def test_disjointify_identity_on_partitions(self, uniform3):
        fam = identified_family(Experiment.discrete(Menu(F_PTS)), uniform3)
        np.testing.assert_allclose(disjointify(fam).values(), fam.values(), atol=1e-12)

    def test_disjointify_monte_carlo(self):
        prior = PriorModel.uniform(4, 3)
        e = Experiment.discrete(Menu(np.eye(4)))
        fam = identified_family(e, prior, n=20_000)
        whole = family_of_regions([ConeUnion.whole(4)] + list(fam.regions), prior, n=20_000)
        D = disjointify(whole)
        assert D.values()[0] == 1.0
        assert np.all(D.values()[1:] == 0.0)


class TestTransparency:
    def test_null_cell_is_transparent(self, uniform3):
        e = Experiment(Menu(F_PTS), ((4,), (0, 3), (1,), (2,)))
        rep = transparency(e, 0, entropy_eiv(uniform3), prior=uniform3)
        assert rep.transparent and rep.by_prior and rep.agree
        assert rep.panel_size > 3

    def test_positive_cell_is_not(self, uniform3):
        e = Experiment(Menu(F_PTS), ((4,), (0, 3), (1,), (2,)))
        rep = transparency(e, 2, entropy_eiv(uniform3), prior=uniform3)
        assert not rep.transparent and rep.witness is not None
        assert rep.agree

    def test_full_measure_cell_skips_cross_check(self, uniform3, simplex3):
        e = Experiment.trivial(simplex3)
        rep = transparency(e, 0, entropy_eiv(uniform3), prior=uniform3)
        assert rep.transparent and rep.panel_size == 0
        assert rep.by_prior is False and rep.agree is None

    def test_bare_cone_unions(self, uniform3, simplex3):
        assert is_transparent(ConeUnion.empty(3), uniform3)
        W = Experiment.discrete(simplex3).cones()[0]
        assert not is_transparent(W, uniform3)

    def test_pair_form_needs_valuation(self, uniform3, simplex3):
        with pytest.raises(InputError):
            is_transparent((Experiment.discrete(simplex3), 0), uniform3)
