import json
import math

import numpy as np
import pytest

from eivlab import io
from eivlab.axiomlab import (
    AXIOMS,
    CHECKS,
    arc_experiment,
    check_belief_consistency,
    check_monotonicity,
    check_structural_invariance,
    check_symmetry,
    entropy_eiv,
    separability_instance,
    join_cells,
    negated,
    perturbed_entropy_eiv,
    random_experiment,
    run_checks,
    splice,
    symmetry_dominates,
    translate,
    with_null_cell,
)
from eivlab.errors import InputError
from eivlab.geometry import Menu
from eivlab.identification import identified_family
from eivlab.prior import PriorModel

from oracles import entropy_value

# cell measures where the more even vector has lower entropy than the dominating one
SYM_P = (0.473, 0.056, 0.471)
SYM_Q = (0.163, 0.647, 0.190)


@pytest.fixture
def v(uniform3):
    return entropy_eiv(uniform3)


class TestHelpers:
    def test_join_of_partitions(self):
        P = ((0, 1), (2,), (3,), (4,))
        Q = ((0,), (1, 2), (3,), (4,))
        assert sorted(map(sorted, join_cells(P, Q, 5))) == [[0, 1, 2], [3], [4]]

    def test_splice(self):
        P = ((0,), (1,), (2, 3))
        Q = ((0, 1), (2,), (3,))
        assert splice(P, Q, {0, 1}) == ((0,), (1,), (2,), (3,))
        assert splice(Q, P, {0, 1}) == ((0, 1), (2, 3))

    def test_arc_experiment_measures(self, uniform3):
        ms = (0.5, 0.0, 0.2, 0.3)
        e = arc_experiment(ms, phase=1.0)
        np.testing.assert_allclose(identified_family(e, uniform3).values(), ms, atol=1e-12)

    def test_arc_experiment_large_cell(self, uniform3):
        e = arc_experiment((0.9, 0.1))
        np.testing.assert_allclose(identified_family(e, uniform3).values(), (0.9, 0.1), atol=1e-12)

    def test_arc_experiment_rejects_non_probability(self):
        with pytest.raises(InputError):
            arc_experiment((0.5, 0.6))

    def test_dominance_allows_reordering(self):
        assert symmetry_dominates((0.3, 0.3, 0.4), (0.1, 0.2, 0.7)) is not None
        assert symmetry_dominates((0.1, 0.2, 0.7), (0.3, 0.3, 0.4)) is None
        assert symmetry_dominates(SYM_P, SYM_Q) == (0, 1, 2)

    def test_translate_parent_choice_only_moves_null_points(self, v):
        rng = np.random.default_rng(3)
        for _ in range(10):
            e = random_experiment(rng, 3, 3, 6)
            B = Menu(rng.dirichlet(np.ones(3), size=3))
            first, last = translate(e, B, 0.4, 0), translate(e, B, 0.4, -1)
            assert v(first) == pytest.approx(v(last), abs=1e-12)
            assert v(first) == pytest.approx(v(e), abs=1e-9)

    def test_null_cell_generator(self, uniform3):
        e, k = with_null_cell(np.random.default_rng(1), 3)
        assert identified_family(e, uniform3).values()[k] == 0.0


class TestEntropyPasses:
    @pytest.mark.parametrize("name", [a for a in AXIOMS if a != "symmetry"])
    def test_check_passes(self, v, name):
        rep = CHECKS[name](v, trials=25, seed=5)
        assert rep.passed, rep.minimal_witness
        assert rep.skipped < rep.trials

    def test_separability_on_the_four_point_example(self, v):
        left, right = separability_instance()
        assert v(left) == pytest.approx(v(right), abs=1e-12)

    def test_monte_carlo_functional_passes_belief_consistency(self):
        vm = entropy_eiv(PriorModel.uniform(4, 1), n=20_000, tol=1e-12)
        assert check_belief_consistency(vm, trials=10).passed


class TestSymmetry:
    def test_counterexample_is_detected(self, v):
        a, b = arc_experiment(SYM_P), arc_experiment(SYM_Q, phase=2.0)
        assert entropy_value(SYM_P) < entropy_value(SYM_Q)
        rep = check_symmetry(v, trials=0, pairs=[(a, b)])
        assert not rep.passed
        w = rep.minimal_witness
        np.testing.assert_allclose(w["measures_left"], SYM_P, atol=1e-12)
        assert w["value_left"] < w["value_right"]

    def test_uniform_beats_everything(self, v):
        a = arc_experiment((1 / 3, 1 / 3, 1 / 3))
        b = arc_experiment((0.6, 0.3, 0.1))
        assert check_symmetry(v, trials=0, pairs=[(a, b), (b, a)]).passed

    def test_needs_exact_prior(self):
        with pytest.raises(InputError):
            check_symmetry(entropy_eiv(PriorModel.uniform(4)), trials=1)


class TestBrokenFunctionals:
    def test_negated_fails_monotonicity(self, uniform3):
        rep = check_monotonicity(negated(entropy_eiv(uniform3)), trials=20)
        assert not rep.passed

    def test_perturbed_fails_structural_invariance(self, uniform3):
        rep = check_structural_invariance(perturbed_entropy_eiv(uniform3), trials=40)
        assert not rep.passed
        w = rep.minimal_witness
        assert w["size"] == min(x["size"] for x in rep.violations)
        left = io.randomized_from_json(w["left"])
        right = io.randomized_from_json(w["right"])
        pv = perturbed_entropy_eiv(uniform3)
        assert abs(pv(left) - pv(right)) > pv.tol
        assert json.loads(io.dumps(rep.to_dict()))["verdict"] == "fail"


class TestHarness:
    def test_reproducible(self, uniform3):
        pv = perturbed_entropy_eiv(uniform3)
        a = [r.to_dict() for r in run_checks(pv, ["structural_invariance", "monotonicity"], trials=12, seed=9)]
        b = [r.to_dict() for r in run_checks(pv, ["structural_invariance", "monotonicity"], trials=12, seed=9)]
        assert io.dumps(a) == io.dumps(b)

    def test_unknown_check(self, v):
        with pytest.raises(InputError):
            run_checks(v, ["nonsense"])

    def test_report_fields(self, v):
        rep = check_monotonicity(v, trials=3)
        d = rep.to_dict()
        assert d["verdict"] == "pass" and d["minimal_witness"] is None and d["trials"] == 3
        assert math.isfinite(v(random_experiment(np.random.default_rng(0))))
