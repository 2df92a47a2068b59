import json

import numpy as np
import pytest

from eivlab import io
from eivlab.compiler import Decision, Terminal
from eivlab.errors import SchemaError
from eivlab.geometry import Menu
from eivlab.identification import Experiment, RandomizedExperiment
from eivlab.prior import Patch, PriorModel

from batteries import A_PTS, P, P_PRIME


class TestDumps:
    def test_floats_round_trip_exactly(self):
        x = [0.1, 1 / 3, 2.0, 1e-17]
        assert json.loads(io.dumps(x)) == x

    def test_integers_in_float_form(self):
        assert io.dumps({"a": 1.0}) == '{\n  "a": 1.0\n}'

    def test_numpy_values(self):
        doc = {"m": np.eye(2), "n": np.int64(3), "b": np.bool_(True)}
        assert json.loads(io.dumps(doc)) == {"m": [[1.0, 0.0], [0.0, 1.0]], "n": 3, "b": True}

    def test_non_finite(self):
        with pytest.raises(SchemaError):
            io.dumps(float("nan"))

    def test_deterministic(self):
        doc = {"z": [1 / 7, {"q": 2}], "a": None}
        assert io.dumps(doc) == io.dumps(json.loads(io.dumps(doc)))


class TestRoundTrips:
    def test_experiment(self):
        e = Experiment(Menu(A_PTS), P_PRIME)
        back = io.experiment_from_json(json.loads(io.dumps(io.experiment_to_dict(e))))
        assert back == e

    def test_experiment_without_partition_is_discrete(self):
        e = io.experiment_from_json({"menu": A_PTS})
        assert e.partition == P

    def test_randomized(self):
        pi = RandomizedExperiment.mix(0.25, Experiment(Menu(A_PTS), P), Experiment(Menu(A_PTS), P_PRIME))
        back = io.randomized_from_json(json.loads(io.dumps(io.randomized_to_dict(pi))))
        assert [w for _, w in back.atoms] == [0.25, 0.75]
        assert all(a == b for (a, _), (b, _) in zip(back.atoms, pi.atoms))

    @pytest.mark.parametrize(
        "prior",
        [
            PriorModel.uniform(4, 11),
            PriorModel.empirical([[1.0, 0.0, -1.0], [0.0, 1.0, -1.0]], seed=2),
            PriorModel("mixture", 3, 5, (Patch(0.4, (1.0, 0.0, -1.0), 0.5), Patch(0.6, (0.0, 1.0, -1.0), 1.0))),
        ],
    )
    def test_prior(self, prior):
        back = io.prior_from_json(json.loads(io.dumps(io.prior_to_dict(prior))))
        assert (back.kind, back.dim, back.seed, back.patches) == (prior.kind, prior.dim, prior.seed, prior.patches)
        np.testing.assert_allclose(back.draw(50), prior.draw(50), rtol=0, atol=1e-15)

    def test_seed_override(self):
        p = io.prior_from_json({"kind": "uniform", "l": 3, "seed": 1}, seed=7)
        assert p.seed == 7

    def test_tree(self):
        doc = {"menu": [[1, 0, 0], [0, 1, 0]], "labels": ["x", "y"], "children": [{"menu": [[0, 0, 1]]}, None]}
        t = io.tree_from_json(doc)
        assert t.depth == 2 and t.menu.labels == ("x", "y")
        again = io.tree_from_json(json.loads(io.dumps(io.tree_to_dict(t))))
        assert again.depth == 2

    def test_game(self):
        doc = {"type": "decision", "name": "r", "actions": [
            {"action": "a", "node": {"type": "terminal", "lottery": [1, 0, 0]}},
            {"action": "b", "node": {"type": "terminal", "lottery": [0, 1, 0]}},
        ]}
        g = io.game_from_json(doc)
        assert g == Decision("r", (("a", Terminal((1.0, 0.0, 0.0))), ("b", Terminal((0.0, 1.0, 0.0)))))

    def test_table_index(self):
        simplex = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
        doc = {
            "kind": "table",
            "cells": [{"menu": simplex, "points": [i]} for i in range(3)],
            "values": [1.0, 2.0, 3.0, {"cells": [0, 1], "value": 0.5}],
        }
        idx = io.index_from_json(doc)
        assert idx.values[frozenset({1})] == 2.0
        assert idx.values[frozenset({0, 1})] == 0.5
        assert idx.values[frozenset({0, 1, 2})] == 0.0


class TestSchemaErrors:
    def test_wrong_schema_version(self):
        with pytest.raises(SchemaError, match="unsupported schema"):
            io.experiment_from_json({"schema": "eiv/2", "menu": A_PTS})

    def test_missing_field_reports_path(self):
        with pytest.raises(SchemaError) as info:
            io.randomized_from_json({"atoms": [{"weight": 1.0}]})
        assert info.value.path == "design.atoms[0]"

    def test_ragged_menu(self):
        with pytest.raises(SchemaError):
            io.menu_from_json([[1, 0, 0], [0, 1]])

    def test_bad_partition(self):
        with pytest.raises(SchemaError):
            io.experiment_from_json({"menu": A_PTS, "partition": [[0, 1]]})

    def test_bad_weights(self):
        e = {"menu": A_PTS}
        with pytest.raises(SchemaError):
            io.randomized_from_json({"atoms": [{"experiment": e, "weight": 0.5}, {"experiment": e, "weight": 0.6}]})

    def test_unknown_prior_kind(self):
        with pytest.raises(SchemaError):
            io.prior_from_json({"kind": "gamma"})

    def test_non_integer_seed(self):
        with pytest.raises(SchemaError):
            io.prior_from_json({"kind": "uniform", "seed": 1.5})

    def test_unknown_node_type(self):
        with pytest.raises(SchemaError):
            io.game_from_json({"type": "lottery"})

    def test_index_points_out_of_range(self):
        with pytest.raises(SchemaError):
            io.index_from_json({"kind": "hypothesis", "w_star": {"menu": A_PTS, "points": [9]}})
