"""Bottom-up search: seeding, enumeration, guidance, budgets, determinism."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sheetsynth.dsl import INTEGER, OP_TABLE, STRING, Task, Value, eval_expr, find_op, lit_value, parse_formula
from sheetsynth.model import PREMISE, ModelConfig, TrainConfig, TrainRecord, init_params, train_classifier
from sheetsynth.search import (
    EXPRESSION_BUDGET,
    Guidance,
    SearchConfig,
    TIME_BUDGET,
    ValueBank,
    WEIGHT_BUDGET,
    arg_tuples,
    bin_probability,
    compositions,
    extract_constants,
    heuristic_score,
    levenshtein,
    mined_output_substrings,
    premise_filter,
    reweight,
    run_search,
    synthesize,
)
from sheetsynth.sigs import IO_LEN

from bruteforce import reachable_value_set


class TestBinning:
    @pytest.mark.parametrize("p,expected", [
        (0.0, 0), (0.05, 0), (0.1, 1), (0.35, 3),
        (0.4, 4), (0.59, 4), (0.6, 5), (1.0, 5),
    ])
    def test_boundaries(self, p, expected):
        assert bin_probability(p) == expected

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            bin_probability(-0.01)
        with pytest.raises(ValueError):
            bin_probability(1.01)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        if a > b:
            a, b = b, a
        assert bin_probability(a) <= bin_probability(b)


class TestHeuristic:
    def test_levenshtein_basics(self):
        assert levenshtein("", "abc") == 3
        assert levenshtein("kitten", "sitting") == 3
        assert levenshtein("ab", "ab") == 0

    def test_exact_match_scores_one(self):
        v = Value(STRING, ("ab", "cd"), 2)
        assert heuristic_score(v, ("ab", "cd")) == 1.0

    def test_disjoint_scores_zero(self):
        v = Value(STRING, ("qq",), 2)
        assert heuristic_score(v, ("ab",)) == 0.0

    def test_partial_example(self):
        # substring fraction 1, normalized distance 8/10
        v = Value(STRING, ("09",), 2)
        assert heuristic_score(v, ("09/08/2019",)) == pytest.approx(0.6)

    def test_integers_rejected(self):
        with pytest.raises(ValueError):
            heuristic_score(Value(INTEGER, (1,), 1), ("a",))


class TestConstants:
    def test_fixed_set_always_present(self):
        task = Task([["a", "b"]], ["x", "y"])
        consts = extract_constants(task)
        strings = [v.leaf[1] for v in consts if v.kind == STRING]
        ints = [v.leaf[1] for v in consts if v.kind == INTEGER]
        assert strings == [" ", ",", ".", "-", "/"]
        assert ints == [0, 1, 2, 3, 99]

    def test_mines_shared_output_prefix(self):
        task = Task([["John Smith", "David Jones"]], ["Mr. Smith", "Mr. Jones"])
        mined = mined_output_substrings(task)
        assert "Mr. " in mined

    def test_mined_substring_must_be_absent_from_some_row(self):
        # "1" appears in both outputs but also in every row's inputs
        task = Task([["08092019", "12032020"]], ["09/08/2019", "03/12/2020"])
        mined = mined_output_substrings(task)
        assert mined == ["/20"]

    def test_broadcast_and_order(self):
        task = Task([["a", "b", "c"]], ["zw1", "zw2", "zw3"])
        consts = extract_constants(task)
        assert all(len(v.vals) == 3 for v in consts)
        # mined strings come after the fixed set, sorted by length then text
        mined = [v.leaf[1] for v in consts[10:]]
        assert mined == sorted(mined, key=lambda s: (len(s), s))
        assert "zw" in mined


class TestArgTuples:
    def _bank(self):
        bank = ValueBank()
        for s in ("a", "b", "c"):
            bank.insert(lit_value(s, 1))
        for i in (1, 2):
            bank.insert(lit_value(i, 1))
        return bank

    def test_weight_one_tuples(self):
        bank = self._bank()
        concat = find_op("CONCATENATE", 2)
        tuples = list(arg_tuples(concat, 3, bank))
        assert len(tuples) == 9
        assert all(a.kind == STRING and b.kind == STRING for a, b in tuples)

    def test_split_order_is_lexicographic(self):
        assert list(compositions(3, 2)) == [(1, 2), (2, 1)]
        assert list(compositions(4, 3)) == [(1, 1, 2), (1, 2, 1), (2, 1, 1)]

    def test_unary(self):
        bank = self._bank()
        length = find_op("LEN", 1)
        tuples = list(arg_tuples(length, 2, bank))
        assert [t[0].vals for t in tuples] == [("a",), ("b",), ("c",)]


class TestValueBank:
    def test_first_seen_wins(self):
        bank = ValueBank()
        first = lit_value("x", 2)
        assert bank.insert(first)
        dup = Value(STRING, ("x", "x"), 5)
        assert not bank.insert(dup)
        assert len(bank) == 1
        assert bank.values_at(1, STRING) == [first]

    def test_iteration_orders_by_weight(self):
        bank = ValueBank()
        heavy = Value(STRING, ("b", "b"), 7)
        light = Value(STRING, ("a", "a"), 1)
        bank.insert(heavy)
        bank.insert(light)
        assert [v.weight for v in bank.iter_values()] == [1, 7]


@pytest.fixture(scope="module")
def tiny_model():
    rng = np.random.default_rng(0)
    records = []
    for i in range(600):
        label = i % 2
        sio = tuple(int(x) for x in rng.integers(-1, 3, size=IO_LEN))
        svo = tuple([1] * 45) if label else tuple(int(x) for x in rng.integers(-1, 2, size=45))
        records.append(TrainRecord(sio, svo, label))
    params, _ = train_classifier(
        records, TrainConfig(epochs=2, model=ModelConfig(embed_dim=4, hidden=(32, 16))),
        seed=0)
    return params


class TestReweight:
    def test_none_is_identity(self):
        guidance = Guidance("none", ("x", "y"))
        values = [Value(STRING, ("a", "b"), 4), Value(INTEGER, (1, 2), 4)]
        assert reweight(guidance, values, 4) == [4, 4]

    def test_formula_extremes(self):
        # delta 5 keeps the weight; delta 0 defers by the maximum
        assert 4 + 5 - bin_probability(1.0) == 4
        assert 4 + 5 - bin_probability(0.05) == 9

    def test_heuristic_scores_strings_only(self):
        guidance = Guidance("heuristic", ("ab", "cd"))
        exact = Value(STRING, ("ab", "cd"), 6)
        junk = Value(STRING, ("qq", "zz"), 6)
        number = Value(INTEGER, (3, 4), 6)
        weights = reweight(guidance, [exact, junk, number], 6)
        assert weights[0] == 6       # perfect score stays
        assert weights[1] == 11      # zero score defers fully
        assert weights[2] == 6       # integers are never adjusted

    def test_model_bounds_and_scores(self, tiny_model):
        task = Task([["ab", "cd"]], ["x", "y"])
        config = SearchConfig(guidance="model", model=tiny_model)
        guidance = Guidance.build(task, config)
        values = [Value(STRING, ("ab", "cd"), 3), Value(INTEGER, (0, 2), 3),
                  Value(STRING, ("x", "y"), 3)]
        weights = reweight(guidance, values, 3)
        assert all(3 <= w <= 8 for w in weights)
        assert all(v.score is not None and 0 < v.score < 1 for v in values)

    def test_combined_averages_for_strings(self, tiny_model):
        task = Task([["ab", "cd"]], ["x", "y"])
        guidance = Guidance.build(task, SearchConfig(guidance="combined", model=tiny_model))
        value = Value(STRING, ("x", "y"), 3)
        guidance.new_weights([value], 3)
        p_model = value.score
        p_combined = 0.5 * (p_model + 1.0)  # heuristic gives the exact match 1.0
        assert 3 + 5 - bin_probability(p_combined) == \
            guidance.new_weights([Value(STRING, ("x", "y"), 3)], 3)[0]


@pytest.fixture(scope="module")
def premise_params():
    return init_params(PREMISE, ModelConfig(embed_dim=3, hidden=(16,)), seed=2)


class TestPremiseFilter:
    def test_removes_exactly_k(self, premise_params):
        task = Task([["ab", "cd"]], ["x", "y"])
        allowed = premise_filter(task, premise_params, k=4)
        assert len(allowed) == 14
        order = {op: i for i, op in enumerate(OP_TABLE)}
        assert sorted(order[op] for op in allowed) == [order[op] for op in allowed]

    def test_zero_keeps_everything(self, premise_params):
        task = Task([["ab"]], ["x"])
        assert premise_filter(task, premise_params, k=0) == OP_TABLE

    def test_uniform_scores_drop_latest_ops(self):
        zeroed = init_params(PREMISE, ModelConfig(embed_dim=3, hidden=(16,)), seed=2)
        zeroed.layers[-1].w[:] = 0.0
        zeroed.layers[-1].b[:] = 0.0
        task = Task([["ab"]], ["x"])
        allowed = premise_filter(task, zeroed, k=4)
        assert allowed == OP_TABLE[:14]

    def test_k_bounds(self, premise_params):
        task = Task([["ab"]], ["x"])
        with pytest.raises(ValueError):
            premise_filter(task, premise_params, k=18)


class TestSynthesize:
    def test_identity_solves_at_seeding(self):
        result = synthesize(Task([["a", "b"]], ["a", "b"]))
        assert result.solved and result.formula == "var_0"
        assert result.expressions_considered == 0
        assert result.solve_weight == 1

    def test_constant_output_solves_at_seeding(self):
        result = synthesize(Task([["a", "b"]], ["Mrs", "Mrs"]))
        assert result.solved and result.formula == '"Mrs"'
        assert result.expressions_considered == 0

    def test_second_variable_identity(self):
        result = synthesize(Task([["a", "b"], ["p", "q"]], ["p", "q"]))
        assert result.formula == "var_1"

    def test_substitution_task(self):
        task = Task([["2020-01-02", "1999-12-31"]], ["2020/01/02", "1999/12/31"])
        result = synthesize(task)
        assert result.solved
        assert result.termination == "solved"
        value = eval_expr(parse_formula(result.formula), task)
        assert value.vals == task.outputs
        assert result.solve_weight == 4

    def test_expression_budget_is_exact(self):
        task = Task([["abc", "de"]], ["@1", "#2"])
        result = synthesize(task, SearchConfig(max_expressions=777))
        assert not result.solved
        assert result.termination == EXPRESSION_BUDGET
        assert result.expressions_considered == 777

    def test_weight_budget(self):
        task = Task([["abc", "de"]], ["@1", "#2"])
        result = synthesize(task, SearchConfig(max_weight=3))
        assert result.termination == WEIGHT_BUDGET

    def test_time_budget(self):
        task = Task([["abc", "de"]], ["@1", "#2"])
        result = synthesize(task, SearchConfig(time_budget=0.05))
        assert result.termination == TIME_BUDGET
        assert result.elapsed < 2.0

    def test_progress_events(self):
        events = []
        task = Task([["abc", "de"]], ["@1", "#2"])
        synthesize(task, SearchConfig(max_weight=4),
                   progress=lambda w, stored, n: events.append((w, stored, n)))
        assert [e[0] for e in events] == [2, 3, 4]
        assert events[-1][2] > events[0][2]

    def test_restricted_ops(self):
        task = Task([["ab", "c"]], ["abab", "cc"])
        ops = (find_op("CONCATENATE", 2),)
        result = synthesize(task, SearchConfig(ops=ops))
        assert result.formula == "CONCATENATE(var_0, var_0)"

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(max_expressions=0)
        with pytest.raises(ValueError):
            SearchConfig(guidance="model")
        with pytest.raises(ValueError):
            SearchConfig(guidance="magic")


class TestCompleteness:
    """The bank must match an independent AST enumeration exactly."""

    OPS = (find_op("CONCATENATE", 2), find_op("LEFT", 2), find_op("LEN", 1))

    def test_matches_bruteforce_enumeration(self):
        task = Task([["abc", "de"]], ["@1", "#2"])  # unreachable outputs
        config = SearchConfig(max_expressions=10_000_000, max_weight=6, ops=self.OPS)
        result, bank = run_search(task, config)
        assert not result.solved and result.termination == WEIGHT_BUDGET
        stored = {(v.kind, v.vals) for v in bank.iter_values()}
        oracle = reachable_value_set(task, self.OPS, 6)
        assert stored == oracle
        assert len(bank) == len(oracle)

    def test_every_stored_weight_is_minimal(self):
        task = Task([["abc", "de"]], ["@1", "#2"])
        config = SearchConfig(max_expressions=10_000_000, max_weight=5, ops=self.OPS)
        _, bank = run_search(task, config)
        for upto in range(1, 6):
            reachable = reachable_value_set(task, self.OPS, upto)
            stored = {(v.kind, v.vals) for v in bank.iter_values() if v.weight <= upto}
            assert stored == reachable


class TestGuidedSearch:
    def test_dedup_never_stores_equal_columns(self, tiny_model):
        task = Task([["ab", "c"]], ["ab c", "c c"])
        config = SearchConfig(max_expressions=4000, guidance="model", model=tiny_model)
        _, bank = run_search(task, config)
        all_vals = [v.vals for v in bank.iter_values()]
        assert len(all_vals) == len(set(all_vals))

    def test_reweight_bounds_hold_in_bank(self, tiny_model):
        task = Task([["ab", "c"]], ["@1", "#2"])
        config = SearchConfig(max_expressions=3000, guidance="model",
                              model=tiny_model, max_weight=4)
        _, bank = run_search(task, config)
        deferred = [v for v in bank.iter_values() if v.score is not None]
        assert deferred
        for v in deferred:
            assert v.score is not None

    def test_batched_matches_unbatched(self, tiny_model):
        task = Task([["ab", "c"]], ["@1", "#2"])
        banks = []
        for batch in (1, 4096):
            config = SearchConfig(max_expressions=3000, guidance="model",
                                  model=tiny_model, reweight_batch=batch)
            _, bank = run_search(task, config)
            banks.append({w: [v.vals for v in vs] for w, vs in bank.by_weight.items()})
        assert banks[0] == banks[1]

    def test_all_modes_solve_and_verify(self, tiny_model):
        task = Task([["2020-01-02", "1999-12-31"]], ["2020/01/02", "1999/12/31"])
        for mode in ("none", "heuristic", "model", "combined"):
            config = SearchConfig(
                guidance=mode,
                model=tiny_model if mode in ("model", "combined") else None)
            result = synthesize(task, config)
            assert result.solved, mode
            value = eval_expr(parse_formula(result.formula), task)
            assert value.vals == task.outputs

    def test_determinism(self, tiny_model):
        task = Task([["ab", "c"]], ["@1", "#2"])
        config = SearchConfig(max_expressions=5000, guidance="model", model=tiny_model)
        a = synthesize(task, config)
        b = synthesize(task, config)
        assert (a.solved, a.formula, a.expressions_considered, a.values_stored,
                a.termination) == \
               (b.solved, b.formula, b.expressions_considered, b.values_stored,
                b.termination)

    def test_score_samples_only_on_model_solves(self, tiny_model):
        # the doubled-and-uppercased output forces a composed sub-expression,
        # so at least one stored value must be flagged as part of the solution
        task = Task([["ab", "q"]], ["ABAB", "QQ"])
        unguided = synthesize(task)
        assert unguided.score_samples is None
        guided = synthesize(task, SearchConfig(guidance="model", model=tiny_model))
        assert guided.solved
        assert guided.score_samples is not None
        assert all(0.0 < s < 1.0 for s, _ in guided.score_samples)
        assert any(flag for _, flag in guided.score_samples)
