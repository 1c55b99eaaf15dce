"""AFM prediction and BKT updating against hand-computed oracle values."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masterysim.domain import AfmParams, BktParams, KnowledgeState, SkillBkt
from masterysim.engine import learner_rng
from masterysim.student import (
    afm_predict,
    bkt_update,
    is_mastered,
    sigmoid,
    simulate_step,
)

DEFAULTS = SkillBkt(p_init=0.25, p_learn=0.22, p_guess=0.2, p_slip=0.1)


def afm(difficulty, slope, intercept=0.0):
    return AfmParams(intercept=intercept, difficulty=tuple(difficulty),
                     learn_slope=tuple(slope))


class TestAfmPredict:
    def test_all_zero_gives_half(self):
        params = afm([0.0], [0.0])
        assert afm_predict(params, 0.0, [0], [0]) == 0.5

    def test_difficulty_cancelled_by_practice(self):
        # -1.0 + 0.5 * 2 = 0 by symmetry
        params = afm([-1.0], [0.5])
        assert afm_predict(params, 0.0, [0], [2]) == pytest.approx(0.5)

    def test_two_skill_hand_example(self):
        # 0.3 + 0.2 + (-0.5 + 0.1*3) + (0.4 + 0.0*7) = 0.7
        params = afm([-0.5, 0.4], [0.1, 0.0], intercept=0.3)
        expected = 1.0 / (1.0 + math.exp(-0.7))
        assert afm_predict(params, 0.2, [0, 1], [3, 7]) == pytest.approx(expected, abs=1e-12)

    def test_empty_skill_list_is_an_error(self):
        with pytest.raises(ValueError):
            afm_predict(afm([0.0], [0.0]), 0.0, [], [0])

    def test_strictly_increasing_in_ability_and_practice(self):
        params = afm([-0.3], [0.2])
        p_low = afm_predict(params, -1.0, [0], [0])
        p_high = afm_predict(params, 1.0, [0], [0])
        assert p_low < p_high
        p0 = afm_predict(params, 0.0, [0], [0])
        p5 = afm_predict(params, 0.0, [0], [5])
        assert p0 < p5

    def test_extreme_logits_do_not_overflow(self):
        params = afm([800.0], [0.0])
        assert afm_predict(params, 0.0, [0], [0]) == 1.0
        params = afm([-800.0], [0.0])
        assert afm_predict(params, 0.0, [0], [0]) == 0.0


class TestBktUpdate:
    def test_certainty_is_a_fixed_point(self):
        assert bkt_update(1.0, True, DEFAULTS) == 1.0

    def test_correct_answer_hand_example(self):
        # obs = 0.225/0.375 = 0.6; 0.6 + 0.4*0.22 = 0.688
        assert bkt_update(0.25, True, DEFAULTS) == pytest.approx(0.688, abs=1e-12)

    def test_incorrect_answer_hand_example(self):
        # obs = 0.025/0.625 = 0.04; 0.04 + 0.96*0.22 = 0.2512
        assert bkt_update(0.25, False, DEFAULTS) == pytest.approx(0.2512, abs=1e-12)

    def test_zero_floor_fixed_point(self):
        params = SkillBkt(p_init=0.0, p_learn=0.0, p_guess=0.2, p_slip=0.1)
        assert bkt_update(0.0, False, params) == 0.0

    def test_degenerate_denominator_falls_back_to_prior(self):
        # p=0 and guess=0 on a correct answer: denominator is exactly 0
        params = SkillBkt(p_init=0.0, p_learn=0.0, p_guess=0.0, p_slip=0.1)
        assert bkt_update(0.0, True, params) == 0.0

    @given(
        p=st.floats(0.0, 1.0),
        p_learn=st.floats(0.0, 1.0),
        p_guess=st.floats(0.0, 0.95),
        p_slip=st.floats(0.0, 0.95),
        correct=st.booleans(),
    )
    @settings(max_examples=300)
    def test_output_always_in_unit_interval(self, p, p_learn, p_guess, p_slip, correct):
        if p_guess + p_slip >= 1.0:
            p_slip = 0.99 - p_guess
        params = SkillBkt(0.25, p_learn, p_guess, p_slip)
        assert 0.0 <= bkt_update(p, correct, params) <= 1.0

    @given(p=st.floats(0.0, 1.0))
    @settings(max_examples=200)
    def test_correct_at_least_incorrect(self, p):
        # monotonicity in the observation when guess + slip < 1
        assert bkt_update(p, True, DEFAULTS) >= bkt_update(p, False, DEFAULTS) - 1e-12

    @given(p1=st.floats(0.0, 1.0), p2=st.floats(0.0, 1.0), correct=st.booleans())
    @settings(max_examples=200)
    def test_monotone_in_prior(self, p1, p2, correct):
        lo, hi = sorted((p1, p2))
        assert bkt_update(lo, correct, DEFAULTS) <= bkt_update(hi, correct, DEFAULTS) + 1e-12


class TestIsMastered:
    def make_state(self, mastery):
        state = KnowledgeState.initial(BktParams.uniform(len(mastery)), 0.95)
        state.mastery = list(mastery)
        return state

    def test_boundary_counts_as_mastered(self):
        assert is_mastered(self.make_state([0.95]), 0, 0.95)

    def test_just_below_is_not_mastered(self):
        assert not is_mastered(self.make_state([0.949]), 0, 0.95)

    def test_prior_start_is_not_mastered(self):
        assert not is_mastered(self.make_state([0.25]), 0, 0.95)


class TestSimulateStep:
    def test_deterministic_given_seed(self):
        bkt = BktParams.uniform(3)
        params = afm([-0.2] * 3, [0.1] * 3)

        def run():
            rng = learner_rng(123, 0)
            state = KnowledgeState.initial(bkt, 0.95)
            outcomes = []
            for _ in range(50):
                outcome = simulate_step(state, (0, 1), params, 0.3, bkt, rng, 0.95)
                outcomes.append(outcome.correct)
            return outcomes, state.mastery, state.opportunities, state.mastered_at

        assert run() == run()

    def test_updates_every_skill_on_step_with_same_outcome(self):
        bkt = BktParams.uniform(3)
        params = afm([800.0] * 3, [0.0] * 3)  # p_correct == 1.0: always correct
        state = KnowledgeState.initial(bkt, 0.95)
        rng = learner_rng(7, 0)
        simulate_step(state, (0, 2), params, 0.0, bkt, rng, 0.95)
        assert state.opportunities == [1, 0, 1]
        assert state.success_count == [1, 0, 1]
        expected = bkt_update(0.25, True, DEFAULTS)
        assert state.mastery[0] == pytest.approx(expected)
        assert state.mastery[2] == pytest.approx(expected)
        assert state.mastery[1] == 0.25

    def test_correct_run_latches_mastery_at_third_opportunity(self):
        # with defaults, correct-only updates cross 0.95 on the third answer
        bkt = BktParams.uniform(1)
        params = afm([800.0], [0.0])
        state = KnowledgeState.initial(bkt, 0.95)
        rng = learner_rng(7, 0)
        for _ in range(5):
            simulate_step(state, (0,), params, 0.0, bkt, rng, 0.95)
        p = 0.25
        crossings = 0
        while p < 0.95:
            p = bkt_update(p, True, DEFAULTS)
            crossings += 1
        assert crossings == 3
        assert state.mastered_at == [3]
        assert state.opportunities == [5]

    def test_incorrect_draw_keeps_mastery_below_certainty(self):
        bkt = BktParams.uniform(2)
        params = afm([-800.0] * 2, [0.0] * 2)  # p_correct == 0: always incorrect
        state = KnowledgeState.initial(bkt, 0.95)
        rng = learner_rng(11, 0)
        outcome = simulate_step(state, (0, 1), params, 0.0, bkt, rng, 0.95)
        assert not outcome.correct
        expected = bkt_update(0.25, False, DEFAULTS)
        assert state.mastery == [pytest.approx(expected)] * 2
        assert state.success_count == [0, 0]

    def test_mastered_at_is_never_cleared(self):
        bkt = BktParams.uniform(1)
        state = KnowledgeState.initial(bkt, 0.95)
        rng = learner_rng(3, 0)
        up = afm([800.0], [0.0])
        down = afm([-800.0], [0.0])
        for _ in range(3):
            simulate_step(state, (0,), up, 0.0, bkt, rng, 0.95)
        assert state.mastered_at == [3]
        for _ in range(3):
            simulate_step(state, (0,), down, 0.0, bkt, rng, 0.95)
        assert state.mastery[0] < 0.95
        assert state.mastered_at == [3]


def test_sigmoid_matches_closed_form():
    for x in (-5.0, -0.7, 0.0, 0.7, 5.0):
        assert sigmoid(x) == pytest.approx(1.0 / (1.0 + math.exp(-x)), abs=1e-15)
