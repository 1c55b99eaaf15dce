"""Overpractice, cell aggregation, and effect-size oracles."""

import math
import statistics

import pytest

from masterysim.domain import PolicyConfig, Strategy
from masterysim.engine import LearnerResult
from masterysim.metrics import cohens_d, overpractice, sample_sd, summarize_cell


def result(opportunities, mastered_at, learner_id=0, completed=True, problems=5):
    n = len(opportunities)
    return LearnerResult(
        learner_id=learner_id,
        ability=0.0,
        opportunities=tuple(opportunities),
        success_count=tuple(0 for _ in range(n)),
        mastered_at=tuple(mastered_at),
        final_mastery=tuple(0.99 if m is not None else 0.5 for m in mastered_at),
        total_problems=problems,
        completed=completed,
    )


POLICY = PolicyConfig(strategy=Strategy.RANDOM, n_learners=2)


class TestOverpractice:
    def test_single_skill_definition(self):
        assert overpractice(result([8], [5])) == 3.0

    def test_mean_over_mastered_skills(self):
        assert overpractice(result([4, 10], [4, 6])) == 2.0

    def test_mastered_at_final_opportunity_gives_zero(self):
        assert overpractice(result([4, 6], [4, 6])) == 0.0

    def test_unmastered_skills_are_excluded(self):
        assert overpractice(result([8, 20], [5, None], completed=False)) == 3.0

    def test_no_mastered_skill_scores_zero(self):
        assert overpractice(result([8], [None], completed=False)) == 0.0

    def test_invariant_under_skill_relabeling(self):
        a = result([8, 4, 10], [5, 4, 6])
        b = result([10, 8, 4], [6, 5, 4])
        assert overpractice(a) == overpractice(b)


class TestSampleSd:
    def test_matches_statistics_stdev(self):
        values = [2.0, 4.0, 7.0, 1.5]
        assert sample_sd(values) == pytest.approx(statistics.stdev(values), abs=1e-12)

    def test_single_value_gives_zero(self):
        assert sample_sd([3.0]) == 0.0


class TestCohensD:
    def test_identical_groups_give_zero(self):
        assert cohens_d([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_hand_example(self):
        # means 3 and 1, both variances 2, pooled sd sqrt(2) -> d = sqrt(2)
        assert cohens_d([2.0, 4.0], [0.0, 2.0]) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_antisymmetry(self):
        a, b = [2.0, 4.0, 5.0], [1.0, 1.5, 2.0]
        assert cohens_d(a, b) == pytest.approx(-cohens_d(b, a), abs=1e-12)

    def test_zero_pooled_sd_is_nan(self):
        assert math.isnan(cohens_d([2.0, 2.0], [3.0, 3.0]))

    def test_requires_two_values_per_group(self):
        with pytest.raises(ValueError):
            cohens_d([1.0], [2.0, 3.0])


class TestSummarizeCell:
    def test_identical_learners_have_zero_sd(self):
        results = [result([8], [5], learner_id=i) for i in range(4)]
        cell = summarize_cell(results, POLICY, ["A"])
        assert cell.mean_overpractice == 3.0
        assert cell.sd_overpractice == 0.0
        assert cell.completion_rate == 1.0

    def test_mean_and_sample_sd(self):
        results = [result([6], [4], learner_id=0), result([8], [4], learner_id=1)]
        cell = summarize_cell(results, POLICY, ["A"])
        assert cell.mean_overpractice == 3.0
        assert cell.sd_overpractice == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_mean_matches_direct_recomputation(self):
        results = [result([5, 9], [3, 7], learner_id=0),
                   result([6, 12], [6, 5], learner_id=1),
                   result([4, 4], [2, None], learner_id=2, completed=False)]
        cell = summarize_cell(results, POLICY, ["A", "B"])
        expected = statistics.mean(overpractice(r) for r in results)
        assert cell.mean_overpractice == pytest.approx(expected, abs=1e-12)
        assert cell.completion_rate == pytest.approx(2 / 3)

    def test_per_skill_breakdown(self):
        results = [result([5, 9], [3, 7], learner_id=0),
                   result([7, 9], [5, None], learner_id=1, completed=False)]
        cell = summarize_cell(results, POLICY, ["A", "B"])
        a, b = cell.per_skill
        assert a.n_mastered == 2
        assert a.mean_opportunities_to_mastery == 4.0
        assert a.mean_overpractice == 2.0
        assert b.n_mastered == 1
        assert b.mean_overpractice == 2.0

    def test_pooled_per_skill_view(self):
        results = [result([5, 9], [3, 7], learner_id=0)]
        cell = summarize_cell(results, POLICY, ["A", "B"])
        assert cell.per_skill_overpractice == pytest.approx(2.0)

    def test_learners_without_mastery_flagged(self):
        results = [result([8], [None], learner_id=0, completed=False),
                   result([8], [5], learner_id=1)]
        cell = summarize_cell(results, POLICY, ["A"])
        assert cell.learners_without_mastery == 1

    def test_empty_results_is_an_error(self):
        with pytest.raises(ValueError):
            summarize_cell([], POLICY, ["A"])
