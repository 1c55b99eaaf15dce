"""Domain types: validation, serialization round-trips, parameter guards."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masterysim.domain import (
    AfmParams,
    BktParams,
    KnowledgeState,
    PolicyConfig,
    Strategy,
    domain_from_dict,
    domain_to_dict,
    load_domain,
    make_domain,
    save_domain,
    validate_domain,
)


def two_skill_domain():
    return make_domain(
        "tiny",
        ["A", "B"],
        [("P1", [["A"], ["B"]]), ("P2", [["A", "B"]])],
    )


def test_well_formed_domain_has_no_violations():
    assert validate_domain(two_skill_domain()) == []


def test_unused_skill_is_reported():
    domain = make_domain("d", ["S1", "S2", "S3"],
                         [("P1", [["S1"], ["S2"]]), ("P2", [["S2"]]), ("P3", [["S1"]])])
    assert validate_domain(domain) == ["unused skill S3"]


def test_problem_without_steps_is_reported():
    domain = make_domain("d", ["S1"], [("P1", []), ("P2", [["S1"]])])
    assert "problem P1 has no steps" in validate_domain(domain)


def test_unknown_skill_reference_is_reported():
    domain = make_domain("d", ["S1"], [("P1", [["S1", "S9"]])])
    assert any("unknown skill S9" in v for v in validate_domain(domain))


def test_duplicate_ids_are_reported():
    domain = make_domain("d", ["S1", "S1"], [("P1", [["S1"]]), ("P1", [["S1"]])])
    violations = validate_domain(domain)
    assert any("duplicate skill id" in v for v in violations)
    assert any("duplicate problem id" in v for v in violations)


def test_domain_round_trip_is_identical(tmp_path):
    domain = two_skill_domain()
    path = tmp_path / "domain.json"
    save_domain(domain, path)
    assert load_domain(path) == domain


def test_domain_rejects_unknown_schema_version():
    data = domain_to_dict(two_skill_domain())
    data["schema_version"] = 99
    with pytest.raises(ValueError, match="schema_version"):
        domain_from_dict(data)


@st.composite
def domain_dicts(draw):
    n_skills = draw(st.integers(1, 6))
    skill_ids = [f"k{i}" for i in range(n_skills)]
    n_problems = draw(st.integers(1, 5))
    problems = []
    for p in range(n_problems):
        n_steps = draw(st.integers(1, 4))
        steps = []
        for _ in range(n_steps):
            size = draw(st.integers(1, min(2, n_skills)))
            start = draw(st.integers(0, n_skills - size))
            steps.append(skill_ids[start:start + size])
        problems.append((f"p{p}", steps))
    return make_domain("prop", skill_ids, problems)


@given(domain_dicts())
@settings(max_examples=50)
def test_serialization_round_trip_property(domain):
    assert domain_from_dict(json.loads(json.dumps(domain_to_dict(domain)))) == domain


class TestBktParams:
    def test_uniform_defaults_match_tutorshop(self):
        params = BktParams.uniform(3)
        assert params.for_skill(1) == (0.25, 0.22, 0.2, 0.1)

    def test_rejects_probability_out_of_range(self):
        with pytest.raises(ValueError):
            BktParams.uniform(1, p_init=1.5)

    def test_rejects_guess_plus_slip_at_one(self):
        with pytest.raises(ValueError, match="p_guess"):
            BktParams.uniform(1, p_guess=0.6, p_slip=0.4)


class TestAfmParams:
    def test_rejects_negative_learn_slope(self):
        with pytest.raises(ValueError, match="learn_slope"):
            AfmParams(intercept=0.0, difficulty=(0.0,), learn_slope=(-0.1,))

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            AfmParams(intercept=0.0, difficulty=(0.0, 1.0), learn_slope=(0.1,))


class TestPolicyConfig:
    def test_rejects_threshold_at_half(self):
        with pytest.raises(ValueError):
            PolicyConfig(strategy=Strategy.RANDOM, mastery_threshold=0.5)

    def test_rejects_zero_max_problems(self):
        with pytest.raises(ValueError):
            PolicyConfig(strategy=Strategy.RANDOM, max_problems=0)


class TestKnowledgeState:
    def test_initial_state_uses_priors(self):
        state = KnowledgeState.initial(BktParams.uniform(2), threshold=0.95)
        assert state.mastery == [0.25, 0.25]
        assert state.opportunities == [0, 0]
        assert state.mastered_at == [None, None]

    def test_initial_state_latches_skills_starting_at_threshold(self):
        params = BktParams.uniform(1, p_init=0.97)
        state = KnowledgeState.initial(params, threshold=0.95)
        assert state.mastered_at == [0]
