import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advloop.adversary import (
    AdversaryConfig,
    Candidate,
    CandidateSet,
    adversarial_score,
    collision_term,
    first_collision_step,
    generate_candidates,
    jerk_penalty,
    pick_adversary,
    score_value,
    select_adversarial,
)
from advloop.dynamics import SIM_DT, KinematicLimits, Trajectory, VehicleState, integrate_profile
from oracles import first_contact_time_dense

EXTENT = (4.0, 2.0)


def cruise(x0, y0, heading, v, n):
    return integrate_profile(
        VehicleState(x0, y0, heading, v, 0), [heading] * (n - 1), [v] * (n - 1), SIM_DT
    )


class TestFirstCollisionStep:
    def test_head_on_matches_dense_sweep(self):
        ego = cruise(0.0, 0.0, 0.0, 5.05, 20)
        adv = cruise(15.413, 0.0, math.pi, 5.05, 20)
        t_dense = first_contact_time_dense(adv, ego, EXTENT, EXTENT)
        assert t_dense is not None
        expected = math.ceil(t_dense / SIM_DT - 1e-9)
        assert first_collision_step(adv, ego, EXTENT, EXTENT) == expected == 12

    def test_parallel_lanes_clear(self):
        ego = cruise(0.0, 0.0, 0.0, 10.0, 30)
        adv = cruise(0.0, 10.0, 0.0, 10.0, 30)
        assert first_collision_step(adv, ego, EXTENT, EXTENT) is None

    def test_immediate_overlap_is_step_one(self):
        ego = cruise(0.0, 0.0, 0.0, 10.0, 10)
        adv = cruise(1.0, 0.5, 0.0, 10.0, 10)
        assert first_collision_step(adv, ego, EXTENT, EXTENT) == 1

    def test_dt_mismatch_rejected(self):
        ego = cruise(0.0, 0.0, 0.0, 10.0, 11)
        adv = Trajectory(0.5, [VehicleState(0, 10, 0, 1, i * 5) for i in range(3)])
        with pytest.raises(ValueError, match="dt mismatch"):
            first_collision_step(adv, ego, EXTENT, EXTENT)

    def test_midpoint_substep_catches_tunneling(self):
        # 36 m/s closing speed crosses a 2 m-deep contact zone between samples
        ego = cruise(0.0, 0.0, 0.0, 0.0, 12)
        adv = cruise(12.2, 0.0, math.pi, 36.0, 12)
        t_dense = first_contact_time_dense(adv, ego, EXTENT, EXTENT, dt_fine=0.005)
        assert t_dense is not None
        got = first_collision_step(adv, ego, EXTENT, EXTENT)
        assert got is not None
        assert abs(got - t_dense / SIM_DT) <= 1.0


class TestJerkPenalty:
    def test_constant_velocity_zero(self):
        assert jerk_penalty(cruise(0, 0, 0, 12.0, 40)) == pytest.approx(0.0, abs=1e-9)

    def test_constant_acceleration_zero(self):
        start = VehicleState(0, 0, 0, 5.0, 0)
        speeds = [5.0 + 0.2 * i for i in range(1, 40)]
        traj = integrate_profile(start, [0.0] * 39, speeds, SIM_DT)
        assert jerk_penalty(traj) < 1e-9

    def test_sinusoidal_speed_matches_analytic(self):
        v0, amp, omega = 10.0, 2.0, 1.5
        n = 51
        start = VehicleState(0, 0, 0, v0, 0)
        speeds = [v0 + amp * math.sin(omega * i * SIM_DT) for i in range(1, n)]
        traj = integrate_profile(start, [0.0] * (n - 1), speeds, SIM_DT)
        limits = KinematicLimits()
        got = jerk_penalty(traj, limits)
        # third position difference at index i spans speeds at t_{i+1}..t_{i+3}
        stencil_times = [(i + 2) * SIM_DT for i in range(n - 3)]
        analytic = np.mean([abs(-amp * omega**2 * math.sin(omega * t)) for t in stencil_times])
        expected = min(1.0, analytic / limits.j_max)
        assert got == pytest.approx(expected, rel=0.05)

    def test_too_few_states(self):
        with pytest.raises(ValueError, match="4 states"):
            jerk_penalty(cruise(0, 0, 0, 5.0, 3))


class TestScore:
    def test_hand_evaluated_case(self):
        cfg = AdversaryConfig(gamma=0.9, w_c=1.0, w_j=0.5)
        c = collision_term(3, 0.0, cfg)
        assert c == pytest.approx(0.81, abs=1e-12)
        score = score_value(0.5, c, 0.2, cfg)
        assert score == pytest.approx(0.5 * 0.81 * math.exp(-0.1), abs=1e-9)
        assert score == pytest.approx(0.36646, abs=5e-6)

    def test_first_step_collision_maximizes_c(self):
        cfg = AdversaryConfig()
        assert collision_term(1, 0.0, cfg) == 1.0

    def test_weights_off_reduces_to_prior(self):
        cfg = AdversaryConfig(w_c=0.0, w_j=0.0)
        for t_c in (None, 1, 7):
            assert score_value(0.37, collision_term(t_c, 3.0, cfg), 0.9, cfg) == pytest.approx(0.37)

    def test_near_miss_below_any_collision(self):
        cfg = AdversaryConfig()
        worst_collision = collision_term(cfg.horizon_steps, 0.0, cfg)
        touching_miss = collision_term(None, 0.0, cfg)
        assert touching_miss <= worst_collision
        assert collision_term(None, 0.5, cfg) < collision_term(None, 0.1, cfg)

    def test_full_path_on_geometry(self):
        # constant-velocity candidate hitting the ego at a known step
        ego = cruise(0.0, 0.0, 0.0, 5.05, 25)
        adv = cruise(15.413, 0.0, math.pi, 5.05, 25)
        cfg = AdversaryConfig(horizon_steps=20)
        sc = adversarial_score(Candidate(adv, 0.25), ego, cfg, (EXTENT, EXTENT))
        assert sc.t_c == 12
        assert sc.c == pytest.approx(0.9**11, abs=1e-12)
        assert sc.jerk == pytest.approx(0.0, abs=1e-9)
        assert sc.score == pytest.approx(0.25 * 0.9**11, abs=1e-9)

    @given(st.integers(0, 100_000))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_collision_step_and_jerk(self, seed):
        rng = np.random.default_rng(seed)
        cfg = AdversaryConfig(
            gamma=float(rng.uniform(0.5, 0.99)),
            w_c=float(rng.uniform(0.1, 3.0)),
            w_j=float(rng.uniform(0.1, 3.0)),
        )
        p = float(rng.uniform(0.01, 1.0))
        j = float(rng.uniform(0.0, 1.0))
        t1, t2 = sorted(rng.integers(1, cfg.horizon_steps + 1, size=2))
        if t1 != t2:
            early = score_value(p, collision_term(int(t1), 0.0, cfg), j, cfg)
            late = score_value(p, collision_term(int(t2), 0.0, cfg), j, cfg)
            assert early > late
        j2 = j + float(rng.uniform(0.01, 0.5))
        assert score_value(p, 0.5, j, cfg) > score_value(p, 0.5, j2, cfg)
        assert 0.0 <= score_value(p, collision_term(int(t1), 0.0, cfg), j, cfg) <= p


def lattice_for_selection(priors):
    """One colliding candidate among parallel passes, constant speeds."""
    n = 21
    candidates = [
        cruise(15.413, 0.0, math.pi, 5.05, n),  # head-on: collides at step 12
        cruise(0.0, 6.0, 0.0, 10.0, n),         # parallel, 6 m offset
        cruise(0.0, -8.0, 0.0, 10.0, n),        # parallel, 8 m offset
    ]
    return CandidateSet([Candidate(t, p) for t, p in zip(candidates, priors)])


class TestSelectAdversarial:
    def test_colliding_candidate_wins_when_score_dominates(self):
        ego = cruise(0.0, 0.0, 0.0, 5.05, 21)
        cfg = AdversaryConfig(horizon_steps=20)
        cset = lattice_for_selection([0.2, 0.5, 0.3])
        tau, scored = select_adversarial(cset, ego, cfg, (EXTENT, EXTENT))
        # hand-enumerated expectations (constant-velocity candidates, J = 0)
        expected = [
            0.2 * 0.9**11,
            0.5 * 0.9**20 * 2.0 / (2.0 + 4.0),
            0.3 * 0.9**20 * 2.0 / (2.0 + 6.0),
        ]
        for sc, exp in zip(scored, expected):
            assert sc.score == pytest.approx(exp, abs=1e-9)
        assert tau is cset.candidates[0].trajectory

    def test_identical_candidates_tie_break_to_first(self):
        ego = cruise(0.0, 0.0, 0.0, 5.0, 21)
        traj = cruise(0.0, 6.0, 0.0, 5.0, 21)
        cset = CandidateSet([Candidate(traj, 0.25) for _ in range(4)])
        cfg = AdversaryConfig(horizon_steps=20)
        tau, scored = select_adversarial(cset, ego, cfg, (EXTENT, EXTENT))
        best = max(scored, key=lambda s: s.score)
        assert scored.index(best) in (0, 1, 2, 3)
        assert tau is cset.candidates[0].trajectory

    def test_argmax_invariant_under_prior_scaling(self):
        ego = cruise(0.0, 0.0, 0.0, 5.05, 21)
        cfg = AdversaryConfig(horizon_steps=20)
        base = [0.2, 0.5, 0.3]
        tau_a, scored_a = select_adversarial(lattice_for_selection(base), ego, cfg, (EXTENT, EXTENT))
        # scaling all priors by k > 0 and renormalizing leaves the argmax alone
        scaled = [p * 3.7 for p in base]
        total = sum(scaled)
        tau_b, scored_b = select_adversarial(
            lattice_for_selection([p / total for p in scaled]), ego, cfg, (EXTENT, EXTENT)
        )
        best_a = max(range(3), key=lambda i: scored_a[i].score)
        best_b = max(range(3), key=lambda i: scored_b[i].score)
        assert best_a == best_b


class TestGenerateCandidates:
    @pytest.fixture
    def scenario_and_log(self):
        from advloop.scenario import synth_scenario

        scenario = synth_scenario("straight", seed=1, params={"duration_steps": 80})
        ego_log = Trajectory(SIM_DT, list(scenario.ego.states))
        return scenario, ego_log

    def test_contract_k8(self, scenario_and_log):
        scenario, ego_log = scenario_and_log
        cset = generate_candidates(scenario, "lead", ego_log, k=8, seed=0)
        assert len(cset) == 8
        priors = [c.prior for c in cset]
        assert sum(priors) == pytest.approx(1.0, abs=1e-6)
        assert all(0.0 < p <= 1.0 for p in priors)
        positions = [tuple(c.trajectory.positions[-1]) for c in cset]
        assert len(set(positions)) == 8, "candidates must be distinct"

    def test_determinism(self, scenario_and_log):
        scenario, ego_log = scenario_and_log
        a = generate_candidates(scenario, "lead", ego_log, k=32, seed=3)
        b = generate_candidates(scenario, "lead", ego_log, k=32, seed=3)
        for ca, cb in zip(a, b):
            assert ca.prior == cb.prior
            assert ca.trajectory == cb.trajectory

    def test_sharp_prior_concentrates_on_replay(self, scenario_and_log):
        scenario, ego_log = scenario_and_log
        cfg = AdversaryConfig(prior_lambda=1e6)
        cset = generate_candidates(scenario, "lead", ego_log, k=16, seed=0, cfg=cfg)
        priors = [c.prior for c in cset]
        assert int(np.argmax(priors)) == 0  # template 0 is log replay
        assert priors[0] > 0.99

    def test_shared_dt_and_horizon(self, scenario_and_log):
        scenario, ego_log = scenario_and_log
        cfg = AdversaryConfig(horizon_steps=50)
        cset = generate_candidates(scenario, "lead", ego_log, k=32, seed=1, cfg=cfg)
        assert all(len(c.trajectory) == 51 for c in cset)
        assert all(c.trajectory.dt == SIM_DT for c in cset)

    def test_absent_adversary_rejected(self, scenario_and_log):
        scenario, ego_log = scenario_and_log
        import dataclasses

        lead = scenario.agent("lead")
        hidden = dataclasses.replace(lead, states=(None,) * len(lead.states))
        scenario2 = dataclasses.replace(
            scenario, agents=tuple(hidden if a.agent_id == "lead" else a for a in scenario.agents)
        )
        with pytest.raises(ValueError, match="absent at episode start"):
            generate_candidates(scenario2, "lead", ego_log, k=8, seed=0)

    def test_k_too_small(self, scenario_and_log):
        scenario, ego_log = scenario_and_log
        with pytest.raises(ValueError, match="at least 2"):
            generate_candidates(scenario, "lead", ego_log, k=1, seed=0)


class TestPickAdversary:
    def test_nearest_agent_chosen(self):
        from advloop.scenario import synth_scenario

        scenario = synth_scenario("cut_in", seed=2)
        ego_log = Trajectory(SIM_DT, list(scenario.ego.states))
        chosen = pick_adversary(scenario, ego_log, AdversaryConfig())
        # the adjacent-lane neighbour starts one lane over; the lead is 60 m out
        assert chosen == "neighbour"

    def test_override_wins(self):
        from advloop.scenario import synth_scenario

        scenario = synth_scenario("cut_in", seed=2)
        ego_log = Trajectory(SIM_DT, list(scenario.ego.states))
        assert pick_adversary(scenario, ego_log, AdversaryConfig(adversary_id="lead")) == "lead"
