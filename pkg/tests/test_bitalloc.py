import itertools
import math

import numpy as np
import pytest

import oracles as O
from mpa_codebook.bitalloc import (ACTIONS, GPP_MINIMUM, N_ACTIONS, AllocBox, QNetwork,
                                   RateEvaluator, ReplayBuffer, RLHyperParams, TrainingError,
                                   allocation_bits, enumerate_allocations, env_step,
                                   epsilon_greedy, exhaustive_best, fill_residual,
                                   initial_state, q_train_step, reward, run_algorithm1,
                                   train_allocation, write_trace)
from mpa_codebook.channel import ConfigurationError, DomainError
from mpa_codebook.codebook import BitAllocation


class TestReward:
    def test_new_best(self):
        assert reward(7.0, 7.0, 7.0, 1.0) == 2000.0

    def test_above_baseline(self):
        assert reward(7.0, 7.0, 8.0, 1.0) == 1000.0

    def test_below_baseline(self):
        assert reward(3.5, 7.0, 8.0, 1.0) == -1000.0

    def test_bit_ratio_scales(self):
        assert reward(7.0, 7.0, 8.0, 0.5) == 500.0

    def test_domain(self):
        with pytest.raises(DomainError):
            reward(1.0, 0.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            reward(0.0, 1.0, 2.0, 1.0)

    def test_train_target_shift(self):
        hp = RLHyperParams()
        assert hp.train_target(1000.0) == 0.0
        assert hp.train_target(2000.0) == 1.0


class TestEnvironment:
    def test_initial_state_at_forty(self, desk):
        s = initial_state(40, desk)
        assert s.as_tuple() == (2, 0, 0, 3, 2)
        assert allocation_bits(s, desk) == 36

    def test_no_op(self, desk):
        s = initial_state(40, desk)
        assert env_step(s, N_ACTIONS - 1, 40, desk) == s

    def test_amplitude_up_refills_phase(self, desk):
        s = initial_state(40, desk)
        nxt = env_step(s, 6, 40, desk, AllocBox.reduced())
        assert nxt.as_tuple() == (2, 0, 0, 4, 1)
        assert allocation_bits(nxt, desk) == 36

    def test_amplitude_up_clamps_when_phase_minimum_breaks(self, desk):
        s = initial_state(40, desk)
        assert env_step(s, 6, 40, desk) == s

    def test_rotation_up_refills_phase(self, desk):
        s = initial_state(40, desk)
        nxt = env_step(s, 4, 40, desk)
        assert nxt.as_tuple() == (2, 0, 1, 3, 2)
        assert allocation_bits(nxt, desk) == 38

    def test_clamp_at_lower_bound(self, desk):
        s = initial_state(40, desk)
        assert env_step(s, 3, 40, desk) == s

    def test_feasibility_preserved_over_box(self, desk):
        box = AllocBox()
        states = [s for s in (fill_residual(BitAllocation(*v, b_c=2), 44, desk, box)
                              for v in itertools.product(range(2, 6), range(0, 3),
                                                         range(0, 4), range(3, 6)))
                  if s is not None]
        assert states
        for s, a in itertools.product(states, range(N_ACTIONS)):
            nxt = env_step(s, a, 44, desk, box)
            assert box.contains(nxt)
            assert allocation_bits(nxt, desk) <= 44

    def test_minimum_budget_has_one_state(self, desk):
        assert enumerate_allocations(36, desk) == [GPP_MINIMUM]
        s = GPP_MINIMUM
        for a in range(N_ACTIONS):
            assert env_step(s, a, 36, desk) == s

    def test_below_minimum(self, desk):
        with pytest.raises(ConfigurationError, match="36"):
            initial_state(30, desk)

    def test_reduced_box(self, desk):
        s = initial_state(30, desk, AllocBox.reduced())
        assert allocation_bits(s, desk) <= 30
        assert s.b_p < 3


class TestQNetwork:
    def batch(self, rng, n=16):
        s = rng.integers(0, 8, (n, 5)).astype(float)
        s2 = rng.integers(0, 8, (n, 5)).astype(float)
        return s, rng.integers(0, N_ACTIONS, n), rng.standard_normal(n), s2

    def test_shapes(self):
        net = QNetwork(np.random.default_rng(0))
        assert net.forward(np.zeros(5)).shape == (1, N_ACTIONS)
        assert [p.shape for p in net.params][:2] == [(5, 64), (64,)]

    def test_init_bounds(self):
        net = QNetwork(np.random.default_rng(0))
        assert np.max(np.abs(net.params[0])) <= 1 / math.sqrt(5)
        assert np.max(np.abs(net.params[2])) <= 1 / 8

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        net = QNetwork(rng, sizes=(5, 8, 8, N_ACTIONS))
        target = QNetwork(np.random.default_rng(2), sizes=(5, 8, 8, N_ACTIONS))
        batch = self.batch(rng)
        _, grads = net.loss_and_grad(batch, target, 0.99)
        numeric = O.finite_difference_grad(lambda: net.loss_and_grad(batch, target, 0.99)[0],
                                           net.params)
        for g, n in zip(grads, numeric):
            assert np.max(np.abs(g - n)) / max(np.max(np.abs(n)), 1e-12) < 1e-5

    def test_fixed_point_batch(self):
        rng = np.random.default_rng(3)
        net = QNetwork(rng)
        target = net.copy()
        s, a, _, s2 = self.batch(rng, 4)
        r = net.forward(s)[np.arange(4), a] - 0.9 * target.forward(s2).max(axis=1)
        loss, grads = net.loss_and_grad((s, a, r, s2), target, 0.9)
        assert loss == pytest.approx(0.0, abs=1e-20)
        assert all(np.allclose(g, 0) for g in grads)

    def test_single_sample_loss_decreases(self):
        rng = np.random.default_rng(4)
        net = QNetwork(rng)
        target = net.copy()
        batch = self.batch(rng, 1)
        losses = [q_train_step(net, target, batch, 0.99, 1e-3) for _ in range(100)]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_non_finite_loss(self):
        net = QNetwork(np.random.default_rng(0))
        s = np.zeros((1, 5))
        with pytest.raises(TrainingError):
            q_train_step(net, net.copy(), (s, np.array([0]), np.array([np.nan]), s))


class TestExploration:
    def test_greedy(self):
        net = QNetwork(np.random.default_rng(0))
        s = (2, 0, 0, 3, 2)
        best = int(np.argmax(net.forward(s)[0]))
        rng = np.random.default_rng(1)
        assert all(epsilon_greedy(net, s, 0.0, rng) == best for _ in range(20))

    def test_uniform(self):
        net = QNetwork(np.random.default_rng(0))
        rng = np.random.default_rng(2)
        n = 10_000
        counts = np.bincount([epsilon_greedy(net, (2, 0, 0, 3, 2), 1.0, rng) for _ in range(n)],
                             minlength=N_ACTIONS)
        p = 1 / N_ACTIONS
        assert np.all(np.abs(counts - n * p) <= 3 * math.sqrt(n * p * (1 - p)))

    def test_deterministic(self):
        net = QNetwork(np.random.default_rng(0))
        a = [epsilon_greedy(net, (2, 0, 0, 3, 2), 0.5, np.random.default_rng(7))
             for _ in range(3)]
        assert len(set(a)) == 1

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            epsilon_greedy(QNetwork(np.random.default_rng(0)), (0,) * 5, 1.5,
                           np.random.default_rng(0))


class TestReplay:
    def test_fifo_capacity(self):
        buf = ReplayBuffer(3)
        for i in range(5):
            buf.push((i,) * 5, 0, float(i), (i,) * 5)
        assert len(buf) == 3
        assert [x[2] for x in buf.items] == [2.0, 3.0, 4.0]

    def test_sample_size(self):
        buf = ReplayBuffer(10)
        for i in range(4):
            buf.push((i,) * 5, i, 0.0, (i,) * 5)
        s, a, r, s2 = buf.sample(128, np.random.default_rng(0))
        assert s.shape == (4, 5)
        assert sorted(a.tolist()) == [0, 1, 2, 3]


def test_action_table():
    assert len(ACTIONS) == 9
    assert ACTIONS[-1] == (None, 0)


@pytest.fixture(scope="module")
def evaluator(desk):
    return RateEvaluator(desk, trials=20, seed=0)


class TestTraining:
    def test_minimum_budget_returns_minimum(self, evaluator):
        res = run_algorithm1(36, evaluator, RLHyperParams(max_steps=30), seed=0)
        assert res.best == GPP_MINIMUM

    def test_trace_and_determinism(self, evaluator, tmp_path):
        hp = RLHyperParams(max_steps=60, restarts=2)
        a = train_allocation(40, evaluator, hp, seed=3)
        b = train_allocation(40, evaluator, hp, seed=3)
        assert a.best == b.best and a.best_rate == b.best_rate
        trace = a.g_max_trace()
        assert all(y >= x for x, y in zip(trace, trace[1:]))
        assert a.best_rate >= a.baseline_rate
        assert allocation_bits(a.best) <= 40
        path = tmp_path / "trace.csv"
        write_trace(a, path)
        assert path.read_text().splitlines()[0].startswith("restart,step")

    def test_exhaustive_best(self, evaluator):
        alloc, rate, table = exhaustive_best(40, evaluator)
        assert rate == max(table.values())
        assert alloc in enumerate_allocations(40)
