"""Deep-Q-learning search over line-panel feedback-bit allocations.

The state is the allocation ``(b_lp, b_v, b_h, b_p, b_c)``.  Actions move one
of the first four components by one bit or do nothing; ``b_c`` always takes
whatever the budget leaves.  The Q-network is a small NumPy MLP trained
with plain gradient descent on the squared temporal-difference error.
"""

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .channel import ArrayConfig, ConfigurationError, DomainError, ScenarioParams
from .codebook import BitAllocation, CodebookSpec
from .evaluate import LinkBudget, draw_channels, lp_min_bits, monte_carlo

log = logging.getLogger(__name__)

COMPONENTS = ("b_lp", "b_v", "b_h", "b_p", "b_c")
ACTIONS = (("b_lp", 1), ("b_lp", -1), ("b_v", 1), ("b_v", -1), ("b_h", 1), ("b_h", -1),
           ("b_p", 1), ("b_p", -1), (None, 0))
ACTION_NAMES = ("B_LP+", "B_LP-", "B_v+", "B_v-", "B_h+", "B_h-", "B_p+", "B_p-", "B0")
N_ACTIONS = len(ACTIONS)
GPP_MINIMUM = BitAllocation(b_lp=2, b_v=0, b_h=0, b_p=3, b_c=2)


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or reward."""


# -- environment -----------------------------------------------------------------

@dataclass(frozen=True)
class AllocBox:
    """Per-component bounds of the allocation search space.

    The default lower bounds are the standard minimum settings; ``reduced``
    lowers them all to zero for budgets below the standard minimum.
    """

    minimum: BitAllocation = GPP_MINIMUM
    maximum: int = 12

    @classmethod
    def reduced(cls, maximum=12):
        return cls(BitAllocation(0, 0, 0, 0, 0), maximum)

    def contains(self, alloc):
        return all(lo <= v <= self.maximum
                   for lo, v in zip(self.minimum.as_tuple(), alloc.as_tuple()))


def allocation_bits(alloc, config=ArrayConfig(), n_beams=2):
    return CodebookSpec.for_array("lp", config, alloc, n_beams=n_beams).bits


def fill_residual(alloc, budget, config=ArrayConfig(), box=AllocBox(), n_beams=2):
    """Give ``b_c`` the largest value in ``box`` keeping the total within budget.

    Returns ``None`` when even the smallest ``b_c`` exceeds the budget.
    """
    lo = box.minimum.b_c
    if allocation_bits(alloc.replace(b_c=lo), config, n_beams) > budget:
        return None
    b_c = lo
    while b_c < box.maximum and allocation_bits(alloc.replace(b_c=b_c + 1),
                                                config, n_beams) <= budget:
        b_c += 1
    return alloc.replace(b_c=b_c)


def env_step(state, action, budget, config=ArrayConfig(), box=AllocBox(), n_beams=2):
    """Apply ``action`` (an index into ``ACTIONS``) and refill ``b_c``.

    Moves that leave the box or the budget keep the state unchanged.
    """
    name, delta = ACTIONS[action]
    if name is None:
        return state
    value = getattr(state, name) + delta
    if not getattr(box.minimum, name) <= value <= box.maximum:
        return state
    moved = state.replace(**{name: value})
    nxt = fill_residual(moved, budget, config, box, n_beams)
    return state if nxt is None else nxt


def initial_state(budget, config=ArrayConfig(), box=AllocBox(), n_beams=2):
    """Standard minimum allocation with the residual on ``b_c``.

    Under a reduced box and a budget below the standard minimum, ``b_p``,
    then ``b_lp``, then ``b_c`` are lowered one bit at a time until it fits.
    """
    s = GPP_MINIMUM
    order = ("b_p", "b_lp", "b_c")
    while allocation_bits(s, config, n_beams) > budget:
        for name in order:
            if getattr(s, name) > getattr(box.minimum, name):
                s = s.replace(**{name: getattr(s, name) - 1})
                break
        else:
            floor = allocation_bits(s, config, n_beams)
            hint = "" if floor != lp_min_bits(config, n_beams) else "; use the reduced box"
            raise ConfigurationError(
                f"budget {budget} below the minimum of {floor} bits{hint}")
    if not box.contains(s):
        raise ConfigurationError(
            f"budget {budget} below the minimum of {lp_min_bits(config, n_beams)} bits; "
            "use the reduced allocation box")
    return fill_residual(s, budget, config, box, n_beams)


def enumerate_allocations(budget, config=ArrayConfig(), box=AllocBox(), n_beams=2):
    """Every state of the search space (``b_c`` set to the residual)."""
    lo = box.minimum.as_tuple()
    out = []
    for vals in product(*(range(m, box.maximum + 1) for m in lo[:4])):
        a = fill_residual(BitAllocation(*vals, b_c=lo[4]), budget, config, box, n_beams)
        if a is not None:
            out.append(a)
    return out


def reward(g_next, g_bar, g_max, b_next, eta=1000.0):
    """Three-case reward for reaching an allocation with average rate ``g_next``.

    ``g_max`` is the best rate seen including ``g_next``; ``b_next`` is the
    ratio of consecutive total bit counts.
    """
    if g_bar <= 0 or eta <= 0:
        raise DomainError("reward needs g_bar > 0 and eta > 0")
    if g_next >= g_max:
        return eta * b_next * (1.0 + 2.0 ** (g_next - g_bar))
    if g_next >= g_bar:
        return eta * b_next * 2.0 ** (g_next - g_bar)
    arg = b_next * g_next / g_bar
    if arg <= 0:
        raise DomainError(f"log argument {arg} is not positive")
    return eta * math.log2(arg)


# -- Q-network -------------------------------------------------------------------

class QNetwork:
    """Fully connected ``5 -> 64 -> 64 -> 9`` network with ReLU hidden layers.

    Inputs are the five bit counts divided by ``input_scale``.
    """

    def __init__(self, rng, sizes=(5, 64, 64, N_ACTIONS), input_scale=8.0):
        self.sizes = tuple(sizes)
        self.input_scale = input_scale
        self.params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, fan_out))

    def copy(self):
        other = QNetwork.__new__(QNetwork)
        other.sizes, other.input_scale = self.sizes, self.input_scale
        other.params = [p.copy() for p in self.params]
        return other

    def load(self, other):
        self.params = [p.copy() for p in other.params]

    def _features(self, states):
        return np.atleast_2d(np.asarray(states, dtype=float)) / self.input_scale

    def forward(self, states, cache=False):
        x = self._features(states)
        acts = [x]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            x = x @ W + b
            if i < n_layers - 1:
                x = np.maximum(x, 0.0)
            acts.append(x)
        return (x, acts) if cache else x

    def loss_and_grad(self, batch, target, gamma):
        """Mean squared TD error of ``batch`` and its gradient w.r.t. ``params``.

        ``batch`` is ``(s, a, r, s_next)`` arrays; ``target`` supplies the
        bootstrap values and is not differentiated.
        """
        s, a, r, s2 = batch
        y = r + gamma * target.forward(s2).max(axis=1)
        q, acts = self.forward(s, cache=True)
        n = q.shape[0]
        resid = y - q[np.arange(n), a]
        loss = float(np.mean(resid**2))
        delta = np.zeros_like(q)
        delta[np.arange(n), a] = -2.0 * resid / n
        grads = [None] * len(self.params)
        for i in reversed(range(len(self.params) // 2)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[2 * i].T) * (acts[i] > 0)
        return loss, grads

    def sgd_step(self, grads, lr):
        for p, g in zip(self.params, grads):
            p -= lr * g


def q_train_step(net, target, batch, gamma=0.99, lr=1e-3):
    """One gradient-descent step on ``net``; returns the pre-step loss."""
    loss, grads = net.loss_and_grad(batch, target, gamma)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    net.sgd_step(grads, lr)
    return loss


def epsilon_greedy(net, state, eps, rng):
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if rng.random() < eps:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(net.forward(state)[0]))


class ReplayBuffer:
    """FIFO experience memory of fixed capacity."""

    def __init__(self, capacity=2000):
        self.items = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, s, a, r, s2):
        self.items.append((tuple(s), int(a), float(r), tuple(s2)))

    def sample(self, size, rng):
        idx = rng.choice(len(self.items), size=min(size, len(self.items)), replace=False)
        rows = [self.items[i] for i in idx]
        return (np.array([x[0] for x in rows], dtype=float), np.array([x[1] for x in rows]),
                np.array([x[2] for x in rows]), np.array([x[3] for x in rows], dtype=float))


# -- Algorithm 1 -------------------------------------------------------------------

@dataclass(frozen=True)
class RLHyperParams:
    eta: float = 1000.0
    batch_size: int = 128
    memory: int = 2000
    gamma: float = 0.99
    lr: float = 1e-3
    eps_start: float = 1.0
    eps_decay: float = 0.995
    eps_min: float = 0.05
    max_steps: int = 2000
    patience: int = 300
    target_every: int = 1
    train_trials: int = 200
    report_trials: int = 1000
    hidden: int = 64
    reduced: bool = False
    restarts: int = 4

    def train_target(self, r):
        """Reward as seen by the Q-network: ``r / eta - 1``.

        A constant shift leaves the optimal policy of a continuing discounted
        task unchanged; centring keeps mediocre states from looking attractive
        to an untrained network.
        """
        return r / self.eta - 1.0


class RateEvaluator:
    """Cached Monte-Carlo average sum-rate of line-panel allocations.

    All allocations are evaluated on the same pre-drawn channels.
    """

    def __init__(self, config=ArrayConfig(), scenario=ScenarioParams(), trials=200, seed=0,
                 link=LinkBudget(), threads=1, n_beams=2, amplitude_style="extended"):
        self.config, self.scenario, self.link = config, scenario, link
        self.amplitude_style = amplitude_style
        self.trials, self.seed, self.threads, self.n_beams = trials, seed, threads, n_beams
        self.channels = draw_channels(config, scenario, trials, seed)
        self.cache = {}

    def report(self, alloc):
        if alloc not in self.cache:
            spec = CodebookSpec.for_array("lp", self.config, alloc, n_beams=self.n_beams,
                                          amplitude_style=self.amplitude_style)
            self.cache[alloc] = monte_carlo(spec, self.config, self.scenario, self.trials,
                                            self.seed, self.link, self.threads, self.channels,
                                            "lp-rl")
        return self.cache[alloc]

    def __call__(self, alloc):
        return self.report(alloc).mean


@dataclass
class TrainingResult:
    best: BitAllocation
    best_rate: float
    baseline: BitAllocation
    baseline_rate: float
    budget: int
    trace: list = field(default_factory=list)
    steps: int = 0

    def g_max_trace(self):
        return [row["G_max"] for row in self.trace]

    def as_record(self):
        return {"budget": self.budget, "best": self.best.as_dict(),
                "best_rate": self.best_rate, "baseline": self.baseline.as_dict(),
                "baseline_rate": self.baseline_rate, "steps": self.steps}


TRACE_FIELDS = ("restart", "step", "state", "action", "reward", "G", "G_max", "epsilon", "loss")


def write_trace(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        w.writeheader()
        for row in result.trace:
            w.writerow({k: row.get(k, 0) for k in TRACE_FIELDS})


def run_algorithm1(budget, evaluator, hp=RLHyperParams(), seed=0, n_beams=2):
    """Search allocations for ``budget`` with deep Q-learning.

    ``evaluator`` maps a ``BitAllocation`` to its average sum-rate.  Returns
    the best allocation seen together with the per-step trace.
    """
    config = getattr(evaluator, "config", ArrayConfig())
    box = AllocBox.reduced() if hp.reduced else AllocBox()
    rng = np.random.default_rng(np.append(seed, 1))
    s0 = initial_state(budget, config, box, n_beams)
    g_bar = evaluator(s0)
    if g_bar <= 0:
        raise TrainingError("baseline allocation has zero sum-rate")
    sizes = (5, hp.hidden, hp.hidden, N_ACTIONS)
    net = QNetwork(rng, sizes)
    target = net.copy()
    memory = ReplayBuffer(hp.memory)

    s, best, g_max = s0, s0, g_bar
    eps, stale = hp.eps_start, 0
    bits = lambda a: allocation_bits(a, config, n_beams)  # noqa: E731
    trace = []
    step = 0
    for step in range(1, hp.max_steps + 1):
        a = epsilon_greedy(net, s.as_tuple(), eps, rng)
        s_next = env_step(s, a, budget, config, box, n_beams)
        g = evaluator(s_next)
        r = reward(g, g_bar, max(g_max, g), bits(s_next) / bits(s), hp.eta)
        if not math.isfinite(r):
            raise TrainingError(f"non-finite reward at step {step}")
        memory.push(s.as_tuple(), a, hp.train_target(r), s_next.as_tuple())
        loss = q_train_step(net, target, memory.sample(hp.batch_size, rng), hp.gamma, hp.lr)

        if g > g_max:
            g_max, best, stale = g, s_next, 0
            s_next = s0
        else:
            stale += 1
            if g < g_bar / 2:
                s_next = s0
        if step % hp.target_every == 0:
            target.load(net)
        trace.append({"step": step, "state": "-".join(map(str, s.as_tuple())),
                      "action": ACTION_NAMES[a], "reward": r, "G": g, "G_max": g_max,
                      "epsilon": eps, "loss": loss})
        s = s_next
        eps = max(hp.eps_min, eps * hp.eps_decay)
        if stale >= hp.patience:
            break
    log.info("stopped after %d steps; best %s with %.4f", step, best, g_max)
    return TrainingResult(best, g_max, s0, g_bar, budget, trace, step)


def train_allocation(budget, evaluator, hp=RLHyperParams(), seed=0, n_beams=2):
    """Best of ``hp.restarts`` independent runs of ``run_algorithm1``.

    Runs share the evaluator cache.  The merged trace carries a ``restart``
    column and a ``G_max`` running over all runs.
    """
    if hp.restarts < 1:
        raise ValueError("restarts must be >= 1")
    best, trace, steps = None, [], 0
    for k in range(hp.restarts):
        res = run_algorithm1(budget, evaluator, hp, seed=[seed, k], n_beams=n_beams)
        if best is None or res.best_rate > best.best_rate:
            best = res
        running = trace[-1]["G_max"] if trace else -math.inf
        for row in res.trace:
            running = max(running, row["G_max"])
            trace.append({**row, "restart": k, "G_max": running})
        steps += res.steps
    return TrainingResult(best.best, best.best_rate, best.baseline, best.baseline_rate,
                          budget, trace, steps)


def exhaustive_best(budget, evaluator, box=AllocBox(), n_beams=2):
    """Best allocation over the whole search space; ties keep the first found."""
    config = getattr(evaluator, "config", ArrayConfig())
    allocs = enumerate_allocations(budget, config, box, n_beams)
    rates = [evaluator(a) for a in allocs]
    i = int(np.argmax(rates))
    return allocs[i], rates[i], dict(zip(allocs, rates))
