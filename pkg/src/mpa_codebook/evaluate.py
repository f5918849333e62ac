"""Zero-forcing precoding and Monte-Carlo sum-rate evaluation.

Every trial draws its users from ``np.random.default_rng([seed, trial])`` so
the same channels are seen by every scheme (common random numbers) and the
result does not depend on the number of worker threads.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ArrayConfig, ConfigurationError, ScenarioParams, generate_channels
from .codebook import BitAllocation, CodebookSpec, lp_bits, sp_bits
from .quantizer import DEFAULT_EVAL_CAP, quantize_array

log = logging.getLogger(__name__)

SCHEMES = ("dft", "sp", "lp-3gpp", "lp-rl", "perfect")
MAX_ROTATION_BITS = 6
Z_95 = 1.96
ZF_LOADING = 1e-10
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power (dBm), bandwidth (Hz) and receiver noise figure (dB)."""

    tx_power_dbm: float = 10.0
    bandwidth: float = 4e6
    noise_figure_db: float = 3.0

    @property
    def noise_dbm(self):
        return -174.0 + 10.0 * math.log10(self.bandwidth) + self.noise_figure_db

    @property
    def tx_power_mw(self):
        return 10.0 ** (self.tx_power_dbm / 10.0)

    @property
    def noise_mw(self):
        return 10.0 ** (self.noise_dbm / 10.0)


@dataclass
class SumRateReport:
    scheme: str
    alloc: BitAllocation | None
    mean: float
    trials: int
    half_width: float
    std: float = 0.0
    budget: int | None = None
    panel_gap: float | None = None
    regularized: int = 0
    rates: np.ndarray | None = field(default=None, repr=False)

    def row(self, seed):
        return {"scheme": self.scheme, "B": self.budget, "d_M": self.panel_gap,
                "mean": f"{self.mean:.6g}", "half_width": f"{self.half_width:.6g}",
                "trials": self.trials, "seed": seed,
                "alloc": "" if self.alloc is None else "-".join(map(str, self.alloc.as_tuple()))}


# -- precoding -------------------------------------------------------------------

def zf_precoder(Hq, power=1.0):
    """Zero-forcing precoder for quantized channels ``Hq`` (ports x users).

    Columns of ``Hq (Hq^H Hq)^-1`` are normalized and scaled to
    ``sqrt(power / K)``.  Returns ``(W, regularized)``; an ill-conditioned
    Gram matrix is loaded with ``1e-10`` on its diagonal and flagged.
    """
    Hq = np.asarray(Hq, dtype=complex)
    n_ports, K = Hq.shape
    if K > n_ports:
        raise ConfigurationError(f"{K} users exceed {n_ports} ports")
    gram = Hq.conj().T @ Hq
    regularized = not np.isfinite(np.linalg.cond(gram)) or np.linalg.cond(gram) > _COND_LIMIT
    if regularized:
        warnings.warn("rank-deficient quantized channels; using diagonal loading",
                      RuntimeWarning, stacklevel=2)
        gram = gram + ZF_LOADING * np.eye(K)
    W = Hq @ np.linalg.inv(gram)
    W /= np.linalg.norm(W, axis=0, keepdims=True)
    return W * math.sqrt(power / K), regularized


def sum_rate(H, W, link=LinkBudget()):
    """Sum of ``log2(1 + SINR_k)``; ``H`` and ``W`` are ports x users.

    ``W`` carries the transmit power in mW, so a zero precoder gives 0.
    """
    G = np.abs(np.asarray(H).conj().T @ np.asarray(W)) ** 2
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return float(np.sum(np.log2(1.0 + signal / (interference + link.noise_mw))))


# -- schemes -----------------------------------------------------------------------

def sp_min_bits(config, n_beams=2):
    return sp_bits(config.ports_v * config.cols, n_beams, BitAllocation(b_lp=0))


def lp_min_bits(config, n_beams=2):
    return lp_bits(config.n_panels_h, config.ports_v * config.n_elems_h, n_beams,
                   BitAllocation())


def _split_rotation_bits(extra, ports_v, cap=MAX_ROTATION_BITS):
    if ports_v > 1:
        b_v = min(extra // 2, cap)
        return b_v, min(extra - b_v, cap)
    return 0, min(extra, cap)


def sp_allocation(budget, config, n_beams=2, cap=MAX_ROTATION_BITS):
    """Single-panel allocation: B_p=3, B_c=2 and the remaining bits on rotations.

    Rotations stop at ``cap`` bits per dimension; bits beyond that stay unused.
    A one-port vertical dimension gets no rotation bits.
    """
    extra = budget - sp_min_bits(config, n_beams)
    if extra < 0:
        raise ConfigurationError(
            f"budget {budget} below the single-panel minimum {sp_min_bits(config, n_beams)}")
    b_v, b_h = _split_rotation_bits(extra, config.ports_v, cap)
    return BitAllocation(b_lp=0, b_v=b_v, b_h=b_h)


def lp_3gpp_allocation(budget, config, n_beams=2, cap=MAX_ROTATION_BITS):
    """Line-panel allocation with minimum settings and leftovers on rotations."""
    base = BitAllocation()
    minimum = lp_min_bits(config, n_beams)
    if budget < minimum:
        raise ConfigurationError(f"budget {budget} below the line-panel minimum {minimum}")
    extra = (budget - minimum) // config.n_panels_h
    b_v, b_h = _split_rotation_bits(extra, config.ports_v, cap)
    return base.replace(b_v=b_v, b_h=b_h)


def scheme_spec(scheme, budget, config, alloc=None, n_beams=2, **kw):
    """``CodebookSpec`` of a named scheme at feedback budget ``budget``.

    ``perfect`` returns ``None`` (the true channel directions are fed back).
    """
    if scheme == "perfect":
        return None
    if scheme == "dft":
        return CodebookSpec.for_array("dft", config, total_bits=budget)
    if scheme == "sp":
        return CodebookSpec.for_array("sp", config, sp_allocation(budget, config, n_beams),
                                      n_beams=n_beams, **kw)
    if scheme == "lp-3gpp":
        return CodebookSpec.for_array("lp", config, lp_3gpp_allocation(budget, config, n_beams),
                                      n_beams=n_beams, **kw)
    if scheme in ("lp-rl", "lp"):
        if alloc is None:
            raise ConfigurationError(f"scheme {scheme!r} needs an explicit allocation")
        spec = CodebookSpec.for_array("lp", config, alloc, n_beams=n_beams, **kw)
        if budget is not None and spec.bits > budget:
            raise ConfigurationError(f"allocation uses {spec.bits} bits > budget {budget}")
        return spec
    raise ConfigurationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def panel_gap_config(config, d_m, unit="wavelength"):
    """Copy of ``config`` with the panel gap set to ``d_m`` wavelengths.

    ``unit="spacing"`` measures ``d_m`` in horizontal element spacings
    instead.  The vertical gap follows when there are several panel rows.
    """
    if unit == "wavelength":
        gap = d_m * config.wavelength
    elif unit == "spacing":
        gap = d_m * config.elem_spacing_h
    else:
        raise ConfigurationError(f"unknown panel gap unit {unit!r}")
    kw = {"panel_gap_h": gap}
    if config.n_panels_v > 1:
        kw["panel_gap_v"] = gap
    return replace(config, **kw)


# -- Monte Carlo ---------------------------------------------------------------------

def draw_channels(config, scenario, trials, seed, start=0):
    """Channels of trials ``start .. start + trials - 1``, shape (trials, K, ports)."""
    return np.stack([generate_channels(config, scenario, np.random.default_rng([seed, t]))
                     for t in range(start, start + trials)])


def _trial_rates(spec, H, config, link, eval_cap, codebook):
    n_tr, K, n_ports = H.shape
    flat = H.reshape(n_tr * K, n_ports)
    if spec is None:
        directions = flat / np.linalg.norm(flat, axis=1, keepdims=True)
    else:
        directions = quantize_array(spec, flat, config, eval_cap, codebook).codewords
    directions = directions.reshape(n_tr, K, n_ports)
    rates = np.empty(n_tr)
    flags = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for t in range(n_tr):
            W, reg = zf_precoder(directions[t].T, link.tx_power_mw)
            rates[t] = sum_rate(H[t].T, W, link)
            flags += reg
    return rates, flags


def monte_carlo(spec, config=ArrayConfig(), scenario=ScenarioParams(), trials=1000, seed=0,
                link=LinkBudget(), threads=1, channels=None, scheme=None,
                eval_cap=DEFAULT_EVAL_CAP):
    """Average ZF sum-rate of a codebook (``spec=None`` for perfect CSI).

    ``channels`` may pass pre-drawn trials (as from ``draw_channels``) to reuse
    them across calls.  Returns a ``SumRateReport``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    H = channels if channels is not None else draw_channels(config, scenario, trials, seed)
    H = H[:trials]
    codebook = None if spec is None else spec.build()
    chunks = np.array_split(np.arange(H.shape[0]), max(1, min(threads, H.shape[0])))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(
                lambda idx: _trial_rates(spec, H[idx], config, link, eval_cap, codebook),
                chunks))
    else:
        parts = [_trial_rates(spec, H, config, link, eval_cap, codebook)]
    rates = np.concatenate([p[0] for p in parts])
    regularized = sum(p[1] for p in parts)
    if regularized:
        log.warning("%d trials needed a regularized ZF precoder", regularized)
    mean = math.fsum(rates) / rates.size
    std = float(np.std(rates, ddof=1)) if rates.size > 1 else 0.0
    name = scheme or ("perfect" if spec is None else spec.family)
    return SumRateReport(name, None if spec is None else spec.alloc, mean, rates.size,
                         Z_95 * std / math.sqrt(rates.size), std,
                         None if spec is None else spec.bits, None, regularized, rates)


def evaluate_scheme(scheme, budget, config=ArrayConfig(), scenario=ScenarioParams(),
                    trials=1000, seed=0, link=LinkBudget(), threads=1, alloc=None,
                    channels=None, panel_gap=None, **kw):
    """``monte_carlo`` for a named scheme at a feedback budget."""
    spec = scheme_spec(scheme, budget, config, alloc, **kw)
    rep = monte_carlo(spec, config, scenario, trials, seed, link, threads, channels, scheme)
    rep.budget = budget
    rep.panel_gap = panel_gap
    return rep
