"""Channel quantization: pick the codeword with the largest ``|h^H c|``.

All searches are exact over their enumeration.  Scores within a relative
``TIE_RTOL`` of the best are ties and the lowest enumeration index wins.
Batch functions take one channel per row; the single-channel wrappers
(``quantize_slp``, ``quantize_sp``, ``quantize_lp``, ``quantize_dft``)
return a ``QuantizationResult``.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import line_panel_order
from .codebook import (Codeword, DFTCodebook, LinePanelCodebook, LPProvenance,
                       Provenance, TypeIICodebook, assemble_lp)
from .kernels import TIE_RTOL

DEFAULT_EVAL_CAP = 1 << 26
_FFT_1D_MAX = 1 << 16
_FFT_2D_MAX = 1 << 16


class SearchBudgetExceeded(RuntimeError):
    """The exact search would evaluate more codewords than allowed."""


class EmptyCodebookError(ValueError):
    pass


@dataclass(frozen=True)
class QuantizationResult:
    """Outcome of quantizing one channel.

    ``panel_indices`` holds the flat candidate index per (line-)panel,
    ``pa_index`` the index in the co-phasing search (``None`` without one),
    ``score`` the alignment ``|h^H c| / (|h| |c|)`` and ``candidates`` the
    number of codewords in the searched enumeration.
    """

    codeword: np.ndarray
    panel_indices: tuple
    pa_index: int | None
    score: float
    candidates: int
    provenance: object = None


@dataclass
class BatchResult:
    codewords: np.ndarray
    scores: np.ndarray
    indices: np.ndarray
    candidates: int
    provenance: list | None = None
    pa_indices: np.ndarray | None = None
    panel_indices: np.ndarray | None = None


def _alignment(score2, H):
    norms = np.linalg.norm(H, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.sqrt(score2) / norms
    return np.clip(np.nan_to_num(s), 0.0, 1.0)


# -- Type-II -------------------------------------------------------------------

def typeii_search(cb, H, eval_cap=DEFAULT_EVAL_CAP, with_provenance=False):
    """Search ``cb`` (a ``TypeIICodebook``) for each row of ``H``."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.shape[1] != cb.dim:
        raise ValueError(f"channel slice length {H.shape[1]} != codeword length {cb.dim}")
    if len(cb) == 0:
        raise EmptyCodebookError("empty codebook")
    # A one-port dimension makes its rotations identical; the duplicates sit
    # later in the enumeration and can never win, so only rotation 0 is kept.
    rv = np.arange(cb.o_v) if cb.ports_v > 1 else np.zeros(1, dtype=int)
    rh = np.arange(cb.o_h) if cb.ports_h > 1 else np.zeros(1, dtype=int)
    per_channel = cb.n_ports * rv.size * rh.size * cb.n_slot * (cb.n_slot - 1) * cb.n_alpha
    if per_channel > eval_cap:
        raise SearchBudgetExceeded(
            f"Type-II search needs {per_channel} evaluations per channel (cap {eval_cap})")

    N, L = cb.n_ports, cb.n_beams
    grid = cb.beam_grid()[np.ix_(rv, rh)]            # (nv, nh, beam, entry)
    hA, hB = H[:, :N], H[:, N:]
    pA = np.einsum("vhbe,ce->cvhb", grid.conj(), hA)
    pB = np.einsum("vhbe,ce->cvhb", grid.conj(), hB)
    starts = (np.arange(N)[:, None] + np.arange(L)[None, :]) % N      # (start, i)
    gA = pA[..., starts]                              # (c, nv, nh, start, i)
    gB = pB[..., starts]
    g = np.concatenate([gA, gB], axis=-1)             # slots: pol-major, beam-minor
    g = np.moveaxis(g, 3, 1).reshape(H.shape[0], -1, cb.n_slot)

    best, score2, choice = kernels.greedy_search(g, cb.alphabet)

    hyp_red = best[:, 0]
    start, rem = np.divmod(hyp_red, rv.size * rh.size)
    iv, ih = np.divmod(rem, rh.size)
    q_v, q_h = rv[iv], rh[ih]
    hyp_full = (start * cb.o_v + q_v) * cb.o_h + q_h
    ref, step, a = best[:, 1], best[:, 2], best[:, 3]
    index = ((hyp_full * cb.n_slot + ref) * (cb.n_slot - 1) + step) * cb.n_alpha + a

    x = np.where(choice >= 0, cb.alphabet[np.maximum(choice, 0)], 0.0).astype(complex)
    x[np.arange(len(ref)), ref] = 1.0
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    beams = cb.beam_grid()[q_v, q_h][np.arange(len(start))[:, None], starts[start]]
    vec = np.concatenate([np.einsum("cie,ci->ce", beams, x[:, :L]),
                          np.einsum("cie,ci->ce", beams, x[:, L:])], axis=1)

    prov = None
    if with_provenance:
        prov = [Provenance(int(s), int(v), int(h), int(r), tuple(int(c) for c in ch))
                for s, v, h, r, ch in zip(start, q_v, q_h, ref, choice)]
    return BatchResult(vec, _alignment(score2, H), index.astype(np.int64), len(cb), prov)


def quantize_slp(h_slice, codebook, eval_cap=DEFAULT_EVAL_CAP):
    """Best line-panel codeword for one channel slice: ``(index, Codeword)``."""
    res = typeii_search(codebook, h_slice, eval_cap, with_provenance=True)
    idx = int(res.indices[0])
    return idx, Codeword(res.codewords[0], res.provenance[0], idx)


def argmax_stream(h, stream, rtol=TIE_RTOL):
    """Reference argmax over an explicit ``(index, Codeword)`` stream.

    Uses the same tie rule as the batch search: the first candidate whose
    squared score is within ``rtol`` of the maximum wins.  Only candidates
    still within tolerance of the running maximum are retained.
    """
    top = -1.0
    kept = []
    for i, c in stream:
        s = abs(np.vdot(c.vector, h)) ** 2
        if s > top:
            top = s
            kept = [k for k in kept if k[0] >= top * (1 - rtol)]
        if s >= top * (1 - rtol):
            kept.append((s, i, c))
    if not kept:
        raise EmptyCodebookError("empty codebook stream")
    _, i, c = kept[0]
    return i, c


# -- line-panel ------------------------------------------------------------------

def lp_search(cb, H, eval_cap=DEFAULT_EVAL_CAP, with_provenance=False):
    """Two-stage line-panel search; rows of ``H`` are panel-major channels."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    n_ch = H.shape[0]
    M, d = cb.n_panels, cb.slp.dim
    if H.shape[1] != M * d:
        raise ValueError(f"channel length {H.shape[1]} != {M} panels x {d}")
    slices = H.reshape(n_ch * M, d)
    stage1 = typeii_search(cb.slp, slices, eval_cap, with_provenance)
    hbar = stage1.codewords.reshape(n_ch, M, d)
    corr = np.einsum("cmd,cmd->cm", slices.reshape(n_ch, M, d).conj(), hbar)

    if M == 1:
        picks = np.zeros((n_ch, 0), dtype=np.int64)
        pa_index = np.full(n_ch, -1, dtype=np.int64)
        total = corr[:, 0]
    elif cb.pa_search == "joint":
        pa_index, picks, total = _joint_phase_search(corr, cb.phases)
    else:
        best, _, picks = kernels.phase_search(corr[:, 0], corr[:, 1:], cb.phases)
        pa_index = best[:, 0] * cb.phases.size + best[:, 1]
        total = corr[:, 0] + np.einsum("cm,cm->c", corr[:, 1:], cb.phases[picks])

    factors = np.concatenate([np.ones((n_ch, 1)), cb.phases[picks]], axis=1)
    vec = (hbar * factors[:, :, None]).reshape(n_ch, M * d) / np.sqrt(M)
    score2 = np.abs(total) ** 2 / M
    candidates = M * len(cb.slp) + cb.pa_size
    prov = None
    if with_provenance:
        prov = [LPProvenance(tuple(stage1.provenance[k * M:(k + 1) * M]),
                             (0,) + tuple(int(p) for p in picks[k]))
                for k in range(n_ch)]
    return BatchResult(vec, _alignment(score2, H), pa_index, candidates, prov,
                       pa_indices=pa_index,
                       panel_indices=stage1.indices.reshape(n_ch, M))


def _joint_phase_search(corr, phases):
    """Exhaustive search over all panel phase combinations (diagnostics)."""
    n_ch, M = corr.shape
    combos = np.array(list(itertools.product(range(phases.size), repeat=M - 1)))
    factors = phases[combos]                                   # (n_combo, M-1)
    total = corr[:, :1] + corr[:, 1:] @ factors.T              # (n_ch, n_combo)
    s2 = np.abs(total) ** 2
    idx = np.argmax(s2 >= s2.max(axis=1, keepdims=True) * (1 - TIE_RTOL), axis=1)
    return idx.astype(np.int64), combos[idx], total[np.arange(n_ch), idx]


def quantize_lp(h, spec, eval_cap=DEFAULT_EVAL_CAP):
    """Quantize one panel-major channel with a line-panel codebook."""
    cb = spec if isinstance(spec, LinePanelCodebook) else spec.build()
    res = lp_search(cb, h, eval_cap, with_provenance=True)
    pa = int(res.pa_indices[0])
    return QuantizationResult(res.codewords[0], tuple(int(i) for i in res.panel_indices[0]),
                              None if pa < 0 else pa, float(res.scores[0]),
                              res.candidates, res.provenance[0])


def quantize_sp(h, spec, eval_cap=DEFAULT_EVAL_CAP):
    cb = spec if isinstance(spec, TypeIICodebook) else spec.build()
    res = typeii_search(cb, h, eval_cap, with_provenance=True)
    return QuantizationResult(res.codewords[0], (int(res.indices[0]),), None,
                              float(res.scores[0]), res.candidates, res.provenance[0])


# -- DFT grid --------------------------------------------------------------------

def _first_within(values):
    return int(np.argmax(values >= values.max() * (1 - TIE_RTOL)))


def _fold(y, period):
    """Sum entries whose indices agree modulo ``period`` (DFT aliasing)."""
    out = np.zeros(period, dtype=complex)
    np.add.at(out, np.arange(y.size) % period, y)
    return out


def _peak_grid_1d(y, Q):
    """Exact grid argmax of ``|sum_n y_n exp(-j 2 pi t n / Q)|^2`` over ``t``.

    Every grid maximizer lies next to a critical point of the continuous
    periodogram, and those are roots of a polynomial of degree ``2(n-1)``.
    """
    n = y.size
    if n == 1 or not np.any(y):
        return 0, float(np.abs(y.sum()) ** 2)
    r = np.correlate(y, y, mode="full")        # r[k + n - 1] = sum y[i+k] conj(y[i])
    k = np.arange(-(n - 1), n)
    coeffs = (k * r)[::-1]                      # highest power first
    nz = np.flatnonzero(np.abs(coeffs) > 0)
    roots = np.roots(coeffs[nz[0]:]) if nz.size and nz[0] < coeffs.size - 1 else np.array([])
    freqs = np.mod(-np.angle(roots) / (2 * np.pi), 1.0) if roots.size else np.zeros(0)
    base = np.floor(freqs * Q).astype(np.int64)
    near = (base[:, None] + np.arange(-1, 3)[None, :]).ravel()
    cand = np.unique(np.mod(np.append(near, 0), Q))
    phase = np.exp(-2j * np.pi * np.outer(cand, np.arange(n)) / Q)
    vals = np.abs(phase @ y) ** 2
    order = np.argsort(cand, kind="stable")
    cand, vals = cand[order], vals[order]
    i = _first_within(vals)
    return int(cand[i]), float(vals[i])


def _line_search(y, Q):
    if Q <= _FFT_1D_MAX:
        vals = np.abs(np.fft.fft(_fold(y, Q) if y.size > Q else y, n=Q)) ** 2
        t = _first_within(vals)
        return t, float(vals[t])
    return _peak_grid_1d(y, Q)


def dft_search(cb, H, eval_cap=DEFAULT_EVAL_CAP):
    """Exact search of the ``2**B`` DFT grid for each row of ``H``."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.shape[1] != cb.dim:
        raise ValueError(f"channel length {H.shape[1]} != codeword length {cb.dim}")
    nv, nh = cb.ports_v, cb.ports_h
    Y = H.reshape(H.shape[0], cb.n_pol, nh, nv).sum(axis=1)     # (c, n_h, n_v)
    tv_list = np.arange(cb.q_v) if nv > 1 else np.zeros(1, dtype=np.int64)
    exhaustive = len(cb) <= min(eval_cap, _FFT_2D_MAX)
    if not exhaustive and tv_list.size > eval_cap:
        raise SearchBudgetExceeded(
            f"DFT grid of {len(cb)} beams exceeds cap {eval_cap} and has no reduction")

    indices = np.empty(H.shape[0], dtype=np.int64)
    score2 = np.empty(H.shape[0])
    m = np.arange(nv)
    for c in range(H.shape[0]):
        if exhaustive:
            Yf = Y[c]
            if nh > cb.q_h or nv > cb.q_v:
                Yf = np.zeros((cb.q_h, cb.q_v), dtype=complex)
                np.add.at(Yf, (np.arange(nh)[:, None] % cb.q_h, m[None, :] % cb.q_v), Y[c])
            F = np.fft.fft2(Yf, s=(cb.q_h, cb.q_v))
            vals = (np.abs(F) ** 2).T.ravel()                    # index t_v * Q_h + t_h
            t = _first_within(vals)
            indices[c], score2[c] = t, vals[t]
            continue
        best_t, best_s = 0, -1.0
        per_tv = []
        for tv in tv_list:
            y = Y[c] @ np.exp(-2j * np.pi * tv * m / cb.q_v)
            th, s = _line_search(y, cb.q_h)
            per_tv.append((int(tv) * cb.q_h + th, s))
        vals = np.array([s for _, s in per_tv])
        i = _first_within(vals)
        best_t, best_s = per_tv[i]
        indices[c], score2[c] = best_t, best_s
    score2 = score2 / (nv * nh * cb.n_pol)
    t_v, t_h = np.divmod(indices, cb.q_h)
    vec = np.stack([cb.codeword(i).vector for i in indices]) if H.shape[0] else \
        np.zeros((0, cb.dim), dtype=complex)
    return BatchResult(vec, _alignment(score2, H), indices, len(cb))


def quantize_dft(h, spec_or_cb, eval_cap=DEFAULT_EVAL_CAP):
    cb = spec_or_cb if isinstance(spec_or_cb, DFTCodebook) else spec_or_cb.build()
    res = dft_search(cb, h, eval_cap)
    return QuantizationResult(res.codewords[0], (int(res.indices[0]),), None,
                              float(res.scores[0]), res.candidates,
                              divmod(int(res.indices[0]), cb.q_h))


# -- array-level entry point -----------------------------------------------------

def quantize_array(spec, H, config, eval_cap=DEFAULT_EVAL_CAP, codebook=None):
    """Quantize port-ordered channels (rows of ``H``) of ``config``.

    Returns a ``BatchResult`` whose codewords are in port order.
    """
    cb = codebook if codebook is not None else spec.build()
    H = np.atleast_2d(H)
    if spec.family == "dft":
        return dft_search(cb, H, eval_cap)
    if spec.family == "sp":
        return typeii_search(cb, H, eval_cap)
    order = line_panel_order(config)
    res = lp_search(cb, H[:, order], eval_cap)
    out = np.empty_like(res.codewords)
    out[:, order] = res.codewords
    res.codewords = out
    return res
