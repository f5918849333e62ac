"""Pure NumPy implementation of the codeword search kernels.

This module is the reference backend. The compiled ``_kernels`` extension
implements the same functions with the same enumeration order and the same
tie rule, and is preferred when it is importable (see ``kernels.py``).

Enumeration of one greedy search, per channel::

    for hyp in range(n_hyp):              # beam group and rotation
        for ref in range(n_slot):         # slot whose coefficient is fixed to 1
            for step in range(n_slot - 1):    # remaining slots, ascending order
                for a in range(n_alpha):      # coefficient alphabet entry

Each ``(hyp, ref, step, a)`` is one candidate codeword; the flat candidate
index follows that nesting.  A candidate's combining vector holds 1 at
``ref``, the greedy choices made at earlier steps, ``alphabet[a]`` at the
current slot and zero at the slots not reached yet.  Its score is
``|g^H x|^2 / |x|^2`` with ``g`` the beam projections of the channel.
"""

import numpy as np

#: Squared scores within this relative distance of the maximum count as ties.
TIE_RTOL = 1e-9

_CHUNK_ELEMS = 1 << 22


def slot_of(ref, step):
    """Slot filled at greedy ``step`` when ``ref`` is the reference slot."""
    return step if step < ref else step + 1


def first_within(values, rtol=TIE_RTOL, axis=-1):
    """Index of the first entry within ``rtol`` of the maximum along ``axis``."""
    top = values.max(axis=axis, keepdims=True)
    return np.argmax(values >= top * (1.0 - rtol), axis=axis)


def greedy_search(proj, alphabet, rtol=TIE_RTOL):
    """Greedy combining-coefficient search over all beam hypotheses.

    Parameters
    ----------
    proj : complex ndarray, shape (n_ch, n_hyp, n_slot)
        Projections of each channel onto the beams of every hypothesis.
    alphabet : complex ndarray, shape (n_alpha,)
        Candidate values of one combining coefficient.
    rtol : float
        Relative tie tolerance on squared scores.

    Returns
    -------
    best : int64 ndarray, shape (n_ch, 4)
        ``(hyp, ref, step, a)`` of the winning candidate.
    score2 : float64 ndarray, shape (n_ch,)
        Squared normalized correlation of the winner.
    choice : int64 ndarray, shape (n_ch, n_slot)
        Alphabet index per slot of the winner; -1 for the reference slot and
        for slots left at zero.
    """
    proj = np.ascontiguousarray(proj, dtype=np.complex128)
    alphabet = np.ascontiguousarray(alphabet, dtype=np.complex128)
    n_ch, n_hyp, n_slot = proj.shape
    if n_slot < 2:
        raise ValueError("need at least two combining slots")
    per_ch = n_hyp * n_slot * (n_slot - 1) * alphabet.size
    chunk = max(1, _CHUNK_ELEMS // max(per_ch, 1))

    best = np.empty((n_ch, 4), dtype=np.int64)
    score2 = np.empty(n_ch, dtype=np.float64)
    choice = np.empty((n_ch, n_slot), dtype=np.int64)
    for lo in range(0, n_ch, chunk):
        hi = min(n_ch, lo + chunk)
        b, s, c = _search_chunk(proj[lo:hi], alphabet, rtol)
        best[lo:hi], score2[lo:hi], choice[lo:hi] = b, s, c
    return best, score2, choice


def _search_chunk(proj, alphabet, rtol):
    n_ch, n_hyp, n_slot = proj.shape
    n_steps = n_slot - 1
    n_a = alphabet.size
    mag2 = alphabet.real**2 + alphabet.imag**2
    gconj = np.conj(proj)

    scores = np.empty((n_ch, n_hyp, n_slot, n_steps, n_a))
    chosen = np.empty((n_ch, n_hyp, n_slot, n_steps), dtype=np.int64)
    for ref in range(n_slot):
        acc = gconj[:, :, ref].copy()
        norm = np.ones((n_ch, n_hyp))
        for step in range(n_steps):
            j = slot_of(ref, step)
            trial = acc[..., None] + gconj[:, :, j, None] * alphabet
            s2 = (trial.real**2 + trial.imag**2) / (norm[..., None] + mag2)
            scores[:, :, ref, step] = s2
            pick = first_within(s2, rtol)
            chosen[:, :, ref, step] = pick
            acc = np.take_along_axis(trial, pick[..., None], axis=-1)[..., 0]
            norm = norm + mag2[pick]

    flat = first_within(scores.reshape(n_ch, -1), rtol)
    hyp, ref, step, a = np.unravel_index(flat, (n_hyp, n_slot, n_steps, n_a))
    best = np.stack([hyp, ref, step, a], axis=1).astype(np.int64)
    score2 = scores.reshape(n_ch, -1)[np.arange(n_ch), flat]

    choice = np.full((n_ch, n_slot), -1, dtype=np.int64)
    for k in range(n_ch):
        r, t = int(ref[k]), int(step[k])
        for prev in range(t):
            choice[k, slot_of(r, prev)] = chosen[k, hyp[k], r, prev]
        choice[k, slot_of(r, t)] = a[k]
    return best, score2, choice


def phase_search(base, rotated, phases, rtol=TIE_RTOL):
    """Sequential per-panel co-phasing search.

    Parameters
    ----------
    base : complex ndarray, shape (n_ch,)
        Correlation of the channel with the reference panel.
    rotated : complex ndarray, shape (n_ch, n_panel - 1)
        Correlations with the remaining panels before any phase rotation.
    phases : complex ndarray, shape (n_phase,)
        Unit-modulus rotations ``exp(j theta)`` in alphabet order.

    Returns
    -------
    best : int64 ndarray, shape (n_ch, 2)
        ``(panel, phase)`` of the winning candidate, panel counted from 0
        among the rotated panels.
    score2 : float64 ndarray, shape (n_ch,)
        Squared magnitude of the winning total correlation.
    picks : int64 ndarray, shape (n_ch, n_panel - 1)
        Phase index per rotated panel of the winner (0 for panels after the
        winning one).
    """
    n_ch, n_rot = rotated.shape
    n_ph = phases.size
    # Panels not reached yet keep phase index 0.
    acc = base + rotated.sum(axis=1)
    scores = np.empty((n_ch, n_rot, n_ph))
    chosen = np.zeros((n_ch, n_rot), dtype=np.int64)
    for m in range(n_rot):
        trial = (acc - rotated[:, m])[:, None] + rotated[:, m, None] * phases
        s2 = trial.real**2 + trial.imag**2
        scores[:, m] = s2
        pick = first_within(s2, rtol)
        chosen[:, m] = pick
        acc = trial[np.arange(n_ch), pick]
    flat = first_within(scores.reshape(n_ch, -1), rtol)
    panel, ph = np.unravel_index(flat, (n_rot, n_ph))
    picks = np.zeros((n_ch, n_rot), dtype=np.int64)
    for k in range(n_ch):
        picks[k, : panel[k]] = chosen[k, : panel[k]]
        picks[k, panel[k]] = ph[k]
    best = np.stack([panel, ph], axis=1).astype(np.int64)
    return best, scores.reshape(n_ch, -1)[np.arange(n_ch), flat], picks
