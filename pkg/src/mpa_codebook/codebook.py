"""Codebook families, feedback-bit budgets and search sizes.

Three families are provided:

* ``TypeIICodebook`` - oversampled 2D-DFT beam groups combined with
  quantized per-beam amplitudes and co-phases over two polarizations.  Used
  for the whole array (single-panel baseline) and for one line-panel.
* ``LinePanelCodebook`` - one ``TypeIICodebook`` per line-panel plus a
  uniform panel co-phasing alphabet.
* ``DFTCodebook`` - plain 2D oversampled DFT grid of ``2**B`` beams.

Candidate enumeration of the Type-II search (fixed, used for tie-breaking):
beam group start, vertical rotation, horizontal rotation, reference slot,
greedy step, amplitude, phase.  See ``_kernels_py`` for the greedy rule.
"""

import math
import warnings
from dataclasses import asdict, dataclass
from math import comb

import numpy as np

from .channel import ConfigurationError, DomainError

AMPLITUDE_STYLES = ("extended", "compact")


@dataclass(frozen=True)
class BitAllocation:
    """Feedback bits per codebook component."""

    b_lp: int = 2
    b_v: int = 0
    b_h: int = 0
    b_p: int = 3
    b_c: int = 2

    def __post_init__(self):
        if min(self.as_tuple()) < 0:
            raise DomainError(f"negative bit count in {self}")

    def as_tuple(self):
        return (self.b_lp, self.b_v, self.b_h, self.b_p, self.b_c)

    def as_dict(self):
        return asdict(self)

    def replace(self, **kw):
        return BitAllocation(**{**self.as_dict(), **kw})


def ceil_log2(x):
    """Exact ``ceil(log2(x))`` for a positive integer."""
    if x < 1:
        raise DomainError("ceil_log2 needs x >= 1")
    return (int(x) - 1).bit_length()


def beam_selection_bits(n_ports, n_beams):
    return ceil_log2(comb(n_ports, n_beams))


def dft_bits(n_ports, n_beams, b_v, b_h):
    """Bits for rotations plus the choice of ``n_beams`` out of ``n_ports``."""
    return b_v + b_h + beam_selection_bits(n_ports, n_beams)


def sp_bits(n_ports, n_beams, alloc):
    L2 = 2 * n_beams
    return (dft_bits(n_ports, n_beams, alloc.b_v, alloc.b_h) + ceil_log2(L2)
            + (L2 - 1) * (alloc.b_p + alloc.b_c))


def sp_search_size(n_ports, n_beams, alloc):
    L2 = 2 * n_beams
    return (L2 * n_ports * 2 ** (alloc.b_v + alloc.b_h)
            * (L2 - 1) * 2 ** (alloc.b_p + alloc.b_c))


def slp_search_size(n_ports, n_beams, alloc):
    L2 = 2 * n_beams
    return L2 * (L2 - 1) * n_ports * 2 ** (alloc.b_v + alloc.b_h + alloc.b_p + alloc.b_c)


def pa_search_size(n_panels, b_lp):
    return (n_panels - 1) * 2**b_lp


def lp_bits(n_panels, n_ports, n_beams, alloc):
    """Total line-panel feedback; ``n_ports`` counts ports of one line-panel."""
    L2 = 2 * n_beams
    per_panel = (dft_bits(n_ports, n_beams, alloc.b_v, alloc.b_h) + ceil_log2(L2)
                 + (L2 - 1) * (alloc.b_p + alloc.b_c))
    return n_panels * per_panel + (n_panels - 1) * alloc.b_lp


def lp_search_size(n_panels, n_ports, n_beams, alloc):
    return (n_panels * slp_search_size(n_ports, n_beams, alloc)
            + pa_search_size(n_panels, alloc.b_lp))


def dft_search_size(total_bits):
    return 2 ** int(total_bits)


# -- alphabets ---------------------------------------------------------------

def amplitude_alphabet(b_p, style="extended"):
    """Wideband amplitude levels addressed by ``b_p`` bits.

    ``extended`` uses all ``2**b_p`` codes: ``sqrt(2)**-k`` for
    ``k = 0..2**b_p - 2`` followed by 0.  ``compact`` keeps ``b_p`` levels
    ``sqrt(2)**-k`` for ``k = 0..b_p - 2`` followed by 0.  With no bits the
    only level is 1.
    """
    if style not in AMPLITUDE_STYLES:
        raise ConfigurationError(f"unknown amplitude style {style!r}")
    if b_p < 0:
        raise DomainError("b_p must be >= 0")
    if b_p == 0:
        return np.ones(1)
    n_nonzero = 2**b_p - 1 if style == "extended" else max(b_p - 1, 1)
    return np.append(np.sqrt(2.0 ** -np.arange(n_nonzero)), 0.0)


def phase_alphabet(b_c):
    """Uniform unit-modulus co-phases ``exp(j 2 pi n / 2**b_c)``."""
    if b_c < 0:
        raise DomainError("b_c must be >= 0")
    return np.exp(2j * np.pi * np.arange(2**b_c) / 2**b_c)


def coefficient_alphabet(b_p, b_c, style="extended"):
    """Combining coefficients ``p * c``, amplitude-major order."""
    return np.outer(amplitude_alphabet(b_p, style), phase_alphabet(b_c)).ravel()


# -- beams ---------------------------------------------------------------------

def oversampled_dft(n_ports, index, oversampling):
    """``exp(j 2 pi index m / (oversampling n_ports)) / sqrt(n_ports)``."""
    m = np.arange(n_ports)
    return np.exp(2j * np.pi * index * m / (oversampling * n_ports)) / np.sqrt(n_ports)


def dft_beam(n_v, q_v, n_h, q_h, ports_v, ports_h, b_v, b_h):
    """Unit-norm 2D oversampled DFT beam, vertical index fastest."""
    o_v, o_h = 2**b_v, 2**b_h
    if not (0 <= n_v < ports_v and 0 <= n_h < ports_h):
        raise DomainError(f"beam index ({n_v}, {n_h}) outside {ports_v}x{ports_h} grid")
    if not (0 <= q_v < o_v and 0 <= q_h < o_h):
        raise DomainError(f"rotation ({q_v}, {q_h}) outside {o_v}x{o_h}")
    v = oversampled_dft(ports_v, o_v * n_v + q_v, o_v)
    h = oversampled_dft(ports_h, o_h * n_h + q_h, o_h)
    return np.kron(h, v)


def build_w1(beams):
    """Block-diagonal beam matrix for two polarizations.

    ``beams`` is an (n_ports, L) matrix; its columns must come from distinct
    orthogonal beams.
    """
    B = np.asarray(beams)
    n, L = B.shape
    gram = B.conj().T @ B
    if not np.allclose(gram, np.eye(L), atol=1e-9):
        raise DomainError("beam set is not orthonormal (duplicate beam indices?)")
    W1 = np.zeros((2 * n, 2 * L), dtype=complex)
    W1[:n, :L] = B
    W1[n:, L:] = B
    return W1


def build_w2(b_p, b_c, amp_idx, phase_idx, ref=0, style="extended"):
    """Combining vector with 1 at ``ref`` and ``p * c`` elsewhere.

    ``amp_idx`` and ``phase_idx`` list the non-reference slots in ascending
    slot order.
    """
    amps = amplitude_alphabet(b_p, style)
    phases = phase_alphabet(b_c)
    amp_idx, phase_idx = list(amp_idx), list(phase_idx)
    if len(amp_idx) != len(phase_idx):
        raise DomainError("amplitude and phase index lists differ in length")
    if any(not 0 <= i < amps.size for i in amp_idx):
        raise DomainError(f"amplitude index outside 0..{amps.size - 1}")
    if any(not 0 <= i < phases.size for i in phase_idx):
        raise DomainError(f"phase index outside 0..{phases.size - 1}")
    w2 = amps[amp_idx] * phases[phase_idx]
    return np.insert(w2, ref, 1.0 + 0j)


# -- codewords -----------------------------------------------------------------

@dataclass(frozen=True)
class Provenance:
    """Indices that identify one Type-II codeword.

    ``coeffs`` holds one coefficient-alphabet index per slot (amplitude-major,
    ``a = amp * 2**b_c + phase``); -1 marks a zero coefficient.  The entry at
    ``ref`` is ignored (that coefficient is 1).
    """

    start: int
    q_v: int
    q_h: int
    ref: int
    coeffs: tuple

    def beams(self, n_ports, n_beams):
        return tuple((self.start + i) % n_ports for i in range(n_beams))


@dataclass(frozen=True)
class Codeword:
    vector: np.ndarray
    provenance: object
    index: int | None = None


@dataclass(frozen=True)
class LPProvenance:
    panels: tuple   # Provenance per line-panel
    phases: tuple   # phase index per panel, first always 0


class TypeIICodebook:
    """Type-II codebook over one (line-)panel with ``ports_v x ports_h`` ports.

    Beam groups are ``n_beams`` cyclically adjacent orthogonal beams of the
    flattened beam grid; beam ``b`` maps to ``(n_v, n_h) = divmod(b, ports_h)``.
    The same rotation ``(q_v, q_h)`` applies to every beam of a group.
    """

    def __init__(self, ports_v, ports_h, alloc, n_beams=2, amplitude_style="extended"):
        if n_beams < 1:
            raise ConfigurationError("n_beams must be >= 1")
        self.ports_v, self.ports_h = ports_v, ports_h
        self.n_ports = ports_v * ports_h
        if n_beams > self.n_ports:
            raise ConfigurationError(
                f"cannot pick {n_beams} orthogonal beams from {self.n_ports} ports")
        self.alloc = alloc
        self.n_beams = n_beams
        self.n_slot = 2 * n_beams
        self.amplitude_style = amplitude_style
        self.o_v, self.o_h = 2**alloc.b_v, 2**alloc.b_h
        self.n_rot = self.o_v * self.o_h
        self.n_hyp = self.n_ports * self.n_rot
        self.alphabet = coefficient_alphabet(alloc.b_p, alloc.b_c, amplitude_style)
        self.n_alpha = self.alphabet.size
        self._beam_cache = None

    def __len__(self):
        return self.n_hyp * self.n_slot * (self.n_slot - 1) * self.n_alpha

    @property
    def search_size(self):
        return slp_search_size(self.n_ports, self.n_beams, self.alloc)

    @property
    def bits(self):
        return sp_bits(self.n_ports, self.n_beams, self.alloc)

    @property
    def dim(self):
        return 2 * self.n_ports

    # -- beams
    def beam_grid(self):
        """All rotated beams, shape (o_v, o_h, n_ports(beam), n_ports(entry))."""
        if self._beam_cache is None:
            grid = np.empty((self.o_v, self.o_h, self.n_ports, self.n_ports), dtype=complex)
            for qv in range(self.o_v):
                for qh in range(self.o_h):
                    for b in range(self.n_ports):
                        nv, nh = divmod(b, self.ports_h)
                        grid[qv, qh, b] = dft_beam(nv, qv, nh, qh, self.ports_v,
                                                   self.ports_h, self.alloc.b_v,
                                                   self.alloc.b_h)
            self._beam_cache = grid
        return self._beam_cache

    def beam_matrix(self, start, q_v, q_h):
        idx = [(start + i) % self.n_ports for i in range(self.n_beams)]
        return self.beam_grid()[q_v, q_h, idx].T

    def w1(self, start, q_v, q_h):
        return build_w1(self.beam_matrix(start, q_v, q_h))

    def hypothesis(self, hyp):
        """``(start, q_v, q_h)`` of a flat hypothesis index."""
        start, rot = divmod(int(hyp), self.n_rot)
        q_v, q_h = divmod(rot, self.o_h)
        return start, q_v, q_h

    # -- codewords
    def combining_vector(self, prov):
        x = np.zeros(self.n_slot, dtype=complex)
        for j, a in enumerate(prov.coeffs):
            if j != prov.ref and a >= 0:
                x[j] = self.alphabet[a]
        x[prov.ref] = 1.0
        return x

    def codeword(self, prov, index=None):
        x = self.combining_vector(prov)
        vec = self.w1(prov.start, prov.q_v, prov.q_h) @ x / np.linalg.norm(x)
        return Codeword(vec, prov, index)

    def decode(self, hyp, ref, step, a, choice):
        """Provenance of the candidate ``(hyp, ref, step, a)`` from a search."""
        start, q_v, q_h = self.hypothesis(hyp)
        return Provenance(start, q_v, q_h, int(ref), tuple(int(c) for c in choice))

    def flat_index(self, hyp, ref, step, a):
        return ((int(hyp) * self.n_slot + int(ref)) * (self.n_slot - 1) + int(step)) \
            * self.n_alpha + int(a)

    def sample(self, rng):
        """Codeword with uniformly drawn indices and every slot populated."""
        start = int(rng.integers(self.n_ports))
        q_v = int(rng.integers(self.o_v))
        q_h = int(rng.integers(self.o_h))
        ref = int(rng.integers(self.n_slot))
        coeffs = tuple(int(c) for c in rng.integers(self.n_alpha, size=self.n_slot))
        return self.codeword(Provenance(start, q_v, q_h, ref, coeffs))

    def stream(self, h, rtol=None):
        """Lazily yield every candidate ``(index, Codeword)`` searched for ``h``.

        Greedy decisions are made from the explicit codeword vectors, so the
        stream is a slow but direct rendering of the search enumeration.
        """
        from .kernels import TIE_RTOL
        rtol = TIE_RTOL if rtol is None else rtol
        h = np.asarray(h)
        if h.shape != (self.dim,):
            raise DomainError(f"channel slice length {h.shape} != ({self.dim},)")
        index = 0
        for hyp in range(self.n_hyp):
            start, q_v, q_h = self.hypothesis(hyp)
            W1 = self.w1(start, q_v, q_h)
            for ref in range(self.n_slot):
                coeffs = [-1] * self.n_slot
                for step in range(self.n_slot - 1):
                    j = step if step < ref else step + 1
                    scores = np.empty(self.n_alpha)
                    for a in range(self.n_alpha):
                        coeffs[j] = a
                        prov = Provenance(start, q_v, q_h, ref, tuple(coeffs))
                        x = self.combining_vector(prov)
                        vec = W1 @ x / np.linalg.norm(x)
                        scores[a] = abs(np.vdot(vec, h)) ** 2
                        yield index, Codeword(vec, prov, index)
                        index += 1
                    coeffs[j] = int(np.argmax(scores >= scores.max() * (1 - rtol)))


class LinePanelCodebook:
    """Per-line-panel Type-II codebooks plus the panel co-phasing alphabet."""

    def __init__(self, n_panels, ports_v, ports_h, alloc, n_beams=2,
                 amplitude_style="extended", pa_search="sequential"):
        if pa_search not in ("sequential", "joint"):
            raise ConfigurationError(f"unknown PA search mode {pa_search!r}")
        self.n_panels = n_panels
        self.alloc = alloc
        self.pa_search = pa_search
        self.slp = TypeIICodebook(ports_v, ports_h, alloc, n_beams, amplitude_style)
        self.phases = np.exp(2j * np.pi * np.arange(2**alloc.b_lp) / 2**alloc.b_lp)

    @property
    def dim(self):
        return self.n_panels * self.slp.dim

    @property
    def bits(self):
        return lp_bits(self.n_panels, self.slp.n_ports, self.slp.n_beams, self.alloc)

    @property
    def search_size(self):
        return lp_search_size(self.n_panels, self.slp.n_ports, self.slp.n_beams, self.alloc)

    @property
    def pa_size(self):
        if self.pa_search == "joint":
            return 2 ** (self.alloc.b_lp * (self.n_panels - 1)) if self.n_panels > 1 else 0
        return pa_search_size(self.n_panels, self.alloc.b_lp)

    def codeword(self, prov):
        parts = [self.slp.codeword(p).vector for p in prov.panels]
        return Codeword(normalize(assemble_lp(parts, self.phases[list(prov.phases)])), prov)

    def sample(self, rng):
        panels = tuple(self.slp.sample(rng).provenance for _ in range(self.n_panels))
        phases = (0,) + tuple(int(k) for k in rng.integers(self.phases.size,
                                                            size=self.n_panels - 1))
        return self.codeword(LPProvenance(panels, phases))


def assemble_lp(panel_codewords, panel_phases):
    """Concatenate panel codewords, rotating panel ``m`` by ``panel_phases[m]``.

    ``panel_phases`` holds unit-modulus factors; the first entry is ignored and
    the first panel is kept unrotated.
    """
    parts = [np.asarray(c) for c in panel_codewords]
    if len(panel_phases) != len(parts):
        raise ValueError("one phase factor per panel required")
    if len({p.shape for p in parts}) != 1:
        raise ValueError("panel codewords differ in length")
    out = [parts[0]] + [f * p for f, p in zip(panel_phases[1:], parts[1:])]
    return np.concatenate(out)


def normalize(v):
    return v / np.linalg.norm(v)


def pa_codebook(n_panels, b_lp):
    """Panel co-phasing matrix, one column per (panel, phase) pair.

    Column ``(m - 1) * 2**b_lp + k`` rotates panel ``m`` by ``2 pi k / 2**b_lp``
    and leaves the others at phase 0.
    """
    if b_lp < 0:
        raise DomainError("b_lp must be >= 0")
    if n_panels < 2:
        warnings.warn("a single line-panel needs no co-phasing; PA codebook is empty",
                      stacklevel=2)
        return np.ones((max(n_panels, 0), 0), dtype=complex)
    n_ph = 2**b_lp
    cols = np.ones((n_panels, (n_panels - 1) * n_ph), dtype=complex)
    for m in range(1, n_panels):
        cols[m, (m - 1) * n_ph:m * n_ph] = np.exp(2j * np.pi * np.arange(n_ph) / n_ph)
    return cols


class DFTCodebook:
    """Oversampled 2D DFT grid with ``2**total_bits`` beams.

    Vertical gets ``total_bits // 2`` bits of grid resolution, horizontal the
    rest.  Beam ``(t_v, t_h)`` has entries
    ``exp(j 2 pi (t_v m / Q_v + t_h n / Q_h))``; codeword index is
    ``t_v * Q_h + t_h``.  Cross-polarized arrays repeat the beam on both
    polarizations.
    """

    def __init__(self, ports_v, ports_h, total_bits, n_pol=2):
        if total_bits < 0:
            raise DomainError("total_bits must be >= 0")
        self.ports_v, self.ports_h, self.n_pol = ports_v, ports_h, n_pol
        self.total_bits = int(total_bits)
        self.bits_v = self.total_bits // 2
        self.bits_h = self.total_bits - self.bits_v
        self.q_v, self.q_h = 2**self.bits_v, 2**self.bits_h

    def __len__(self):
        return dft_search_size(self.total_bits)

    @property
    def dim(self):
        return self.n_pol * self.ports_v * self.ports_h

    def beam(self, t_v, t_h):
        if not (0 <= t_v < self.q_v and 0 <= t_h < self.q_h):
            raise DomainError(f"grid index ({t_v}, {t_h}) outside {self.q_v}x{self.q_h}")
        v = np.exp(2j * np.pi * t_v * np.arange(self.ports_v) / self.q_v)
        h = np.exp(2j * np.pi * t_h * np.arange(self.ports_h) / self.q_h)
        return np.kron(h, v) / math.sqrt(self.ports_v * self.ports_h)

    def codeword(self, index):
        t_v, t_h = divmod(int(index), self.q_h)
        b = self.beam(t_v, t_h)
        return Codeword(np.tile(b, self.n_pol) / math.sqrt(self.n_pol), (t_v, t_h), int(index))

    def sample(self, rng):
        return self.codeword(int(rng.integers(len(self))))


@dataclass(frozen=True)
class CodebookSpec:
    """Parametric description of one codebook family on an array.

    ``ports_v``/``ports_h`` describe one line-panel for ``lp`` and the whole
    array for ``sp`` and ``dft``.
    """

    family: str
    ports_v: int
    ports_h: int
    alloc: BitAllocation = BitAllocation()
    n_panels: int = 1
    n_beams: int = 2
    total_bits: int | None = None
    amplitude_style: str = "extended"
    pa_search: str = "sequential"
    rank: int = 1
    n_pol: int = 2

    def __post_init__(self):
        if self.family not in ("dft", "sp", "lp"):
            raise ConfigurationError(f"unknown codebook family {self.family!r}")
        if self.rank != 1:
            raise ConfigurationError("only rank-1 codebooks are supported")
        if self.family != "dft" and self.n_beams not in (2, 3, 4):
            raise ConfigurationError("n_beams must be 2, 3 or 4")
        if self.family != "dft" and self.n_pol != 2:
            raise ConfigurationError("Type-II codebooks need a cross-polarized array")
        if self.family == "dft" and self.total_bits is None:
            raise ConfigurationError("dft family needs total_bits")

    @classmethod
    def for_array(cls, family, config, alloc=BitAllocation(), n_beams=2,
                  total_bits=None, **kw):
        if family != "dft" and not config.cross_polarized:
            raise ConfigurationError("Type-II codebooks need a cross-polarized array")
        if family == "lp":
            return cls("lp", config.ports_v, config.n_elems_h, alloc,
                       n_panels=config.n_panels_h, n_beams=n_beams, **kw)
        return cls(family, config.ports_v, config.cols, alloc, n_beams=n_beams,
                   total_bits=total_bits, n_pol=config.n_pol, **kw)

    @property
    def n_ports(self):
        return self.ports_v * self.ports_h

    @property
    def bits(self):
        if self.family == "dft":
            return self.total_bits
        if self.family == "sp":
            return sp_bits(self.n_ports, self.n_beams, self.alloc)
        return lp_bits(self.n_panels, self.n_ports, self.n_beams, self.alloc)

    @property
    def search_size(self):
        if self.family == "dft":
            return dft_search_size(self.total_bits)
        if self.family == "sp":
            return sp_search_size(self.n_ports, self.n_beams, self.alloc)
        return lp_search_size(self.n_panels, self.n_ports, self.n_beams, self.alloc)

    def build(self):
        if self.family == "dft":
            return DFTCodebook(self.ports_v, self.ports_h, self.total_bits, self.n_pol)
        if self.family == "sp":
            return TypeIICodebook(self.ports_v, self.ports_h, self.alloc, self.n_beams,
                                  self.amplitude_style)
        return LinePanelCodebook(self.n_panels, self.ports_v, self.ports_h, self.alloc,
                                 self.n_beams, self.amplitude_style, self.pa_search)

    def as_dict(self):
        d = asdict(self)
        d["alloc"] = self.alloc.as_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["alloc"] = BitAllocation(**d.get("alloc", {}))
        return cls(**d)


def slp_codebook(spec):
    """Single line-panel codebook of an ``lp`` spec."""
    if spec.family != "lp":
        raise ConfigurationError("slp_codebook needs an lp spec")
    return TypeIICodebook(spec.ports_v, spec.ports_h, spec.alloc, spec.n_beams,
                          spec.amplitude_style)
