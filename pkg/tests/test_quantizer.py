import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from mpa_codebook import quantizer as Q
from mpa_codebook.channel import line_panel_order
from mpa_codebook.codebook import (BitAllocation, CodebookSpec, DFTCodebook, LinePanelCodebook,
                                   TypeIICodebook)
from mpa_codebook.quantizer import (EmptyCodebookError, SearchBudgetExceeded, argmax_stream,
                                    dft_search, lp_search, quantize_array, quantize_dft,
                                    quantize_lp, quantize_slp, quantize_sp, typeii_search)


def cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


SMALL = [  # ports_v, ports_h, b_v, b_h, b_p, b_c
    (1, 2, 0, 0, 3, 2),
    (1, 4, 0, 1, 1, 1),
    (2, 2, 1, 1, 1, 2),
    (2, 3, 1, 0, 2, 1),
]


class TestTypeII:
    @pytest.mark.parametrize("pv,ph,bv,bh,bp,bc", SMALL)
    def test_matches_materialized_oracle(self, backend, pv, ph, bv, bh, bp, bc):
        cb = TypeIICodebook(pv, ph, BitAllocation(b_v=bv, b_h=bh, b_p=bp, b_c=bc))
        rng = np.random.default_rng(pv * 100 + ph)
        H = cgauss(rng, 6, cb.dim)
        res = typeii_search(cb, H)
        for h, idx, vec in zip(H, res.indices, res.codewords):
            i, c = O.typeii_bruteforce(h, pv, ph, 2, bv, bh, bp, bc)
            assert idx == i
            assert np.allclose(vec, c, atol=1e-12)

    def test_streaming_argmax_agrees(self, backend):
        cb = TypeIICodebook(1, 2, BitAllocation())
        rng = np.random.default_rng(11)
        for h in cgauss(rng, 5, cb.dim):
            i, c = argmax_stream(h, cb.stream(h))
            idx, cw = quantize_slp(h, cb)
            assert idx == i
            assert np.allclose(cw.vector, c.vector)

    def test_self_quantization(self, backend):
        cb = TypeIICodebook(1, 4, BitAllocation(b_h=1))
        rng = np.random.default_rng(2)
        for _ in range(30):
            c = cb.sample(rng)
            res = typeii_search(cb, c.vector[None, :])
            assert res.scores[0] == pytest.approx(1.0, abs=1e-9)
            assert abs(np.vdot(res.codewords[0], c.vector)) == pytest.approx(1.0, abs=1e-9)

    def test_codeword_from_index_and_provenance(self):
        cb = TypeIICodebook(2, 2, BitAllocation(b_v=1, b_h=1, b_p=2, b_c=2))
        h = cgauss(np.random.default_rng(5), cb.dim)
        res = typeii_search(cb, h, with_provenance=True)
        prov = res.provenance[0]
        assert np.allclose(cb.codeword(prov).vector, res.codewords[0], atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
    def test_scale_invariance(self, seed, alpha):
        cb = TypeIICodebook(1, 4, BitAllocation(b_h=1))
        h = cgauss(np.random.default_rng(seed), cb.dim)
        a = typeii_search(cb, h).indices[0]
        b = typeii_search(cb, alpha * h).indices[0]
        assert a == b

    def test_scores_bounded(self, desk_channels):
        cb = TypeIICodebook(1, 4, BitAllocation(b_h=2))
        res = typeii_search(cb, desk_channels)
        assert np.all(res.scores <= 1.0)
        assert res.candidates == cb.search_size == 6144

    def test_cap(self):
        cb = TypeIICodebook(1, 4, BitAllocation(b_h=2))
        with pytest.raises(SearchBudgetExceeded):
            typeii_search(cb, np.ones(8), eval_cap=100)

    def test_wrong_length(self):
        cb = TypeIICodebook(1, 4, BitAllocation())
        with pytest.raises(ValueError):
            typeii_search(cb, np.ones(5))

    def test_empty_stream(self):
        with pytest.raises(EmptyCodebookError):
            argmax_stream(np.ones(2), iter(()))


class TestLinePanel:
    def test_recovers_panel_phase(self, backend):
        spec = CodebookSpec("lp", 1, 2, BitAllocation(), n_panels=2)
        cb = spec.build()
        c = cb.slp.sample(np.random.default_rng(3)).vector
        h = np.concatenate([c, 1j * c])
        res = quantize_lp(h, spec)
        assert res.provenance.phases == (0, 1)
        assert res.pa_index == 1
        assert res.score == pytest.approx(1.0, abs=1e-9)

    def test_candidate_count(self):
        spec = CodebookSpec("lp", 1, 2, BitAllocation(), n_panels=2)
        res = quantize_lp(np.ones(8, dtype=complex), spec)
        assert res.candidates == 2 * 768 + 4 == spec.search_size

    def test_matches_two_stage_oracle(self, backend, desk_panel_major):
        cb = LinePanelCodebook(2, 1, 2, BitAllocation(b_h=1, b_lp=3))
        H = desk_panel_major[:10]
        res = lp_search(cb, H)
        for k, h in enumerate(H):
            idx, pa, vec = O.line_panel_bruteforce(h, 2, 1, 2, 2, 3, 0, 1, 3, 2)
            assert tuple(res.panel_indices[k]) == idx
            assert res.pa_indices[k] == pa
            assert np.allclose(res.codewords[k], vec, atol=1e-12)

    def test_three_panels_match_oracle(self, backend):
        cb = LinePanelCodebook(3, 1, 2, BitAllocation(b_p=1, b_c=1))
        H = cgauss(np.random.default_rng(8), 4, cb.dim)
        res = lp_search(cb, H)
        for k, h in enumerate(H):
            idx, pa, vec = O.line_panel_bruteforce(h, 3, 1, 2, 2, 2, 0, 0, 1, 1)
            assert (tuple(res.panel_indices[k]), res.pa_indices[k]) == (idx, pa)

    def test_joint_mode_never_worse(self, desk_panel_major):
        seq = LinePanelCodebook(2, 1, 2, BitAllocation())
        joint = LinePanelCodebook(2, 1, 2, BitAllocation(), pa_search="joint")
        a = lp_search(seq, desk_panel_major).scores
        b = lp_search(joint, desk_panel_major).scores
        assert np.all(b >= a - 1e-12)

    def test_provenance_rebuilds_codeword(self, desk_panel_major):
        cb = LinePanelCodebook(2, 1, 2, BitAllocation(b_h=1))
        res = lp_search(cb, desk_panel_major[:5], with_provenance=True)
        for k in range(5):
            assert np.allclose(cb.codeword(res.provenance[k]).vector, res.codewords[k])


class TestDFT:
    @pytest.mark.parametrize("pv,ph,B", [(1, 4, 6), (2, 4, 8), (2, 2, 3), (1, 4, 1)])
    def test_matches_oracle(self, pv, ph, B):
        cb = DFTCodebook(pv, ph, B)
        H = cgauss(np.random.default_rng(B), 5, cb.dim)
        res = dft_search(cb, H)
        for h, idx in zip(H, res.indices):
            assert idx == O.dft_bruteforce(h, pv, ph, B)

    def test_line_search_matches_exhaustive(self, monkeypatch, desk_channels):
        cb = DFTCodebook(1, 4, 14)
        full = dft_search(cb, desk_channels[:40])
        monkeypatch.setattr(Q, "_FFT_2D_MAX", 1)
        line = dft_search(cb, desk_channels[:40])
        assert np.array_equal(full.indices, line.indices)

    def test_peak_path_matches_fft(self, monkeypatch, desk_channels):
        cb = DFTCodebook(1, 4, 16)
        monkeypatch.setattr(Q, "_FFT_2D_MAX", 1)
        fft = dft_search(cb, desk_channels[:40])
        monkeypatch.setattr(Q, "_FFT_1D_MAX", 1)
        peak = dft_search(cb, desk_channels[:40])
        assert np.allclose(fft.scores, peak.scores, rtol=1e-9)
        assert np.array_equal(fft.indices, peak.indices)

    def test_large_budget_is_tractable(self, desk_channels):
        cb = DFTCodebook(1, 4, 48)
        res = dft_search(cb, desk_channels[:3])
        assert res.candidates == 2**48
        assert np.all(res.scores <= 1.0)

    def test_self_quantization(self):
        cb = DFTCodebook(2, 4, 8)
        c = cb.codeword(77).vector
        res = quantize_dft(c, cb)
        assert res.panel_indices == (77,)
        assert res.score == pytest.approx(1.0)

    def test_cap_without_reduction(self):
        cb = DFTCodebook(2, 4, 40)
        with pytest.raises(SearchBudgetExceeded):
            dft_search(cb, np.ones((1, 16)), eval_cap=10)


def test_array_entry_point_port_order(desk, desk_channels):
    spec = CodebookSpec.for_array("lp", desk)
    res = quantize_array(spec, desk_channels[:20], desk)
    direct = lp_search(spec.build(), desk_channels[:20, line_panel_order(desk)])
    assert np.allclose(res.scores, direct.scores)
    assert np.allclose(np.abs(np.einsum("ij,ij->i", res.codewords.conj(), desk_channels[:20]))
                       / np.linalg.norm(desk_channels[:20], axis=1), res.scores)


def test_quantize_sp_result(desk, desk_channels):
    spec = CodebookSpec.for_array("sp", desk, BitAllocation(b_lp=0, b_h=1))
    r = quantize_sp(desk_channels[0], spec)
    assert r.candidates == spec.search_size
    assert r.pa_index is None
    assert 0 <= r.score <= 1
