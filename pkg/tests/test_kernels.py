import numpy as np
import pytest

from mpa_codebook import kernels
from mpa_codebook.codebook import coefficient_alphabet

BACKENDS = sorted(kernels.BACKENDS)


def cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_default_backend_is_known():
    assert kernels.BACKEND in kernels.BACKENDS


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
@pytest.mark.parametrize("n_slot,bp,bc", [(4, 3, 2), (6, 1, 1), (8, 2, 2)])
def test_greedy_backends_agree(n_slot, bp, bc):
    rng = np.random.default_rng(n_slot)
    proj = cgauss(rng, 50, 7, n_slot)
    alpha = coefficient_alphabet(bp, bc)
    out = [kernels.BACKENDS[b].greedy_search(proj, alpha, kernels.TIE_RTOL) for b in BACKENDS]
    assert np.array_equal(out[0][0], out[1][0])
    assert np.allclose(out[0][1], out[1][1], rtol=1e-12)
    assert np.array_equal(out[0][2], out[1][2])


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_greedy_backends_agree_on_exact_ties():
    proj = np.ones((3, 4, 4), dtype=complex)
    alpha = coefficient_alphabet(2, 2)
    out = [kernels.BACKENDS[b].greedy_search(proj, alpha, kernels.TIE_RTOL) for b in BACKENDS]
    assert np.array_equal(out[0][0], out[1][0])
    # every slot at coefficient 1 is best; the first hypothesis and reference win ties
    assert np.array_equal(out[0][0][0], [0, 0, 2, 0])


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
@pytest.mark.parametrize("n_rot,b_lp", [(1, 2), (3, 3)])
def test_phase_backends_agree(n_rot, b_lp):
    rng = np.random.default_rng(n_rot)
    base, rot = cgauss(rng, 40), cgauss(rng, 40, n_rot)
    phases = np.exp(2j * np.pi * np.arange(2**b_lp) / 2**b_lp)
    out = [kernels.BACKENDS[b].phase_search(base, rot, phases, kernels.TIE_RTOL)
           for b in BACKENDS]
    for a, b in zip(out[0], out[1]):
        assert np.allclose(a, b)


def test_greedy_rejects_single_slot():
    with pytest.raises(ValueError):
        kernels.greedy_search(np.ones((1, 1, 1), dtype=complex), np.ones(2))
