import numpy as np
import pytest

from tsqm.rng import TrialStream, draw_pair, draw_pair_np, philox4x32, philox4x32_np, split_seed

# Random123 known-answer vectors for philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers_scalar(ctr, key, expected):
    out = philox4x32(*(np.uint64(c) for c in ctr), *(np.uint64(k) for k in key))
    assert tuple(int(x) for x in out) == expected


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers_vectorized(ctr, key, expected):
    out = philox4x32_np(*(np.array([c], dtype=np.uint64) for c in ctr), *key)
    assert tuple(int(x[0]) for x in out) == expected


def test_backends_agree_on_uniforms():
    lo, hi = split_seed(0xDEADBEEF12345678)
    trials = np.arange(0, 5000, 7, dtype=np.uint64) + np.uint64(2**33)
    for draw in (0, 1, 17):
        u, v = draw_pair_np(lo, hi, trials, draw)
        for t, a, b in zip(trials[:50], u[:50], v[:50]):
            assert draw_pair(lo, hi, int(t), draw) == (a, b)


def test_uniforms_in_unit_interval_and_roughly_uniform():
    u, v = draw_pair_np(1, 2, np.arange(200_000, dtype=np.uint64), 0)
    x = np.concatenate([u, v])
    assert x.min() >= 0.0 and x.max() < 1.0
    hist, _ = np.histogram(x, bins=20, range=(0, 1))
    expected = x.size / 20
    chi2 = float(((hist - expected) ** 2 / expected).sum())
    # 19 dof; p(chi2 > 45) ~ 7e-4
    assert chi2 < 45


def test_streams_are_addressable():
    s = TrialStream(seed=99, trial=12345)
    assert s.uniforms(3) == TrialStream(99, 12345).uniforms(3)
    assert s.uniforms(3) != s.uniforms(4)
    assert s.uniforms(3) != TrialStream(99, 12346).uniforms(3)
    assert s.uniforms(3) != TrialStream(100, 12345).uniforms(3)


def test_split_seed_wraps_to_64_bits():
    assert split_seed(-1) == (0xFFFFFFFF, 0xFFFFFFFF)
    assert split_seed(2**64 + 5) == (5, 0)
