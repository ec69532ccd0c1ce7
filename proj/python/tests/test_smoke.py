import math

import numpy as np
import pytest

import echoprint


def tone(freq, seconds=1.0, rate=16000, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * math.pi * freq * t)


def speechy(rate=16000):
    # Three voiced bursts with a decaying tail, separated by silence.
    rng = np.random.default_rng(4)
    out = []
    for f0 in (110.0, 125.0, 140.0):
        burst = tone(f0, 0.5, rate) + 0.5 * tone(2 * f0, 0.5, rate) + 0.25 * tone(3 * f0, 0.5, rate)
        tail = rng.normal(0, 0.05, int(0.3 * rate)) * np.exp(-np.arange(int(0.3 * rate)) / (0.05 * rate))
        out += [burst, tail, np.zeros(int(0.6 * rate))]
    return np.concatenate([np.zeros(int(0.4 * rate))] + out) * 0.8


def test_wav_round_trip(tmp_path):
    x = np.round(tone(440.0) * 32767) / 32767
    path = tmp_path / "t.wav"
    echoprint.write_wav(path, x, 16000)
    y, rate = echoprint.read_wav(path)
    assert rate == 16000
    np.testing.assert_allclose(y, x, atol=1.0 / 32768)


def test_missing_wav_is_data_error(tmp_path):
    with pytest.raises(echoprint.DataError):
        echoprint.read_wav(tmp_path / "nope.wav")


def test_cqt_peak():
    s = echoprint.cqt(tone(440.0), 16000)
    k = int(np.argmax(s["bins"]))
    assert abs(s["center_freqs"][k] - 440.0) / 440.0 < 0.03


def test_nmf_and_pool():
    rng = np.random.default_rng(0)
    O = rng.random((8, 40))
    layer = echoprint.nmf(O, 3, tol=1e-6, max_iter=200, seed=1)
    assert (layer["H"] >= 0).all() and (layer["W"] >= 0).all()
    assert all(b <= a * (1 + 1e-12) for a, b in zip(layer["objective"], layer["objective"][1:]))
    pooled = echoprint.max_pool(O, 2)
    assert pooled[0, 0] == O[0, :3].max()
    with pytest.raises(echoprint.ConfigError):
        echoprint.nmf(O, 0)


def test_deep_decompose_regenerates():
    rng = np.random.default_rng(1)
    O = rng.random((6, 64)) * 100
    r = echoprint.deep_decompose(O, ranks=[4, 3, 2])
    full = r["layers"][0]["H"] @ r["WX"]
    np.testing.assert_allclose(r["direct"] + r["reverberant"], full, atol=1e-8)


def test_fingerprint_gain_invariant():
    x = speechy()
    a = echoprint.fingerprint(x, 16000, "room")
    b = echoprint.fingerprint(2 * x, 16000, "room")
    assert a is not None and a["n_segments"] >= 1
    np.testing.assert_allclose(a["p"], b["p"], rtol=1e-6)
    assert echoprint.fingerprint(np.zeros(16000), 16000) is None


def test_segment_and_ir():
    utts = echoprint.segment(speechy(), 16000)
    assert len(utts) >= 1
    ir = echoprint.image_source_ir([5.0, 4.0, 3.0], [0.8] * 6, [1.0, 1.0, 1.5], [3.0, 2.5, 1.5], max_order=3)
    assert ir.size > 0 and np.abs(ir).max() > 0
