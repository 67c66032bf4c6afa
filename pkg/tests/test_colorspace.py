import numpy as np
import pytest

from satfuse.colorspace import rgb_to_hsi


def one(v):
    return np.full((1, 1), v)


def test_gray_pixel():
    h, s, i = rgb_to_hsi(one(0.5), one(0.5), one(0.5))
    assert h[0, 0] == 0.0
    assert s[0, 0] == 0.0
    assert i[0, 0] == pytest.approx(0.5)


def test_pure_red():
    h, s, i = rgb_to_hsi(one(1.0), one(0.0), one(0.0))
    assert h[0, 0] == pytest.approx(0.0)
    assert s[0, 0] == pytest.approx(1.0)
    assert i[0, 0] == pytest.approx(1 / 3)


def test_pure_green():
    h, s, i = rgb_to_hsi(one(0.0), one(1.0), one(0.0))
    assert h[0, 0] == pytest.approx(1 / 3)  # 120 degrees
    assert s[0, 0] == pytest.approx(1.0)
    assert i[0, 0] == pytest.approx(1 / 3)


def test_black_pixel_guarded():
    h, s, i = rgb_to_hsi(one(0.0), one(0.0), one(0.0))
    assert h[0, 0] == 0.0 and s[0, 0] == 0.0 and i[0, 0] == 0.0


def test_ranges_and_finiteness():
    rng = np.random.default_rng(0)
    r, g, b = rng.random((3, 64, 64))
    # sprinkle exact ties and zeros to hit the guards
    r[0, :8] = g[0, :8] = b[0, :8] = 0.25
    r[1, :8] = g[1, :8] = b[1, :8] = 0.0
    for plane in rgb_to_hsi(r, g, b):
        assert np.isfinite(plane).all()
        assert (plane >= 0.0).all() and (plane <= 1.0).all()


def test_scale_invariance_of_hue_saturation():
    rng = np.random.default_rng(1)
    r, g, b = rng.random((3, 16, 16)) * 0.5
    h1, s1, i1 = rgb_to_hsi(r, g, b)
    h2, s2, i2 = rgb_to_hsi(1.8 * r, 1.8 * g, 1.8 * b)
    np.testing.assert_allclose(h1, h2, atol=1e-12)
    np.testing.assert_allclose(s1, s2, atol=1e-12)
    np.testing.assert_allclose(i2, 1.8 * i1, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        rgb_to_hsi(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))
