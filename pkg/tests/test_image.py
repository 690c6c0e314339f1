import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relight.errors import ContractError
from relight.image import (ImageF, Mask, lab_to_rgb, linear_to_srgb, resample,
                           rgb_to_lab, srgb_to_linear)


def scalar_img(value, h=2, w=2, space="srgb", channels=3):
    return ImageF(np.full((h, w, channels), value, dtype=np.float32), space)


class TestSrgbTransfer:
    def test_black_fixed_point(self):
        assert srgb_to_linear(scalar_img(0.0)).data.max() == 0.0

    def test_white_fixed_point(self):
        out = srgb_to_linear(scalar_img(1.0)).data
        np.testing.assert_allclose(out, 1.0, atol=1e-7)

    def test_mid_gray_pinned(self):
        # inverse EOTF of 0.5, evaluated in high precision and frozen
        out = srgb_to_linear(scalar_img(0.5)).data
        np.testing.assert_allclose(out, 0.21404114, atol=1e-6)

    def test_wrong_space_rejected(self):
        with pytest.raises(ContractError):
            srgb_to_linear(scalar_img(0.5, space="linear-rgb"))

    def test_forward_inverse(self):
        rng = np.random.default_rng(0)
        img = ImageF(rng.random((8, 8, 3)).astype(np.float32), "srgb")
        back = linear_to_srgb(srgb_to_linear(img))
        np.testing.assert_allclose(back.data, img.data, atol=1e-6)


class TestLab:
    def test_white_point(self):
        lab = rgb_to_lab(scalar_img(1.0, space="linear-rgb"))
        np.testing.assert_allclose(lab.data[0, 0], [100.0, 0.0, 0.0], atol=1e-4)

    def test_black(self):
        lab = rgb_to_lab(scalar_img(0.0, space="linear-rgb"))
        np.testing.assert_allclose(lab.data[0, 0], [0.0, 0.0, 0.0], atol=1e-4)

    def test_pinned_triple(self):
        # CIE reference formulas (D65, sRGB matrix) in 30-digit arithmetic
        img = ImageF(np.array([[[0.5, 0.1, 0.1]]], dtype=np.float32), "linear-rgb")
        lab = rgb_to_lab(img).data[0, 0]
        np.testing.assert_allclose(
            lab, [50.105257, 39.650784, 18.995045], atol=2e-4)

    def test_round_trip_in_gamut(self):
        rng = np.random.default_rng(7)
        rgb = rng.random((100, 100, 3)).astype(np.float32)
        img = ImageF(rgb, "linear-rgb")
        back = lab_to_rgb(rgb_to_lab(img))
        assert np.abs(back.data - rgb).max() < 1e-4

    def test_hdr_saturates_l(self):
        lab = rgb_to_lab(scalar_img(3.0, space="linear-rgb"))
        assert lab.data[..., 0].max() == 100.0


class TestResample:
    def test_identity_bitwise(self):
        rng = np.random.default_rng(1)
        img = ImageF(rng.random((5, 7, 3)).astype(np.float32), "linear-rgb")
        out = resample(img, 7, 5, "box")
        assert np.array_equal(out.data, img.data)

    def test_constant_box_collapse(self):
        img = scalar_img(0.7, h=2, w=2, space="scalar", channels=1)
        out = resample(img, 1, 1, "box")
        assert out.data[0, 0, 0] == np.float32(0.7)

    def test_ramp_block_means(self):
        ramp = ImageF(np.arange(16, dtype=np.float32).reshape(4, 4, 1), "scalar")
        out = resample(ramp, 2, 2, "box").data[..., 0]
        np.testing.assert_allclose(out, [[2.5, 4.5], [10.5, 12.5]])

    def test_zero_dimension_rejected(self):
        img = scalar_img(0.5)
        with pytest.raises(ContractError):
            resample(img, 0, 4)

    def test_box_then_bilinear_preserves_constant_mean(self):
        img = scalar_img(0.3137, h=8, w=8, space="scalar", channels=1)
        down = resample(img, 2, 2, "box")
        up = resample(down, 8, 8, "bilinear")
        assert up.data.mean() == img.data.mean()

    def test_bilinear_upscale_range(self):
        rng = np.random.default_rng(2)
        img = ImageF(rng.random((4, 4, 1)).astype(np.float32), "scalar")
        up = resample(img, 16, 16, "bilinear")
        assert up.data.min() >= img.data.min() - 1e-6
        assert up.data.max() <= img.data.max() + 1e-6


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_no_nan_from_finite_inputs(self, seed):
        rng = np.random.default_rng(seed)
        rgb = (rng.random((6, 6, 3)) * 4.0).astype(np.float32)
        img = ImageF(rgb, "linear-rgb")
        lab = rgb_to_lab(img)
        back = lab_to_rgb(lab)
        enc = linear_to_srgb(ImageF(np.clip(back.data, 0, None), "linear-rgb"))
        for m in (lab, back, enc):
            assert np.isfinite(m.data).all()
        small = resample(img, 3, 2, "box")
        big = resample(img, 13, 9, "bilinear")
        assert np.isfinite(small.data).all() and np.isfinite(big.data).all()

    def test_mask_clamps(self):
        m = Mask(np.array([[-0.5, 0.5], [2.0, 1.0]], dtype=np.float32))
        assert m.data.min() == 0.0 and m.data.max() == 1.0

    def test_lab_channel_contract(self):
        with pytest.raises(ContractError):
            ImageF(np.zeros((2, 2, 1), np.float32), "lab")
