"""Reference SSIM/PSNR values frozen into tests/test_metrics.cpp.

Independent implementation: scikit-image's structural_similarity with the
canonical Gaussian settings (11x11 window, sigma 1.5, K1 0.01, K2 0.03,
population covariance, data range 1).
"""
import math

import numpy as np
from skimage.metrics import structural_similarity


def ssim(a, b):
    return structural_similarity(
        a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
        data_range=1.0)


def checkerboard(n=16, lo=0.1, hi=0.9):
    i, j = np.indices((n, n))
    return np.where((i + j) % 2 == 0, hi, lo).astype(np.float64)


def gradient_pair(h=20, w=24):
    i, j = np.indices((h, w)).astype(np.float64)
    a = (i * w + j) / (h * w)
    b = np.clip(a + 0.05 * np.sin(i * 1.7 + j * 0.3), 0.0, 1.0)
    return a, b


if __name__ == "__main__":
    c = checkerboard()
    print("checkerboard_vs_inverse", repr(ssim(c, 1.0 - c)))
    a, b = gradient_pair()
    print("gradient_pair", repr(ssim(a, b)))
    mse = np.mean((a - b) ** 2)
    print("gradient_pair_psnr", repr(10 * math.log10(1.0 / mse)))
