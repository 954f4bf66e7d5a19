"""Shared synthetic images and toy classifiers for the test suite."""

import numpy as np
import pytest

from manitest import Image


def gaussian_image(size=24, cx=None, cy=None, sx=3.0, sy=3.0, amp=1.0):
    """Sampled 2-D Gaussian; defaults to a centered isotropic blob."""
    if cx is None:
        cx = (size - 1) / 2.0
    if cy is None:
        cy = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    a = amp * np.exp(-((xx - cx) ** 2 / (2 * sx**2) + (yy - cy) ** 2 / (2 * sy**2)))
    return Image(a)


def two_blob_image(size=24):
    """Asymmetric two-blob image; not invariant to any group direction."""
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    a = np.exp(-(((yy - 8.0) ** 2) / 18 + ((xx - 15.0) ** 2) / 10))
    a += 0.6 * np.exp(-(((yy - 16.0) ** 2) / 8 + ((xx - 7.0) ** 2) / 22))
    return Image(a)


class ConstantOracle:
    """Classifier that always answers the same label."""

    def __init__(self, label=0):
        self.label = label

    def classify(self, img):
        return self.label


class FlipAwayOracle:
    """Label 0 at any of the reference images, 1 anywhere else."""

    def __init__(self, *references):
        self.references = [np.array(r.samples) for r in references]

    def classify(self, img):
        if any(np.array_equal(img.samples, r) for r in self.references):
            return 0
        return 1


class TemplateOracle:
    """Nearest of two fixed template arrays, without the model plumbing."""

    def __init__(self, template_a, template_b):
        self.a = np.asarray(template_a, dtype=float)
        self.b = np.asarray(template_b, dtype=float)

    def classify(self, img):
        da = float(np.sum((img.samples[0] - self.a) ** 2))
        db = float(np.sum((img.samples[0] - self.b) ** 2))
        return 0 if da <= db else 1


@pytest.fixture
def blob():
    return two_blob_image()


@pytest.fixture
def gaussian():
    return gaussian_image()
