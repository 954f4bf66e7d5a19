import numpy as np
import pytest

from manitest import Image
from manitest import io as mio
from manitest.errors import ManitestError


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    img = Image(np.round(rng.random((6, 8)) * 255) / 255.0)
    path = tmp_path / "img.pgm"
    mio.save_pgm(str(path), img)
    back = mio.load_pgm(str(path))
    assert back.samples.shape == img.samples.shape
    assert np.allclose(back.samples, img.samples, atol=1e-12)


def test_pgm_with_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = mio.load_pgm(str(path))
    assert img.samples[0, 0, 0] == 0.0
    assert img.samples[0, 0, 1] == 1.0


def test_pgm_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(ManitestError):
        mio.load_pgm(str(path))


def test_idx_images_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    imgs = [Image(np.round(rng.random((5, 4)) * 255) / 255.0) for _ in range(3)]
    path = tmp_path / "set.idx"
    mio.save_idx_images(str(path), imgs)
    back = mio.load_idx_images(str(path))
    assert len(back) == 3
    for a, b in zip(imgs, back):
        assert np.allclose(a.samples, b.samples, atol=1e-12)


def test_idx_labels_round_trip(tmp_path):
    labels = [0, 1, 2, 1, 0]
    path = tmp_path / "labels.idx"
    mio.save_idx_labels(str(path), labels)
    assert mio.load_idx_labels(str(path)) == labels


def test_idx_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(b"\x00\x00\x08\x05" + b"\x00" * 16)
    with pytest.raises(ManitestError):
        mio.load_idx_images(str(path))


def test_load_image_dispatch(tmp_path):
    img = Image(np.zeros((3, 3)))
    pgm = tmp_path / "a.pgm"
    mio.save_pgm(str(pgm), img)
    assert mio.load_image(str(pgm)).samples.shape == (1, 3, 3)
    idx = tmp_path / "a.idx"
    mio.save_idx_images(str(idx), [img])
    assert mio.load_image(str(idx)).samples.shape == (1, 3, 3)
