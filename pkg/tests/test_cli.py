import json

import numpy as np
import pytest

from manitest import Image, make_group
from manitest import io as mio
from manitest.cli import main
from conftest import gaussian_image, two_blob_image


def _make_dataset(tmp_path, n_per_class=3, size=16, seed=0):
    """Two classes of blobs at mirrored positions, written as IDX files."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in (0, 1):
        for _ in range(n_per_class):
            cx = 4.5 if c == 0 else size - 5.5
            img = gaussian_image(size=size, cx=cx + rng.uniform(-0.5, 0.5),
                                 cy=(size - 1) / 2 + rng.uniform(-0.5, 0.5),
                                 sx=2.0, sy=2.0)
            images.append(Image(np.round(np.asarray(img.samples[0]) * 255) / 255))
            labels.append(c)
    img_path = tmp_path / "imgs.idx"
    lbl_path = tmp_path / "labels.idx"
    mio.save_idx_images(str(img_path), images)
    mio.save_idx_labels(str(lbl_path), labels)
    return str(img_path), str(lbl_path)


def _train_model(tmp_path, kind="centroid"):
    imgs, lbls = _make_dataset(tmp_path)
    model_path = tmp_path / f"{kind}.bin"
    rc = main(["train", "--dataset", imgs, "--labels", lbls,
               "--model", kind, "--out", str(model_path)])
    assert rc == 0
    return imgs, lbls, str(model_path)


def test_train_and_score_single_image(tmp_path):
    imgs, _, model = _train_model(tmp_path)
    pgm = tmp_path / "probe.pgm"
    mio.save_pgm(str(pgm), mio.load_idx_images(imgs)[0])
    out = tmp_path / "score.json"
    rc = main(["score", "--image", str(pgm),
               "--classifier", f"builtin:centroid:{model}",
               "--group", "trans", "--output", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["config"]["group"] == "trans"
    assert report["summary"]["hits"] + report["summary"]["exhausted"] == 1
    (record,) = report["results"]
    if record["outcome"] == "hit":
        assert record["delta"] > 0
        assert record["flip_label"] != record["original_label"]


def test_score_dataset_deterministic_bytes(tmp_path):
    imgs, _, model = _train_model(tmp_path)
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        rc = main(["score", "--dataset", imgs,
                   "--classifier", f"builtin:centroid:{model}",
                   "--group", "trans", "--sample-size", "3",
                   "--seed", "7", "--output", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    report = json.loads(outs[0])
    assert len(report["results"]) == 3


def test_score_missing_model_reports_path(tmp_path, capsys):
    pgm = tmp_path / "probe.pgm"
    mio.save_pgm(str(pgm), two_blob_image())
    missing = tmp_path / "nope.bin"
    rc = main(["score", "--image", str(pgm),
               "--classifier", f"builtin:centroid:{missing}"])
    assert rc == 1
    assert str(missing) in capsys.readouterr().err


def test_map_window_zero(tmp_path):
    pgm = tmp_path / "img.pgm"
    mio.save_pgm(str(pgm), two_blob_image())
    out = tmp_path / "map.csv"
    rc = main(["map", "--image", str(pgm), "--group", "trans",
               "--window", "0", "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2  # header plus the identity node
    row = lines[1].split(",")
    assert row[0] == "0" and row[1] == "0"
    assert float(row[4]) == 0.0


def test_map_blank_image_fails_cleanly(tmp_path, capsys):
    pgm = tmp_path / "blank.pgm"
    mio.save_pgm(str(pgm), Image(np.zeros((8, 8))))
    out = tmp_path / "map.csv"
    rc = main(["map", "--image", str(pgm), "--group", "trans",
               "--window", "2", "--output", str(out)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_map_rejects_bad_window_arity(tmp_path, capsys):
    pgm = tmp_path / "img.pgm"
    mio.save_pgm(str(pgm), two_blob_image())
    rc = main(["map", "--image", str(pgm), "--group", "trans",
               "--window", "1,2,3", "--output", str(tmp_path / "m.csv")])
    assert rc == 1


def test_map_distances_match_library_run(tmp_path):
    from manitest.fast_marching import run
    from manitest.metric import MetricField

    img = two_blob_image()
    pgm = tmp_path / "img.pgm"
    mio.save_pgm(str(pgm), img)
    img = mio.load_pgm(str(pgm))  # quantized copy, same as the CLI sees
    out = tmp_path / "map.csv"
    rc = main(["map", "--image", str(pgm), "--group", "rot",
               "--window", "3", "--output", str(out)])
    assert rc == 0

    group = make_group("rot")
    dmap, _ = run(group, MetricField(img, group), bounds=[(-3, 3)])
    lines = out.read_text().splitlines()[1:]
    assert len(lines) == 7
    checked = 0
    for line in lines:
        cells = line.split(",")
        lat = (int(cells[0]),)
        if cells[3] == "known":
            assert float(cells[2]) == pytest.approx(
                dmap.nodes[lat].distance, rel=1e-12)
            checked += 1
    assert checked >= 5


def test_augment_experiment_single_count(tmp_path):
    imgs, lbls, _ = _train_model(tmp_path)
    out = tmp_path / "exp.csv"
    rc = main(["augment-exp", "--dataset", imgs, "--labels", lbls,
               "--counts", "0", "--epochs", "30", "--group", "trans",
               "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "count,mean_delta,accuracy"
    assert len(lines) == 2
    assert lines[1].startswith("0,")

    out2 = tmp_path / "exp2.csv"
    rc = main(["augment-exp", "--dataset", imgs, "--labels", lbls,
               "--counts", "0", "--epochs", "30", "--group", "trans",
               "--output", str(out2)])
    assert rc == 0
    assert out.read_bytes() == out2.read_bytes()


def test_train_logistic_model_kind(tmp_path):
    from manitest.classifier import LinearModel, load_model

    _, _, model_path = _train_model(tmp_path, kind="logistic")
    assert isinstance(load_model(model_path), LinearModel)
