import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from netrepair.data import (DatasetError, extract_failing_set, load_dataset, load_idx, make_synthetic,
                            synthetic_splits)
from netrepair.data.corrupt import CorruptionError, CorruptionSpec, corrupt, corrupt_batch
from netrepair.data.dataset import LabeledDataset, load_native, save_native
from netrepair.data.idx import read_idx_images, read_idx_labels, write_idx
from netrepair.data.mixing import cutmix_box, draw_mix_ratio, mix_samples
from netrepair.model import Model, dense, flatten
from oracles import nearest_centroid_accuracy

images01 = arrays(np.float32, st.tuples(st.integers(1, 2), st.integers(3, 9), st.integers(3, 9)),
                  elements=st.floats(0, 1, width=32))


def _write_pair(tmp_path, n=5, gz=False):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(n, 28, 28), dtype=np.uint8)
    pixels[0, 0, 0] = 255
    labels = rng.integers(0, 10, size=n, dtype=np.uint8)
    ip, lp = tmp_path / "img-idx3-ubyte", tmp_path / "lbl-idx1-ubyte"
    write_idx(ip, lp, pixels, labels)
    if gz:
        for p in (ip, lp):
            p.with_suffix(".gz").write_bytes(gzip.compress(p.read_bytes()))
        ip, lp = ip.with_suffix(".gz"), lp.with_suffix(".gz")
    return ip, lp, pixels, labels


@pytest.mark.parametrize("gz", [False, True])
def test_idx_roundtrip_and_scaling(tmp_path, gz):
    ip, lp, pixels, labels = _write_pair(tmp_path, gz=gz)
    ds = load_idx(ip, lp)
    assert ds.images.shape == (5, 1, 28, 28)
    assert ds.images[0, 0, 0, 0] == 1.0
    assert np.allclose(ds.images[:, 0], pixels / 255.0)
    assert np.array_equal(ds.labels, labels)


def test_idx_header_is_big_endian(tmp_path):
    ip, lp, _, _ = _write_pair(tmp_path)
    assert struct.unpack(">IIII", ip.read_bytes()[:16]) == (0x803, 5, 28, 28)
    assert struct.unpack(">II", lp.read_bytes()[:8]) == (0x801, 5)


def test_idx_wrong_magic(tmp_path):
    _, lp, _, _ = _write_pair(tmp_path)
    with pytest.raises(DatasetError, match="magic"):
        read_idx_images(lp)


def test_idx_truncated(tmp_path):
    ip, _, _, _ = _write_pair(tmp_path)
    ip.write_bytes(ip.read_bytes()[:-3])
    with pytest.raises(DatasetError):
        read_idx_images(ip)


def test_idx_count_mismatch(tmp_path):
    ip, lp, pixels, labels = _write_pair(tmp_path)
    write_idx(tmp_path / "a", tmp_path / "b", pixels, labels[:4])
    with pytest.raises(DatasetError):
        load_idx(ip, tmp_path / "b")


def test_idx_labels_reader(tmp_path):
    _, lp, _, labels = _write_pair(tmp_path)
    assert np.array_equal(read_idx_labels(lp), labels)


def test_synthetic_empty_and_deterministic():
    empty = make_synthetic(4, 0, (1, 10, 10))
    assert empty.images.shape == (0, 1, 10, 10) and empty.class_count == 4
    a, b = make_synthetic(4, 5, seed=3), make_synthetic(4, 5, seed=3)
    assert np.array_equal(a.images, b.images) and np.array_equal(a.labels, b.labels)


def test_synthetic_nearest_centroid_oracle(synthetic):
    acc = nearest_centroid_accuracy(synthetic.train.images, synthetic.train.labels,
                                    synthetic.test.images, synthetic.test.labels)
    assert acc >= 0.95


def test_synthetic_rejects_one_class():
    with pytest.raises(ValueError):
        make_synthetic(1, 5)


def test_corpus_sizes(synthetic):
    assert len(synthetic.train) == 6000 and len(synthetic.test) == 2000
    assert np.array_equal(np.bincount(synthetic.test.labels), np.full(10, 200))


@given(images01, st.sampled_from(["glass", "motion", "zoom"]), st.integers(0, 5), st.integers(0, 99))
def test_corruptions_preserve_shape_and_range(img, kind, sev, seed):
    out = corrupt(img, CorruptionSpec(kind, sev, seed))
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    if sev == 0:
        assert np.array_equal(out, img)
    assert np.array_equal(out, corrupt(img, CorruptionSpec(kind, sev, seed)))


def test_motion_delta_image_by_hand():
    img = np.zeros((1, 5, 5), np.float32)
    img[0, 2, 2] = 1.0
    out = corrupt(img, CorruptionSpec("motion", 1))
    expected = np.zeros((1, 5, 5))
    expected[0, 2, 1:4] = 1 / 3
    assert np.allclose(out, expected, atol=1e-7)


def test_glass_same_seed_same_output():
    img = np.random.default_rng(0).uniform(size=(1, 8, 8)).astype(np.float32)
    a = corrupt(img, CorruptionSpec("glass", 2, seed=11))
    assert np.array_equal(a, corrupt(img, CorruptionSpec("glass", 2, seed=11)))
    assert not np.array_equal(a, corrupt(img, CorruptionSpec("glass", 2, seed=12)))
    # swaps only permute pixel values
    assert np.allclose(np.sort(a.ravel()), np.sort(img.ravel()))


def test_corrupt_batch_uses_per_image_seeds():
    imgs = np.random.default_rng(0).uniform(size=(3, 1, 6, 6)).astype(np.float32)
    out = corrupt_batch(imgs, CorruptionSpec("glass", 1, seed=5))
    for i in range(3):
        assert np.array_equal(out[i], corrupt(imgs[i], CorruptionSpec("glass", 1, seed=5 + i)))


@pytest.mark.parametrize("kind,sev", [("motion", 6), ("glass", -1), ("snow", 1)])
def test_corruption_spec_validation(kind, sev):
    with pytest.raises(CorruptionError):
        CorruptionSpec(kind, sev)


def test_mix_endpoints_and_midpoint():
    a = (np.zeros((1, 4, 4), np.float32), 1)
    b = (np.ones((1, 4, 4), np.float32), 2)
    x, y = mix_samples(a, b, 1.0)
    assert np.array_equal(x, a[0]) and y == 1
    x, y = mix_samples(a, b, 0.5)
    assert np.allclose(x, 0.5) and y == 1
    _, y = mix_samples(a, b, 0.3)
    assert y == 2


def test_cutmix_area_on_28x28():
    a = (np.zeros((1, 28, 28), np.float32), 0)
    b = (np.ones((1, 28, 28), np.float32), 1)
    for seed in range(5):
        x, y = mix_samples(a, b, 0.9, "cutmix", seed)
        area = int(x.sum())
        assert abs(area - 78.4) <= 28  # within one pixel row
        top, left, ph, pw = cutmix_box(28, 28, 0.1, np.random.default_rng(seed))
        assert x[0, top:top + ph, left:left + pw].all() and area == ph * pw
        assert y == 0


def test_mix_rejects_bad_ratio_and_shapes():
    a = (np.zeros((1, 4, 4)), 0)
    with pytest.raises(ValueError):
        mix_samples(a, a, 1.2)
    with pytest.raises(ValueError):
        mix_samples(a, (np.zeros((1, 3, 3)), 1), 0.5)


@given(images01, st.floats(0, 1), st.sampled_from(["blend", "cutmix"]), st.integers(0, 50))
def test_mixes_preserve_shape_and_range(img, ratio, mode, seed):
    other = np.clip(1.0 - img, 0, 1).astype(np.float32)
    x, _ = mix_samples((img, 0), (other, 1), ratio, mode, seed)
    assert x.shape == img.shape and x.min() >= 0 and x.max() <= 1


def test_mix_ratio_draw_mean_matches_analytic():
    rng = np.random.default_rng(0)
    draws = [draw_mix_ratio(rng, 1.0, 0.9) for _ in range(10_000)]
    assert abs(np.mean(draws) - 0.905) < 2e-3


def _constant_model(cls=3, classes=10, shape=(1, 4, 4)):
    n = int(np.prod(shape))
    layers = [flatten(), dense("fc", n, classes)]
    b = np.zeros(classes, np.float32)
    b[cls] = 1.0
    return Model("custom", 1, shape, classes, layers,
                 {"fc.weight": np.zeros((classes, n), np.float32), "fc.bias": b})


def test_failing_set_of_constant_model():
    ds = make_synthetic(10, 10, (1, 4, 4), seed=0)
    failing, passing = extract_failing_set(_constant_model(3), ds)
    assert len(failing) == 90 and len(passing) == 10
    assert (passing.labels == 3).all()


def test_failing_set_partition_order_stable_and_idempotent(baseline, synthetic):
    ds = synthetic.test.subset(np.arange(300))
    failing, passing = extract_failing_set(baseline, ds)
    assert len(failing) + len(passing) == len(ds)
    f2, p2 = extract_failing_set(baseline, failing)
    assert len(p2) == 0 and np.array_equal(f2.images, failing.images)


def test_perfect_model_has_empty_failing_set(baseline, synthetic):
    ds = synthetic.test
    _, passing = extract_failing_set(baseline, ds)
    failing, _ = extract_failing_set(baseline, passing)
    assert len(failing) == 0


def test_failing_set_shape_mismatch():
    with pytest.raises(DatasetError):
        extract_failing_set(_constant_model(classes=5), make_synthetic(10, 1, (1, 4, 4)))


def test_dataset_validation():
    with pytest.raises(DatasetError):
        LabeledDataset(np.full((1, 1, 2, 2), 2.0), [0], 2)
    with pytest.raises(DatasetError):
        LabeledDataset(np.zeros((1, 1, 2, 2)), [5], 2)
    with pytest.raises(DatasetError):
        LabeledDataset(np.zeros((2, 1, 2, 2)), [0], 2)


def test_native_container_roundtrip_and_checksum(tmp_path):
    ds = make_synthetic(3, 4, (1, 6, 6), seed=1, split="test")
    path = save_native(ds, tmp_path / "test.airdata")
    back = load_native(path)
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)
    assert back.split == "test" and back.class_count == 3
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(DatasetError):
        load_native(path)


def test_load_dataset_from_native_directory(tmp_path):
    splits = synthetic_splits(3, 4, 2, (1, 6, 6))
    save_native(splits.train, tmp_path / "train.airdata")
    save_native(splits.test, tmp_path / "test.airdata")
    loaded = load_dataset(str(tmp_path))
    assert len(loaded.train) == 12 and len(loaded.test) == 6


def test_load_dataset_missing_mnist(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset("mnist", data_dir=tmp_path)
