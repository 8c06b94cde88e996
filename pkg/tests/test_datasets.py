import numpy as np
import pytest

from pdl import datasets


def _record(label, fill=None, rng=None):
    rec = np.empty(3073, dtype=np.uint8)
    rec[0] = label
    if rng is not None:
        rec[1:] = rng.integers(0, 256, 3072)
    else:
        rec[1:] = fill
    return rec.tobytes()


class TestLoadCifar10:
    def test_single_record(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(_record(7, fill=3))
        ds = datasets.load_cifar10([path], "train")
        assert len(ds) == 1
        assert ds.labels[0] == 7
        assert ds.num_classes == 10
        assert ds.images.shape == (1, 3, 32, 32)
        assert np.all(ds.images == 3)

    def test_truncated_record_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x00" * 3072)
        with pytest.raises(datasets.MalformedFileError) as err:
            datasets.load_cifar10([path], "train")
        assert "bad.bin" in str(err.value)
        assert "byte 0" in str(err.value)

    def test_standard_batch_size(self, tmp_path):
        rng = np.random.default_rng(0)
        raw = rng.integers(0, 256, (10_000, 3073)).astype(np.uint8)
        raw[:, 0] = rng.integers(0, 10, 10_000)
        path = tmp_path / "data_batch_1.bin"
        path.write_bytes(raw.tobytes())
        assert path.stat().st_size == 30_730_000
        ds = datasets.load_cifar10([path], "train")
        assert len(ds) == 10_000

    def test_invalid_label(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(_record(10, fill=0))
        with pytest.raises(datasets.InvalidLabelError):
            datasets.load_cifar10([path], "train")

    def test_file_order_preserved(self, tmp_path):
        p1 = tmp_path / "a.bin"
        p2 = tmp_path / "b.bin"
        p1.write_bytes(_record(1, fill=1) + _record(2, fill=2))
        p2.write_bytes(_record(3, fill=3))
        ds = datasets.load_cifar10([p1, p2], "train")
        assert list(ds.labels) == [1, 2, 3]
        assert np.all(ds.images[2] == 3)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        raw = b"".join(_record(rng.integers(0, 10), rng=rng)
                       for _ in range(17))
        path = tmp_path / "batch.bin"
        path.write_bytes(raw)
        ds = datasets.load_cifar10([path], "train")
        assert datasets.serialize_cifar10(ds) == raw


class TestLoadStl10:
    def _write(self, tmp_path, n, labels=None):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, n * 27648).astype(np.uint8)
        (tmp_path / "X.bin").write_bytes(img.tobytes())
        if labels is None:
            labels = rng.integers(1, 11, n).astype(np.uint8)
        (tmp_path / "y.bin").write_bytes(np.asarray(labels,
                                                    np.uint8).tobytes())
        return tmp_path / "X.bin", tmp_path / "y.bin", img

    def test_one_indexed_conversion(self, tmp_path):
        xp, yp, _ = self._write(tmp_path, 1, labels=[1])
        ds = datasets.load_stl10(xp, yp)
        assert len(ds) == 1
        assert ds.labels[0] == 0
        assert ds.images.shape == (1, 3, 96, 96)

    def test_label_zero_rejected(self, tmp_path):
        xp, yp, _ = self._write(tmp_path, 1, labels=[0])
        with pytest.raises(datasets.InvalidLabelError):
            datasets.load_stl10(xp, yp)

    def test_count_mismatch(self, tmp_path):
        xp, yp, _ = self._write(tmp_path, 5)
        yp.write_bytes(b"\x01" * 4)
        with pytest.raises(datasets.InconsistencyError):
            datasets.load_stl10(xp, yp)

    def test_partial_record(self, tmp_path):
        xp, yp, _ = self._write(tmp_path, 2)
        xp.write_bytes(b"\x00" * (27648 + 5))
        with pytest.raises(datasets.MalformedFileError):
            datasets.load_stl10(xp, yp)

    def test_column_major_transpose(self, tmp_path):
        # first 96 bytes of a plane run down the first column
        img = np.zeros(27648, dtype=np.uint8)
        img[:96] = np.arange(96)
        (tmp_path / "X.bin").write_bytes(img.tobytes())
        (tmp_path / "y.bin").write_bytes(b"\x05")
        ds = datasets.load_stl10(tmp_path / "X.bin", tmp_path / "y.bin")
        assert np.array_equal(ds.images[0, 0, :, 0], np.arange(96))
        assert np.all(ds.images[0, 0, :, 1:] == 0)


def _reference_bilinear(img, new_w, new_h):
    """Scalar reference implementation of the documented convention."""
    channels, height, width = img.shape
    out = np.zeros((channels, new_h, new_w), dtype=np.uint8)
    for c in range(channels):
        for y in range(new_h):
            sy = min(max((y + 0.5) * height / new_h - 0.5, 0.0), height - 1.0)
            y0 = int(np.floor(sy))
            y1 = min(y0 + 1, height - 1)
            fy = sy - y0
            for x in range(new_w):
                sx = min(max((x + 0.5) * width / new_w - 0.5, 0.0),
                         width - 1.0)
                x0 = int(np.floor(sx))
                x1 = min(x0 + 1, width - 1)
                fx = sx - x0
                v = (img[c, y0, x0] * (1 - fy) * (1 - fx)
                     + img[c, y0, x1] * (1 - fy) * fx
                     + img[c, y1, x0] * fy * (1 - fx)
                     + img[c, y1, x1] * fy * fx)
                out[c, y, x] = min(max(int(np.floor(v + 0.5)), 0), 255)
    return out


class TestResizeBilinear:
    def test_identity(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (3, 9, 13)).astype(np.uint8)
        assert np.array_equal(datasets.resize_bilinear(img, 13, 9), img)

    def test_constant_field(self):
        img = np.full((3, 2, 2), 100, dtype=np.uint8)
        out = datasets.resize_bilinear(img, 4, 4)
        assert out.shape == (3, 4, 4)
        assert np.all(out == 100)

    def test_zero_dimension_rejected(self):
        img = np.zeros((3, 4, 4), dtype=np.uint8)
        with pytest.raises(ValueError):
            datasets.resize_bilinear(img, 0, 4)

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, (3, 96, 96)).astype(np.uint8)
        out = datasets.resize_bilinear(img, 32, 32)
        assert np.array_equal(out, _reference_bilinear(img, 32, 32))

    def test_bounded_by_source_range(self):
        rng = np.random.default_rng(5)
        img = rng.integers(40, 200, (3, 96, 96)).astype(np.uint8)
        out = datasets.resize_bilinear(img, 32, 32)
        for c in range(3):
            assert out[c].min() >= img[c].min()
            assert out[c].max() <= img[c].max()

    def test_upscale_matches_reference(self):
        rng = np.random.default_rng(6)
        img = rng.integers(0, 256, (1, 5, 7)).astype(np.uint8)
        out = datasets.resize_bilinear(img, 11, 8)
        assert np.array_equal(out, _reference_bilinear(img, 11, 8))


def test_subsample_deterministic(tmp_path):
    rng = np.random.default_rng(7)
    images = rng.integers(0, 256, (20, 3, 4, 4)).astype(np.uint8)
    labels = rng.integers(0, 10, 20)
    ds = datasets.LabeledDataset(images, labels, 10)
    a = datasets.subsample(ds, 7, seed=1)
    b = datasets.subsample(ds, 7, seed=1)
    assert np.array_equal(a.images, b.images)
    assert len(a) == 7


def test_dataset_length_mismatch_rejected():
    with pytest.raises(datasets.InconsistencyError):
        datasets.LabeledDataset(np.zeros((2, 3, 4, 4), np.uint8),
                                np.zeros(3, np.int64), 10)
