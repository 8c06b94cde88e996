"""Shared fixtures: synthetic CIFAR-format data and small trained stages.

Real-data acceptance runs read dataset locations from the PDL_CIFAR_DIR
and PDL_STL_DIR environment variables; without them those tests skip.
"""

import os

import numpy as np
import pytest

from pdl import datasets, dictionary, patches

TINTS = np.array([[1.0, 0.4, 0.4], [0.4, 1.0, 0.4], [0.4, 0.4, 1.0],
                  [1.0, 1.0, 0.4], [0.4, 1.0, 1.0], [1.0, 0.4, 1.0],
                  [1.0, 0.7, 0.4], [0.4, 0.7, 1.0], [0.8, 0.8, 0.8],
                  [0.6, 1.0, 0.7]])


def synthetic_images(n, seed, side=32, noise=80.0, amp=24.0):
    """Class-structured noisy gratings: class selects orientation,
    frequency band and color tint."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    images = np.empty((n, 3, side, side), dtype=np.uint8)
    for i in range(n):
        c = labels[i]
        angle = c * np.pi / 10
        freq = 0.4 + 0.07 * (c % 5)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(freq * (np.cos(angle) * xx + np.sin(angle) * yy)
                      + phase)
        base = 128 + amp * wave
        for ch in range(3):
            images[i, ch] = np.clip(
                base * TINTS[c, ch] + rng.normal(0, noise, (side, side)),
                0, 255).astype(np.uint8)
    return images, labels.astype(np.int64)


def write_cifar_batch(path, images, labels):
    rec = np.empty((len(labels), 3073), dtype=np.uint8)
    rec[:, 0] = labels
    rec[:, 1:] = images.reshape(len(labels), -1)
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())


def make_cifar_dir(root, n_train=300, n_test=100, seed=1):
    """Write synthetic data in the CIFAR-10 binary layout under `root`."""
    os.makedirs(root, exist_ok=True)
    tr_images, tr_labels = synthetic_images(n_train, seed)
    te_images, te_labels = synthetic_images(n_test, seed + 1)
    per = n_train // 5
    for i in range(5):
        write_cifar_batch(os.path.join(root, f"data_batch_{i + 1}.bin"),
                          tr_images[i * per:(i + 1) * per],
                          tr_labels[i * per:(i + 1) * per])
    write_cifar_batch(os.path.join(root, "test_batch.bin"),
                      te_images, te_labels)
    return root


@pytest.fixture(scope="session")
def cifar_dir(tmp_path_factory):
    return make_cifar_dir(str(tmp_path_factory.mktemp("cifar")))


@pytest.fixture(scope="session")
def train_dataset(cifar_dir):
    paths = [os.path.join(cifar_dir, f"data_batch_{i}.bin")
             for i in range(1, 6)]
    return datasets.load_cifar10(paths, "train")


@pytest.fixture(scope="session")
def fitted_whitener(train_dataset):
    raw = patches.sample_random(train_dataset, 6, 4000, seed=11)
    normalized = patches.contrast_normalize(raw)
    return patches.fit_zca(normalized), normalized


@pytest.fixture(scope="session")
def small_dictionary(train_dataset, fitted_whitener):
    whitener, normalized = fitted_whitener
    whitened = patches.apply_zca(whitener, normalized)
    return dictionary.kmeans_spherical(whitened, 24, iters=20, seed=3)


def random_psd(rng, m, rank=None):
    rank = rank or m
    B = rng.normal(size=(m, rank))
    return B @ B.T


def real_cifar_dir():
    return os.environ.get("PDL_CIFAR_DIR")


def real_stl_dir():
    return os.environ.get("PDL_STL_DIR")


needs_cifar = pytest.mark.skipif(
    real_cifar_dir() is None or not os.path.isdir(real_cifar_dir() or ""),
    reason="set PDL_CIFAR_DIR to the CIFAR-10 binary batch directory")
needs_stl = pytest.mark.skipif(
    real_stl_dir() is None or not os.path.isdir(real_stl_dir() or ""),
    reason="set PDL_STL_DIR to the STL-10 binary directory")
