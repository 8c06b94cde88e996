"""Single binary container tying the pipeline stages together.

Layout (all integers little-endian):

    magic "PINV" | u32 version | u32 section count
    table: per section, 4-byte ASCII tag | u64 offset | u64 length
    section payloads

Sections keep their on-disk order across a read/write cycle and unknown
tags are preserved verbatim, so stage commands can append to a model file
written by a newer or older tool.
"""

import struct

import numpy as np

from pdl.classifier import LinearModel
from pdl.dictionary import Dictionary
from pdl.nystrom import NystromTransform, PcaTransform
from pdl.patches import ZcaWhitener
from pdl.selection import ExemplarSet

MAGIC = b"PINV"
VERSION = 1

TAG_WHITENER = b"ZCAW"
TAG_DICTIONARY = b"DICT"
TAG_EXEMPLARS = b"EXEM"
TAG_NYSTROM = b"NYST"
TAG_PCA = b"PCAT"
TAG_SVM = b"LSVM"

_PROVENANCE = {"kmeans": 0, "random": 1}
_PROVENANCE_INV = {v: k for k, v in _PROVENANCE.items()}


class ModelFileError(Exception):
    """Bad magic, version or section structure."""


def _f64(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _u32(arr):
    return np.ascontiguousarray(arr, dtype="<u4").tobytes()


def _read_f64(buf, off, count):
    return (np.frombuffer(buf, dtype="<f8", count=count, offset=off).copy(),
            off + 8 * count)


def _read_u32(buf, off, count):
    arr = np.frombuffer(buf, dtype="<u4", count=count, offset=off)
    return arr.astype(np.int64), off + 4 * count


class ModelFile:
    """Ordered tag -> payload map with typed section codecs."""

    def __init__(self):
        self._sections = {}

    def tags(self):
        return list(self._sections)

    def has(self, tag):
        return tag in self._sections

    def get_raw(self, tag):
        return self._sections[tag]

    def put_raw(self, tag, payload):
        if len(tag) != 4:
            raise ValueError("section tags are exactly 4 bytes")
        self._sections[tag] = bytes(payload)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < 12 or raw[:4] != MAGIC:
            raise ModelFileError(f"{path}: not a model file (bad magic)")
        version, count = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise ModelFileError(f"{path}: unsupported version {version}")
        mf = cls()
        pos = 12
        for _ in range(count):
            if pos + 20 > len(raw):
                raise ModelFileError(f"{path}: truncated section table")
            tag = raw[pos:pos + 4]
            offset, length = struct.unpack_from("<QQ", raw, pos + 4)
            pos += 20
            if offset + length > len(raw):
                raise ModelFileError(
                    f"{path}: section {tag!r} exceeds file size")
            mf._sections[tag] = raw[offset:offset + length]
        return mf

    def save(self, path):
        tags = list(self._sections)
        header_len = 12 + 20 * len(tags)
        chunks = []
        table = b""
        offset = header_len
        for tag in tags:
            payload = self._sections[tag]
            table += tag + struct.pack("<QQ", offset, len(payload))
            chunks.append(payload)
            offset += len(payload)
        with open(path, "wb") as fh:
            fh.write(MAGIC + struct.pack("<II", VERSION, len(tags)))
            fh.write(table)
            for chunk in chunks:
                fh.write(chunk)

    # whitener: u32 d | f64 epsilon | f64*d mean | f64*d*d transform
    def set_whitener(self, whitener):
        payload = struct.pack("<I", whitener.dim)
        payload += struct.pack("<d", whitener.epsilon)
        payload += _f64(whitener.mean) + _f64(whitener.transform)
        self.put_raw(TAG_WHITENER, payload)

    def get_whitener(self):
        buf = self._sections[TAG_WHITENER]
        d = struct.unpack_from("<I", buf, 0)[0]
        epsilon = struct.unpack_from("<d", buf, 4)[0]
        mean, off = _read_f64(buf, 12, d)
        transform, _ = _read_f64(buf, off, d * d)
        return ZcaWhitener(mean=mean, transform=transform.reshape(d, d),
                           epsilon=epsilon)

    # dictionary: u32 m,d,side,channels,provenance | f64*m*d codes
    def set_dictionary(self, dictionary):
        payload = struct.pack("<IIIII", dictionary.size, dictionary.dim,
                              dictionary.patch_side, dictionary.channels,
                              _PROVENANCE[dictionary.provenance])
        payload += _f64(dictionary.codes)
        self.put_raw(TAG_DICTIONARY, payload)

    def get_dictionary(self):
        buf = self._sections[TAG_DICTIONARY]
        m, d, side, channels, prov = struct.unpack_from("<IIIII", buf, 0)
        codes, _ = _read_f64(buf, 20, m * d)
        return Dictionary(codes=codes.reshape(m, d), patch_side=side,
                          channels=channels,
                          provenance=_PROVENANCE_INV[prov])

    # exemplars: u32 m,k | f64 preference | u32*k indices | u32*m assignment
    def set_exemplars(self, exemplars):
        m = len(exemplars.assignment)
        payload = struct.pack("<II", m, exemplars.k)
        payload += struct.pack("<d", exemplars.preference_used)
        payload += _u32(exemplars.indices) + _u32(exemplars.assignment)
        self.put_raw(TAG_EXEMPLARS, payload)

    def get_exemplars(self):
        buf = self._sections[TAG_EXEMPLARS]
        m, k = struct.unpack_from("<II", buf, 0)
        preference = struct.unpack_from("<d", buf, 8)[0]
        indices, off = _read_u32(buf, 16, k)
        assignment, _ = _read_u32(buf, off, m)
        return ExemplarSet(indices=indices, assignment=assignment,
                           preference_used=preference)

    # nystrom: u32 k | u32*k selected | f64*k singulars | f64*k*k lambda_v
    def set_nystrom(self, transform):
        k = transform.k
        payload = struct.pack("<I", k)
        payload += _u32(transform.selected)
        payload += _f64(transform.singular_values)
        payload += _f64(transform.lambda_v)
        self.put_raw(TAG_NYSTROM, payload)

    def get_nystrom(self):
        buf = self._sections[TAG_NYSTROM]
        k = struct.unpack_from("<I", buf, 0)[0]
        selected, off = _read_u32(buf, 4, k)
        singular, off = _read_f64(buf, off, k)
        lambda_v, _ = _read_f64(buf, off, k * k)
        return NystromTransform(selected=selected, A=None,
                                lambda_v=lambda_v.reshape(k, k),
                                singular_values=singular)

    # pca: u32 m,k | f64*m mean | f64*k eigenvalues | f64*m*k components
    def set_pca(self, transform):
        m, k = transform.components.shape
        payload = struct.pack("<II", m, k)
        payload += _f64(transform.mean) + _f64(transform.eigenvalues)
        payload += _f64(transform.components)
        self.put_raw(TAG_PCA, payload)

    def get_pca(self):
        buf = self._sections[TAG_PCA]
        m, k = struct.unpack_from("<II", buf, 0)
        mean, off = _read_f64(buf, 8, m)
        eigenvalues, off = _read_f64(buf, off, k)
        components, _ = _read_f64(buf, off, m * k)
        return PcaTransform(components=components.reshape(m, k),
                            eigenvalues=eigenvalues, mean=mean)

    # svm: u32 classes,d | f64 lambda | weights | biases | means | scales
    def set_svm(self, model):
        c, d = model.weights.shape
        payload = struct.pack("<II", c, d)
        payload += struct.pack("<d", model.lam)
        payload += _f64(model.weights) + _f64(model.biases)
        payload += _f64(model.feature_means) + _f64(model.feature_scales)
        self.put_raw(TAG_SVM, payload)

    def get_svm(self):
        buf = self._sections[TAG_SVM]
        c, d = struct.unpack_from("<II", buf, 0)
        lam = struct.unpack_from("<d", buf, 8)[0]
        off = 16
        weights, off = _read_f64(buf, off, c * d)
        biases, off = _read_f64(buf, off, c)
        means, off = _read_f64(buf, off, d)
        scales, _ = _read_f64(buf, off, d)
        return LinearModel(weights=weights.reshape(c, d), biases=biases,
                           feature_means=means, feature_scales=scales,
                           lam=lam)
