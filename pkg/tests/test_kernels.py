"""Compiled and pure decode kernels must agree bit for bit."""

import numpy as np
import pytest

from chansim import _kernels_py, kernels
from chansim import codespace as cs


compiled = pytest.importorskip(
    "chansim._kernels", reason="compiled kernel extension not built"
)


def hamming_inputs():
    book = cs.hamming74_codebook()
    values = np.array(
        [[float(b) for b in format(x, "07b")] for x in range(128)], dtype=np.float64
    )
    erased = np.zeros(values.shape, dtype=np.uint8)
    return book, values, erased


class TestBackendEquivalence:
    def test_distance_matrix_binary_exhaustive(self):
        book, values, erased = hamming_inputs()
        fast = compiled.distance_matrix(values, erased, book.vectors)
        pure = _kernels_py.distance_matrix(values, erased, book.vectors)
        assert np.array_equal(fast, pure)

    def test_decode_batch_binary_exhaustive(self):
        book, values, erased = hamming_inputs()
        fast = compiled.decode_batch(values, erased, book.vectors, 1.0)
        pure = _kernels_py.decode_batch(values, erased, book.vectors, 1.0)
        for f, p in zip(fast, pure):
            assert np.array_equal(f, p)

    def test_erasure_patterns_agree(self):
        book, values, _ = hamming_inputs()
        rng = np.random.default_rng(55)
        erased = (rng.random(values.shape) < 0.3).astype(np.uint8)
        erased[:, 0] = 0  # keep at least one live dimension
        fast = compiled.decode_batch(values, erased, book.vectors, 1.0)
        pure = _kernels_py.decode_batch(values, erased, book.vectors, 1.0)
        for f, p in zip(fast, pure):
            assert np.array_equal(f, p)

    def test_analog_distances_close(self):
        rng = np.random.default_rng(7)
        protos = np.ascontiguousarray(rng.normal(size=(8, 2)))
        values = np.ascontiguousarray(rng.normal(size=(500, 2)))
        erased = np.zeros(values.shape, dtype=np.uint8)
        fast = compiled.distance_matrix(values, erased, protos)
        pure = _kernels_py.distance_matrix(values, erased, protos)
        assert np.allclose(fast, pure, rtol=1e-12, atol=0.0)

    def test_analog_decode_choices_agree(self):
        rng = np.random.default_rng(8)
        protos = np.ascontiguousarray(rng.normal(size=(8, 2)))
        values = np.ascontiguousarray(rng.normal(size=(2000, 2)))
        erased = np.zeros(values.shape, dtype=np.uint8)
        fi, fd, fs = compiled.decode_batch(values, erased, protos, np.inf)
        pi, pd, ps = _kernels_py.decode_batch(values, erased, protos, np.inf)
        assert np.array_equal(fi, pi)
        assert np.array_equal(fs, ps)
        assert np.allclose(fd, pd, rtol=1e-12)


class TestStatusSemantics:
    def test_batch_matches_scalar_decode_exhaustively(self):
        # dual route: the batched kernel decision against the scalar
        # nn_decode path, over the whole 7-bit space
        book, values, erased = hamming_inputs()
        idx, dist, status = kernels.decode_batch(values, erased, book.vectors, 1.0)
        for x in range(128):
            outcome = cs.nn_decode(book, cs.parse_signal(format(x, "07b")))
            assert dist[x] == outcome.distance or status[x] == kernels.STATUS_UNCORRECTABLE
            if status[x] == kernels.STATUS_EXACT:
                assert outcome.status is cs.DecodeStatus.EXACT_MATCH
                assert book.symbols[idx[x]] == outcome.symbol
            elif status[x] == kernels.STATUS_CORRECTED:
                assert outcome.status is cs.DecodeStatus.CORRECTED
                assert book.symbols[idx[x]] == outcome.symbol

    def test_tie_statuses(self):
        protos = np.array([[0.0, 0.0], [1.0, 1.0]])
        values = np.array([[0.5, 0.5], [0.0, 0.0], [3.0, 3.0]])
        erased = np.zeros(values.shape, dtype=np.uint8)
        _, _, status = kernels.decode_batch(values, erased, protos, 2.0)
        assert status[0] == kernels.STATUS_AMBIGUOUS
        assert status[1] == kernels.STATUS_EXACT
        assert status[2] == kernels.STATUS_UNCORRECTABLE

    def test_backend_reports_name(self):
        assert kernels.BACKEND in ("compiled", "pure")
