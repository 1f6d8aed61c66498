"""Tensor text files, factor CSVs, and manifests."""

import numpy as np
import pytest

from smartcpd import tensorfile as tf
from smartcpd.tensor import CooTensor, DenseTensor, FactorModel


class TestTensorFiles:
    def test_coo_round_trip(self, tmp_path, rng):
        t = CooTensor((4, 3, 5), [[1, 2, 3], [4, 3, 5], [2, 1, 1]],
                      [1.5, -2.25, 1e-17])
        path = tmp_path / "t.tns"
        tf.write_tensor(path, t)
        back = tf.read_tensor(path)
        assert back.shape == t.shape
        np.testing.assert_array_equal(back.indices, t.indices)
        np.testing.assert_array_equal(back.vals, t.vals)

    def test_dense_round_trip_drops_zeros(self, tmp_path, rng):
        arr = rng.poisson(0.5, size=(3, 4, 2)).astype(float)
        dense = DenseTensor.from_ndarray(arr)
        path = tmp_path / "d.tns"
        tf.write_tensor(path, dense)
        back = tf.read_tensor(path)
        assert back.nnz == np.count_nonzero(arr)
        np.testing.assert_array_equal(back.to_dense().to_ndarray(), arr)

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "c.tns"
        path.write_text(
            "# a tensor\n\n3\n# dims follow\n2 2 2\n1 1 1 5.0  # entry\n\n2 2 2 7\n")
        t = tf.read_tensor(path)
        assert t.shape == (2, 2, 2) and t.nnz == 2
        assert t.to_dense()[(2, 2, 2)] == 7.0

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.tns"
        path.write_text("3\n2 2\n1 1 1\n")
        with pytest.raises(ValueError, match="order"):
            tf.read_tensor(path)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "bad2.tns"
        path.write_text("2\n2 2\n1 1 1 5.0\n")
        with pytest.raises(ValueError, match="fields"):
            tf.read_tensor(path)

    def test_non_integer_index(self, tmp_path):
        path = tmp_path / "bad3.tns"
        path.write_text("2\n2 2\n1.5 1 5.0\n")
        with pytest.raises(ValueError, match="non-integer"):
            tf.read_tensor(path)

    def test_empty_body(self, tmp_path):
        path = tmp_path / "empty.tns"
        path.write_text("2\n3 4\n")
        t = tf.read_tensor(path)
        assert t.nnz == 0 and t.shape == (3, 4)

    def test_densify_threshold(self):
        t = CooTensor((4, 4), [[1, 1]], [1.0])
        assert isinstance(tf.densify_if_small(t), DenseTensor)
        assert isinstance(tf.densify_if_small(t, max_entries=8), CooTensor)


class TestFactorFiles:
    def test_round_trip_full_precision(self, tmp_path, rng):
        model = FactorModel([rng.random((4, 3)), rng.random((5, 3))])
        tf.write_factors(tmp_path, model)
        back = tf.read_factors(tmp_path, 2)
        for a, b in zip(model.factors, back.factors):
            np.testing.assert_array_equal(a, b)

    def test_prefix(self, tmp_path, rng):
        model = FactorModel([rng.random((4, 2)), rng.random((5, 2))])
        tf.write_factors(tmp_path, model, prefix="truth_mode")
        assert (tmp_path / "truth_mode_1.csv").exists()
        back = tf.read_factors(tmp_path, 2, prefix="truth_mode")
        np.testing.assert_array_equal(back.factors[1], model.factors[1])

    def test_rank1_kept_two_dimensional(self, tmp_path, rng):
        model = FactorModel([rng.random((4, 1)), rng.random((5, 1))])
        tf.write_factors(tmp_path, model)
        back = tf.read_factors(tmp_path, 2)
        assert back.rank == 1 and back.factors[0].shape == (4, 1)


class TestManifests:
    def test_round_trip(self, tmp_path):
        payload = {"kind": "fit", "seed": 42, "loss": "gen-kl", "nested": [1, 2]}
        path = tmp_path / "m.json"
        tf.write_manifest(path, payload)
        assert tf.read_manifest(path) == payload
