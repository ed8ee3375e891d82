import numpy as np
import pytest

import oracles
from conftest import make_matrix, random_matrix
from slimboard.errors import ParseError, ValidationError
from slimboard.lfm import (
    DENSE_CUTOFF,
    LfmModel,
    load_lfm,
    orthonormality_defect,
    predict_item_users,
    predict_rating,
    predict_user_items,
    reconstruction_error,
    save_lfm,
    train_pure_svd,
)


class TestTrainPureSvd:
    def test_full_rank_reconstructs_exactly(self, rng):
        X = random_matrix(rng, 10, 6)
        m = train_pure_svd(X, 6, seed=0)
        assert reconstruction_error(X, m) == pytest.approx(0.0, abs=1e-8)
        assert np.allclose(m.P, X.csr.toarray() @ m.Q)

    def test_orthonormal_columns(self, rng):
        X = random_matrix(rng, 20, 12)
        m = train_pure_svd(X, 5, seed=0)
        assert orthonormality_defect(m) <= 1e-10

    def test_matches_svd_oracle(self, rng):
        for _ in range(10):
            X = random_matrix(rng, 20, 15, density=0.5)
            f = int(rng.integers(1, 8))
            m = train_pure_svd(X, f, seed=0)
            want = oracles.svd_reconstruction_error(X.csr.toarray(), f)
            assert reconstruction_error(X, m) == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_rank_bounds(self, rng):
        X = random_matrix(rng, 5, 4)
        with pytest.raises(ValidationError):
            train_pure_svd(X, 0)
        with pytest.raises(ValidationError):
            train_pure_svd(X, 5)

    def test_sign_convention_pins_columns(self, rng):
        X = random_matrix(rng, 15, 8)
        m = train_pure_svd(X, 4, seed=0)
        for k in range(4):
            col = m.Q[:, k]
            assert col[np.argmax(np.abs(col))] > 0.0

    def test_deterministic_across_runs(self, rng):
        X = random_matrix(rng, 18, 9)
        a = train_pure_svd(X, 4, seed=7)
        b = train_pure_svd(X, 4, seed=7)
        assert np.array_equal(a.Q, b.Q) and np.array_equal(a.P, b.P)

    def test_randomized_path_invariants_on_noise(self, rng):
        """Above the dense cutoff the randomized range finder takes over."""
        X = random_matrix(rng, DENSE_CUTOFF + 40, DENSE_CUTOFF + 20, density=0.02)
        model = train_pure_svd(X, 10, seed=3)
        assert model.Q.shape == (X.num_items, 10)
        assert orthonormality_defect(model) <= 1e-8
        assert np.allclose(model.P, X.csr.toarray() @ model.Q)

    def test_randomized_path_agrees_with_dense_on_rating_like_data(self):
        """On data with a decaying spectrum (the intended regime) the
        randomized reconstruction error tracks the exact one closely."""
        from slimboard.synth import synthetic_ratings

        X = synthetic_ratings(320, DENSE_CUTOFF + 30, 12_000, seed=5)
        f = 12
        model = train_pure_svd(X, f, seed=3)
        want = oracles.svd_reconstruction_error(X.csr.toarray(), f)
        got = reconstruction_error(X, model)
        assert got == pytest.approx(want, rel=1e-3)


class TestPredictions:
    def setup_method(self):
        self.Q = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        self.P = np.array([[2.0, 0.0], [0.0, 4.0]])
        self.m = LfmModel(Q=self.Q, P=self.P, seed=0)

    def test_single_rating(self):
        assert predict_rating(self.m, 0, 2) == pytest.approx(1.0)
        assert predict_rating(self.m, 1, 1) == pytest.approx(4.0)

    def test_user_items_vector(self):
        assert predict_user_items(self.m, 1).tolist() == [0.0, 4.0, 2.0]

    def test_item_users_vector(self):
        assert predict_item_users(self.m, 0).tolist() == [2.0, 0.0]

    def test_sign_invariance_of_predictions(self, rng):
        """Flipping any factor column of Q and P together leaves predictions
        unchanged; the stored convention is one fixed representative."""
        X = random_matrix(rng, 12, 7)
        m = train_pure_svd(X, 3, seed=0)
        flipped = LfmModel(Q=m.Q * np.array([1, -1, 1]), P=m.P * np.array([1, -1, 1]), seed=0)
        for u in range(3):
            assert np.allclose(
                predict_user_items(m, u), predict_user_items(flipped, u), atol=1e-12
            )

    def test_rank_properties(self):
        assert self.m.rank == 2
        assert self.m.num_items == 3
        assert self.m.num_users == 2


class TestPersistence:
    def test_roundtrip_bit_exact(self, rng, tmp_path):
        X = random_matrix(rng, 14, 9)
        m = train_pure_svd(X, 5, seed=11)
        path = tmp_path / "m.lfm"
        save_lfm(m, path, config_hash="beef")
        back = load_lfm(path)
        assert np.array_equal(back.Q, m.Q)
        assert np.array_equal(back.P, m.P)
        assert back.seed == 11

    def test_rewrite_is_byte_identical(self, rng, tmp_path):
        X = random_matrix(rng, 10, 5)
        m = train_pure_svd(X, 3, seed=0)
        a, b = tmp_path / "a", tmp_path / "b"
        save_lfm(m, a)
        save_lfm(m, b)
        assert a.read_bytes() == b.read_bytes()

    def test_truncated_payload_rejected(self, rng, tmp_path):
        X = random_matrix(rng, 8, 5)
        m = train_pure_svd(X, 2, seed=0)
        path = tmp_path / "m.lfm"
        save_lfm(m, path)
        data = path.read_bytes()
        (tmp_path / "cut.lfm").write_bytes(data[:-8])
        with pytest.raises(ParseError):
            load_lfm(tmp_path / "cut.lfm")

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.lfm"
        p.write_bytes(b"LFM v9 1 1 1 0\n")
        with pytest.raises(ParseError):
            load_lfm(p)


class TestReconstructionError:
    def test_zero_rank_error_is_full_norm_at_tiny_rank(self):
        X = make_matrix([[4, 0], [0, 3]])
        m = train_pure_svd(X, 1, seed=0)
        # best rank-1 approximation of diag(4,3) keeps the larger singular value
        assert reconstruction_error(X, m) == pytest.approx(3.0)

    def test_never_negative_under_rounding(self, rng):
        X = random_matrix(rng, 10, 6)
        m = train_pure_svd(X, 6, seed=0)
        assert reconstruction_error(X, m) >= 0.0
