import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_matrix, random_matrix
from slimboard.elicitation import (
    BanditQuestionnaire,
    StaticQuestionnaire,
    bandit_next_question,
    bandit_observe,
    bandit_recommend,
    bandit_recommender,
    gain_recommender,
    new_session_state,
    q_gslim,
    q_greedy,
    q_pop,
    q_var,
    r_gain,
    record_answer,
    slim_recommender,
    write_questionnaire_csv,
)
from slimboard.errors import ValidationError
from slimboard.greedy import train_greedy
from slimboard.lfm import LfmModel, train_pure_svd
from slimboard.slim import HyperParams, slim_loss, train_coordinate_descent


class TestSessionState:
    def test_starts_blank(self):
        s = new_session_state(5, seed=0)
        assert s.x.tolist() == [0.0] * 5
        assert s.asked == [] and s.answers == []
        assert s.bandit_weights is None

    def test_uniform_weights_on_request(self):
        s = new_session_state(5, seed=0, num_train_users=4)
        assert s.bandit_weights.tolist() == [0.25] * 4

    def test_record_answer_updates_row(self):
        s = new_session_state(3, seed=0)
        record_answer(s, 1, 4.0)
        assert s.x.tolist() == [0.0, 4.0, 0.0]
        assert s.asked == [1] and s.answers == [4.0]

    def test_dont_know_leaves_row_zero(self):
        s = new_session_state(3, seed=0)
        record_answer(s, 1, 0.0)
        assert s.x.tolist() == [0.0, 0.0, 0.0]
        assert s.asked == [1] and s.answers == [0.0]

    def test_repeat_item_rejected(self):
        s = new_session_state(3, seed=0)
        record_answer(s, 1, 0.0)
        with pytest.raises(ValidationError):
            record_answer(s, 1, 3.0)

    @pytest.mark.parametrize("bad", [-1.0, -0.5, 5.5, 6.0])
    def test_rating_domain(self, bad):
        s = new_session_state(3, seed=0)
        with pytest.raises(ValidationError):
            record_answer(s, 1, bad)

    def test_half_star_ratings_accepted(self):
        # dataset ratings live in (0, 5]; the protocol copies them verbatim
        s = new_session_state(3, seed=0)
        record_answer(s, 1, 0.5)
        assert s.x[1] == 0.5

    def test_tuple_seeds_give_distinct_streams(self):
        a = new_session_state(3, seed=(0, 1))
        b = new_session_state(3, seed=(0, 2))
        assert a.rng.random() != b.rng.random()


class TestStaticQuestionnaire:
    def test_asks_in_order_skipping_rated(self):
        q = StaticQuestionnaire([2, 0, 1])
        s = q.new_state(3, seed=0)
        s.x[0] = 5.0  # already known rating
        assert q.next_question(s) == 2
        q.observe(s, 2, 0.0)
        assert q.next_question(s) == 1
        q.observe(s, 1, 3.0)
        assert q.next_question(s) is None

    def test_duplicate_order_rejected(self):
        with pytest.raises(ValidationError):
            StaticQuestionnaire([1, 1])

    def test_static_order_ignores_answers(self):
        q = StaticQuestionnaire([0, 1, 2])
        seq_a, seq_b = [], []
        for seq, ratings in ((seq_a, [5.0, 1.0, 0.0]), (seq_b, [0.0, 0.0, 0.0])):
            s = q.new_state(3, seed=0)
            while (item := q.next_question(s)) is not None:
                seq.append(item)
                q.observe(s, item, ratings[len(seq) - 1])
        assert seq_a == seq_b == [0, 1, 2]


class TestQPop:
    def test_count_ordering(self):
        # counts [3,5,2]
        X = make_matrix(
            [
                [1, 1, 1],
                [1, 1, 1],
                [1, 1, 0],
                [0, 1, 0],
                [0, 1, 0],
            ]
        )
        assert q_pop(X).order == [1, 0, 2]

    def test_equal_counts_index_order(self):
        X = make_matrix([[1, 1, 1]])
        assert q_pop(X).order == [0, 1, 2]

    def test_already_rated_item_skipped(self):
        X = make_matrix([[1, 1, 1], [0, 1, 0]])
        q = q_pop(X)
        s = q.new_state(3, seed=0)
        s.x[1] = 4.0
        assert q.next_question(s) == 0


class TestQVar:
    def test_entropy_beats_raw_count(self):
        # item0: 8 ratings all 5 (entropy 0); item1: ratings 1 and 5 (entropy 1)
        rows = [[5, 0]] * 8
        rows[0] = [5, 1]
        rows[1] = [5, 5]
        X = make_matrix(rows)
        assert q_var(X).order[0] == 1

    def test_zero_entropy_ties_fall_back_to_count_then_index(self):
        # all items constant-rated -> scores all zero; count desc, then index
        X = make_matrix([[5, 5, 5], [0, 5, 5], [0, 0, 5]])
        assert q_var(X).order == [2, 1, 0]

    def test_spread_beats_constant_at_equal_count(self):
        X = make_matrix([[1, 3], [5, 3], [1, 3], [5, 3]])
        assert q_var(X).order == [0, 1]


class TestQGreedy:
    def test_matches_brute_force_forward_selection(self, rng):
        for _ in range(12):
            m_, n_ = int(rng.integers(3, 9)), int(rng.integers(2, 7))
            X = random_matrix(rng, m_, n_, density=0.6)
            hp = HyperParams(float(rng.random()), float(rng.random()))
            model = train_coordinate_descent(X, hp)
            got = q_greedy(X, model, hp).order

            # oracle: recompute l_SLIM(W_I) per candidate from scratch
            dense = X.csr.toarray()
            W = np.zeros((n_, n_))
            for row in model.rows:
                W[row.item, row.indices] = row.values
            remaining = set(range(n_))
            chosen: list[int] = []
            while remaining:
                scored = []
                for i in sorted(remaining):
                    W_I = np.zeros_like(W)
                    for j in chosen + [i]:
                        W_I[j] = W[j]
                    scored.append(
                        (oracles.dense_slim_loss(dense, W_I, hp.lambda_1, hp.lambda_F), i)
                    )
                best = min(scored)[1]
                chosen.append(best)
                remaining.discard(best)
            assert got == chosen

    def test_all_zero_rows_give_index_order(self, rng):
        X = random_matrix(rng, 5, 4)
        empty = train_coordinate_descent(X, HyperParams(1e9, 0))
        assert q_greedy(X, empty).order == [0, 1, 2, 3]

    def test_length_truncates(self, rng):
        X = random_matrix(rng, 6, 5)
        model = train_coordinate_descent(X, HyperParams(0.1, 0.1))
        assert len(q_greedy(X, model, length=3).order) == 3

    def test_length_bounds(self, rng):
        X = random_matrix(rng, 6, 5)
        model = train_coordinate_descent(X, HyperParams(0.1, 0.1))
        with pytest.raises(ValidationError):
            q_greedy(X, model, length=6)

    def test_item_space_must_match(self, rng):
        X = random_matrix(rng, 6, 5)
        other = random_matrix(rng, 6, 4)
        model = train_coordinate_descent(other, HyperParams(0.1, 0.1))
        with pytest.raises(ValidationError):
            q_greedy(X, model)


class TestQGslim:
    def test_row_order_is_question_order(self, rng):
        X = random_matrix(rng, 10, 6)
        model = train_greedy(X, HyperParams(0.5, 0.5), 4)
        assert q_gslim(model).order == model.row_items()

    def test_requires_greedy_trainer(self, rng):
        X = random_matrix(rng, 6, 4)
        model = train_coordinate_descent(X, HyperParams(0.5, 0.5))
        with pytest.raises(ValidationError):
            q_gslim(model)

    def test_min_length_enforced(self, rng):
        X = random_matrix(rng, 10, 6)
        model = train_greedy(X, HyperParams(0.5, 0.5), 3)
        q_gslim(model, min_length=3)
        with pytest.raises(ValidationError):
            q_gslim(model, min_length=4)


def two_user_lfm() -> LfmModel:
    # predictions: user0 -> items (5, 3); user1 -> items (1, 4)
    Q = np.array([[1.0, 0.0], [0.0, 1.0]])
    P = np.array([[5.0, 3.0], [1.0, 4.0]])
    return LfmModel(Q=Q, P=P, seed=0)


class TestBandit:
    def test_degenerate_weights_pick_that_users_best(self):
        lfm = two_user_lfm()
        s = new_session_state(2, seed=0, num_train_users=2)
        s.bandit_weights = np.array([1.0, 0.0])
        assert bandit_next_question(s, lfm) == 0
        s.bandit_weights = np.array([0.0, 1.0])
        assert bandit_next_question(s, lfm) == 1

    def test_question_reproducible_given_seed(self):
        lfm = two_user_lfm()
        picks = set()
        for _ in range(3):
            s = new_session_state(2, seed=99, num_train_users=2)
            picks.add(bandit_next_question(s, lfm))
        assert len(picks) == 1

    def test_asked_items_never_repeat(self):
        lfm = two_user_lfm()
        q = BanditQuestionnaire(lfm)
        s = q.new_state(2, seed=0)
        first = q.next_question(s)
        q.observe(s, first, 0.0)
        second = q.next_question(s)
        assert second is not None and second != first
        q.observe(s, second, 0.0)
        assert q.next_question(s) is None

    def test_observe_gaussian_update(self):
        lfm = two_user_lfm()
        s = new_session_state(2, seed=0, num_train_users=2)
        bandit_observe(s, 0, 5.0, lfm, 1.0)
        want = np.array([1.0, np.exp(-8.0)])
        want /= want.sum()
        assert np.allclose(s.bandit_weights, want, atol=1e-12)

    def test_observe_matches_spec_arithmetic(self):
        # predictions for the asked item: (5, 3); answer 5 -> (1, e^-2) normalized
        Q = np.array([[1.0], [0.3]])
        P = np.array([[5.0], [3.0]])
        lfm = LfmModel(Q=Q, P=P, seed=0)
        s = new_session_state(2, seed=0, num_train_users=2)
        bandit_observe(s, 0, 5.0, lfm, 1.0)
        assert s.bandit_weights[0] == pytest.approx(0.8808, abs=1e-4)
        assert s.bandit_weights[1] == pytest.approx(0.1192, abs=1e-4)

    def test_dont_know_is_a_no_op_on_weights(self):
        lfm = two_user_lfm()
        s = new_session_state(2, seed=0, num_train_users=2)
        bandit_observe(s, 0, 0.0, lfm, 1.0)
        assert s.bandit_weights.tolist() == [0.5, 0.5]
        assert s.asked == [0]

    def test_equal_likelihoods_leave_weights_unchanged(self):
        Q = np.array([[1.0], [2.0]])
        P = np.array([[4.0], [4.0]])  # both predict 4 for item 0
        lfm = LfmModel(Q=Q, P=P, seed=0)
        s = new_session_state(2, seed=0, num_train_users=2)
        bandit_observe(s, 0, 5.0, lfm, 1.0)
        assert np.allclose(s.bandit_weights, [0.5, 0.5])

    def test_weights_stay_probability_vector(self, rng):
        X = random_matrix(rng, 8, 6)
        lfm = train_pure_svd(X, 3, seed=0)
        q = BanditQuestionnaire(lfm)
        s = q.new_state(6, seed=5)
        for _ in range(6):
            item = q.next_question(s)
            if item is None:
                break
            q.observe(s, item, float(rng.integers(0, 6)))
            assert np.all(s.bandit_weights >= 0.0)
            assert abs(s.bandit_weights.sum() - 1.0) <= 1e-9

    def test_underflow_resets_to_uniform(self):
        # predictions (5, 3), answer 1, sigma tiny: both likelihoods hit 0
        Q = np.array([[1.0], [0.3]])
        P = np.array([[5.0], [3.0]])
        lfm = LfmModel(Q=Q, P=P, seed=0)
        s = new_session_state(1, seed=0, num_train_users=2)
        bandit_observe(s, 0, 1.0, lfm, 0.05)
        assert s.bandit_weights.tolist() == [0.5, 0.5]
        assert s.underflow_resets == 1

    def test_sigma_must_be_positive(self):
        lfm = two_user_lfm()
        s = new_session_state(2, seed=0, num_train_users=2)
        with pytest.raises(ValidationError):
            bandit_observe(s, 0, 5.0, lfm, 0.0)

    def test_recommend_weighted_sum(self):
        # hand-built: weights (0.5, 0.5) -> p~ = (3, 3.5) scores via Q
        lfm = two_user_lfm()
        s = new_session_state(2, seed=0, num_train_users=2)
        recs = bandit_recommend(s, lfm, 2, np.array([0, 1]))
        # p~ = (3.0, 3.5); scores = (3.0, 3.5) -> item1 first
        assert recs == [1, 0]

    def test_recommend_excludes_asked_and_rated(self):
        lfm = two_user_lfm()
        s = new_session_state(2, seed=0, num_train_users=2)
        record_answer(s, 1, 4.0)
        recs = bandit_recommend(s, lfm, 2, np.array([0, 1]))
        assert recs == [0]


class TestRGain:
    def test_gain_ordering(self):
        # gains (62, 31, 0): two 5s, one 5, nothing
        X = make_matrix([[5, 5, 0], [5, 0, 0]])
        assert r_gain(X, 2, np.arange(3)) == [0, 1]

    def test_allowed_restriction(self):
        X = make_matrix([[5, 5, 1], [5, 0, 0]])
        assert r_gain(X, 2, np.array([1, 2])) == [1, 2]

    def test_short_list_when_allowed_small(self):
        X = make_matrix([[5, 5, 0]])
        assert r_gain(X, 5, np.array([2])) == [2]


class TestRecommenderClosures:
    def test_slim_recommender_respects_state_row(self, rng):
        X = random_matrix(rng, 10, 6)
        model = train_greedy(X, HyperParams(0.5, 0.5), 4)
        rec = slim_recommender(model)
        s = new_session_state(6, seed=0)
        record_answer(s, model.row_items()[0], 5.0)
        out = rec(s, 3, np.arange(6))
        assert len(out) <= 3
        assert model.row_items()[0] not in out

    def test_gain_recommender_is_static(self, rng):
        X = random_matrix(rng, 8, 5)
        rec = gain_recommender(X)
        a = rec(new_session_state(5, seed=0), 3, np.arange(5))
        b = rec(new_session_state(5, seed=1), 3, np.arange(5))
        assert a == b

    def test_bandit_recommender_delegates(self):
        lfm = two_user_lfm()
        rec = bandit_recommender(lfm)
        s = new_session_state(2, seed=0, num_train_users=2)
        assert rec(s, 2, np.array([0, 1])) == [1, 0]


class TestQuestionnaireCsv:
    def test_format(self, tmp_path):
        path = tmp_path / "q.csv"
        write_questionnaire_csv([2, 0], ["a", "b", "c"], path)
        assert path.read_text().splitlines() == [
            "position,item_internal,item_external",
            "1,2,c",
            "2,0,a",
        ]


@settings(max_examples=25, deadline=None)
@given(
    ratings=st.lists(
        st.sampled_from([0.0, 1.0, 2.0, 3.0, 4.0, 5.0]), min_size=6, max_size=6
    ),
    seed=st.integers(0, 1000),
)
def test_no_questionnaire_repeats_items(ratings, seed):
    rng = np.random.default_rng(seed)
    X = random_matrix(rng, 8, 6)
    lfm = train_pure_svd(X, 3, seed=0)
    for q in (q_pop(X), q_var(X), BanditQuestionnaire(lfm)):
        s = q.new_state(6, seed=seed)
        seen = []
        while (item := q.next_question(s)) is not None:
            assert item not in seen
            seen.append(item)
            q.observe(s, item, ratings[len(seen) - 1])
        assert len(seen) <= 6
