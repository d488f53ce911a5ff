import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swapinject.defense import (
    AnomalyModel,
    LogEntry,
    UserFeatures,
    extract_all,
    extract_features,
    flood_log,
    load_log,
    median_bandwidth,
    respond,
    save_log,
    score,
    score_all,
    synthetic_corpus,
    train,
)
from swapinject.adversary import plan_attack
from swapinject.errors import InsufficientDataError
from swapinject.hardware import grid20, synthetic_calibration
from swapinject.scheduler import Job, prepare_queue, run_schedule
from swapinject.circuit import random_circuit


def entry(user, t, dur=0.001, p=1, qubits=(0, 1)):
    return LogEntry(user, f"{user}-{t}", t, t + dur, p, qubits)


@pytest.fixture(scope="module")
def corpus():
    train_log, _ = synthetic_corpus(100, 0, seed=1)
    log, labels = synthetic_corpus(100, 10, seed=0)
    return train_log, log, labels


class TestFeatures:
    def test_even_schedule(self):
        # five jobs a day, one per priority level in turn
        hist = [entry("u", i / 5, p=i % 3) for i in range(25)]
        f = extract_features(hist, window=5.0)
        assert f.request_frequency == pytest.approx(5.0)
        assert f.activity_burstiness == pytest.approx(0.0, abs=1e-9)
        assert abs(f.priority_skew) <= 0.05

    def test_single_burst(self):
        hist = [entry("u", 0.2 + i * 1e-4) for i in range(50)]
        f = extract_features(hist, window=1.0)
        assert f.request_frequency == pytest.approx(50.0)
        assert f.activity_burstiness > 1
        assert f.activity_burstiness == pytest.approx(np.sqrt(49), rel=0.01)

    def test_empty(self):
        assert extract_features([], 7.0) == UserFeatures()
        assert not extract_features([], 7.0).as_array().any()

    def test_priority_skew_signed(self):
        assert extract_features([entry("u", 0.1 * i, p=0) for i in range(5)], 1).priority_skew == 1.0
        assert extract_features([entry("u", 0.1 * i, p=2) for i in range(5)], 1).priority_skew == -1.0

    def test_concurrency(self):
        hist = [entry("u", 0.0, dur=1.0), entry("u", 0.5, dur=1.0), entry("u", 0.6, dur=0.1), entry("u", 3.0)]
        assert extract_features(hist, 7.0).concurrency == 3

    def test_inversion(self):
        # the low-priority job finishes faster than the high-priority one
        hist = [entry("u", 0.0, dur=0.01, p=0), entry("u", 1.0, dur=0.001, p=2)]
        assert extract_features(hist, 7.0).duration_priority_inversion == 1.0
        hist = [entry("u", 0.0, dur=0.001, p=0), entry("u", 1.0, dur=0.01, p=2)]
        assert extract_features(hist, 7.0).duration_priority_inversion == 0.0

    def test_contention(self):
        mine = [entry("a", 0.0, dur=0.1, qubits=(1, 2)), entry("a", 1.0, dur=0.1, qubits=(1, 2))]
        other = [entry("b", 0.05, dur=0.1, qubits=(2, 3)), entry("b", 1.0, dur=0.1, qubits=(7,))]
        assert extract_features(mine, 7.0, others=mine + other).contention_rate == 0.5

    def test_window_filters(self):
        hist = [entry("u", t) for t in (0.5, 1.5, 8.0)]
        assert extract_features(hist, 7.0).request_frequency == pytest.approx(2 / 7)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.floats(0, 6.99), st.floats(1e-4, 0.5), st.integers(0, 2)), min_size=1, max_size=40))
    def test_ranges(self, jobs):
        hist = [LogEntry("u", f"j{i}", t, t + d, p, (i % 3,)) for i, (t, d, p) in enumerate(jobs)]
        other = [LogEntry("v", f"k{i}", t, t + d, p, (0,)) for i, (t, d, p) in enumerate(jobs)]
        f = extract_features(hist, 7.0, others=hist + other)
        arr = f.as_array()
        assert np.isfinite(arr).all() and f.request_frequency >= 0
        assert -1 <= f.priority_skew <= 1
        assert 0 <= f.duration_priority_inversion <= 1 and 0 <= f.contention_rate <= 1
        assert 1 <= f.concurrency <= len(jobs)

    def test_extract_all_sorted(self):
        log = [entry("b", 0.1), entry("a", 0.2)]
        assert list(extract_all(log, 7.0)) == ["a", "b"]


@pytest.fixture(scope="module")
def gaussian():
    return np.random.default_rng(0).normal(size=(100, 6))


class TestTrain:
    def test_training_outlier_share(self, gaussian):
        m = train(gaussian, nu=0.1, seed=0)
        below = int((m.decision(gaussian) < 0).sum())
        assert 5 <= below <= 15

    def test_model_invariants(self, gaussian):
        m = train(gaussian, nu=0.1)
        assert (m.coef > 0).all() and m.coef.sum() == pytest.approx(1.0)
        assert m.bandwidth > 0

    def test_deterministic(self, gaussian):
        a, b = train(gaussian, 0.1, seed=3), train(gaussian.copy(), 0.1, seed=3)
        assert np.array_equal(a.coef, b.coef) and a.offset == b.offset

    @pytest.mark.parametrize("nu", [0.0, 1.0, -0.2])
    def test_bad_nu(self, gaussian, nu):
        with pytest.raises(ValueError):
            train(gaussian, nu=nu)

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            train(np.zeros((5, 6)))

    def test_constant_feature(self, gaussian):
        X = gaussian.copy()
        X[:, 2] = 4.0
        assert np.isfinite(train(X).decision(X)).all()

    def test_center_inside_far_point_outside(self, gaussian):
        m = train(gaussian, nu=0.1)
        centre_support = m.support[np.argmin((m.support ** 2).sum(1))]
        assert m.decision(centre_support * m.scale + m.mean)[0] >= 0
        far = gaussian.mean(0).copy()
        far[0] += 10 * gaussian[:, 0].std()
        assert score(m, far) < 0

    def test_scale_invariance(self, gaussian):
        s = np.array([1.0, 10.0, 0.01, 3.0, 1e3, 2.0])
        m1, m2 = train(gaussian), train(gaussian * s)
        x = gaussian[7] + 0.3
        assert score(m1, x) == pytest.approx(score(m2, x * s), abs=1e-9)

    def test_matches_reference_solver(self, gaussian):
        svm = pytest.importorskip("sklearn.svm")
        m = train(gaussian, nu=0.1)
        Z = (gaussian - m.mean) / m.scale
        ref = svm.OneClassSVM(kernel="rbf", gamma=1 / (2 * m.bandwidth ** 2), nu=0.1, tol=1e-8).fit(Z)
        probe = np.random.default_rng(1).normal(size=(200, 6)) * 1.5
        Zp = (probe - m.mean) / m.scale
        ours = m.decision(probe) + m.offset
        theirs = ref.score_samples(Zp) / ref.dual_coef_.sum()
        assert np.max(np.abs(ours - theirs)) < 1e-3
        ours_sign = m.decision(probe) < 0
        assert np.mean(ours_sign == (ref.decision_function(Zp) < 0)) >= 0.9

    def test_save_load(self, gaussian, tmp_path):
        m = train(gaussian)
        m.save(tmp_path / "m.json")
        m2 = AnomalyModel.load(tmp_path / "m.json")
        assert np.allclose(m.decision(gaussian), m2.decision(gaussian), atol=1e-12)

    def test_median_bandwidth_degenerate(self):
        assert median_bandwidth(np.zeros((4, 2))) == 1.0


class TestSyntheticBenchmark:
    def test_detection_quality(self, corpus):
        train_log, log, labels = corpus
        m = train(list(extract_all(train_log, 7.0).values()), nu=0.05)
        s = score_all(m, extract_all(log, 7.0))
        tpr = np.mean([s[u] < 0 for u in labels if labels[u]])
        fpr = np.mean([s[u] < 0 for u in labels if not labels[u]])
        assert tpr >= 0.9 and fpr <= 0.1

    def test_corpus_deterministic(self):
        assert synthetic_corpus(20, 3, seed=5) == synthetic_corpus(20, 3, seed=5)

    def test_corpus_labels(self, corpus):
        _, log, labels = corpus
        assert sum(labels.values()) == 10 and len(labels) == 110
        assert {e.user for e in log} == set(labels)

    def test_log_round_trip(self, corpus, tmp_path):
        _, log, _ = corpus
        save_log(log[:50], tmp_path / "log.json")
        assert load_log(tmp_path / "log.json") == log[:50]

    def test_flood_log_replays(self):
        g = grid20()
        plan = plan_attack(g, synthetic_calibration(g), 2, 3, (40,))
        log = flood_log(plan.flood_jobs, 7.0, seed=0, repeats=4)
        assert len(log) == 4 * len(plan.flood_jobs)
        assert {e.user for e in log} == plan.users
        assert {e.priority for e in log if e.user == "adv0"} == {0}


class TestRespond:
    def jobs(self):
        return [Job("a1", "adv", random_circuit(2, 20, 0.9, 0), 0.0, 0),
                Job("v1", "vic", random_circuit(2, 20, 0.5, 1), 0.1, 1),
                Job("o1", "other", random_circuit(1, 20, 0.0, 2), 0.2, 2),
                Job("a2", "adv", random_circuit(2, 20, 0.9, 3), 0.0, 3)]

    def test_isolate_never_shares_batch(self):
        queue = respond(self.jobs(), "adv", "isolate")
        for batch, executed in run_schedule(queue, grid20(), tol=1.0):
            users = {j.user for j in executed}
            assert not ("adv" in users and len(users) > 1)

    def test_deprioritize_sorts_last(self):
        queue = respond(self.jobs(), "adv", "deprioritize")
        order = [j.user for j in prepare_queue(queue)]
        assert order[-2:] == ["adv", "adv"]

    def test_empty_queue(self):
        assert respond([], "adv") == []

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            respond(self.jobs(), "adv", "ban")
