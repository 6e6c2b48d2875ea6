import itertools

import numpy as np
import pytest

from aidetect.errors import DataContractError
from aidetect.evaluation import (
    CurveSeries,
    EvalReport,
    academic_fpr,
    auc,
    confusion,
    curves,
    evaluate_scores,
    f1_accuracy,
    fpr_threshold_curve,
    multi_seed_run,
    roc_curve,
    significance_table,
    trapezoid_area,
    wilcoxon_signed_rank,
)


class TestConfusion:
    def test_perfect_pair(self):
        assert confusion([0.9, 0.1], [1, 0], 0.5) == (1, 0, 1, 0)

    def test_boundary_is_positive(self):
        assert confusion([0.5], [0], 0.5) == (0, 1, 0, 0)

    def test_random_rows_match_recount(self):
        rng = np.random.default_rng(3)
        probs = rng.uniform(0, 1, size=10)
        labels = rng.integers(0, 2, size=10)
        tp, fp, tn, fn = confusion(probs, labels, 0.4)
        # independent per-row recount
        etp = efp = etn = efn = 0
        for p, y in zip(probs, labels):
            if p >= 0.4:
                if y == 1:
                    etp += 1
                else:
                    efp += 1
            else:
                if y == 0:
                    etn += 1
                else:
                    efn += 1
        assert (tp, fp, tn, fn) == (etp, efp, etn, efn)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataContractError):
            confusion([0.5], [1, 0], 0.5)


class TestF1Accuracy:
    def test_perfect(self):
        assert f1_accuracy((5, 0, 5, 0)) == (pytest.approx(1.0), pytest.approx(1.0))

    def test_no_positives_convention(self):
        f1, acc = f1_accuracy((0, 0, 10, 0))
        assert f1 == 0.0
        assert acc == pytest.approx(1.0)

    def test_direct_arithmetic(self):
        f1, acc = f1_accuracy((3, 1, 4, 2))
        assert f1 == pytest.approx(2 / 3)
        assert acc == pytest.approx(0.7)

    def test_accuracy_identity(self):
        tp, fp, tn, fn = confusion([0.9, 0.2, 0.7, 0.4], [1, 1, 0, 0], 0.5)
        _, acc = f1_accuracy((tp, fp, tn, fn))
        assert acc == pytest.approx(1 - (fp + fn) / 4)


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == pytest.approx(1.0)

    def test_all_ties_give_half(self):
        assert auc([0.5] * 8, [0, 1, 0, 1, 0, 1, 0, 1]) == pytest.approx(0.5)

    def test_matches_brute_force_pair_counting(self):
        rng = np.random.default_rng(11)
        probs = np.round(rng.uniform(0, 1, size=12), 1)  # rounding forces ties
        labels = np.array([0, 1] * 6)
        total, hits = 0, 0.0
        for i in np.flatnonzero(labels == 1):
            for j in np.flatnonzero(labels == 0):
                total += 1
                if probs[i] > probs[j]:
                    hits += 1.0
                elif probs[i] == probs[j]:
                    hits += 0.5
        assert auc(probs, labels) == pytest.approx(hits / total, abs=1e-12)

    def test_invariant_under_strictly_increasing_transform(self):
        rng = np.random.default_rng(7)
        probs = rng.uniform(0.01, 0.99, size=40)
        labels = rng.integers(0, 2, size=40)
        labels[0], labels[1] = 0, 1
        assert auc(np.exp(3 * probs), labels) == pytest.approx(auc(probs, labels), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(DataContractError):
            auc([0.1, 0.9], [1, 1])


class TestAcademicFpr:
    SOURCES = ["arxiv", "arxiv", "arxiv", "news", "arxiv", "news", "arxiv", "arxiv"]
    LABELS = [0, 0, 0, 0, 1, 0, 0, 1]
    PROBS = [0.9, 0.2, 0.5, 0.8, 0.9, 0.1, 0.4, 0.7]

    def test_hand_counted_fixture(self):
        # human arxiv rows: indices 0,1,2,6 with probs 0.9, 0.2, 0.5, 0.4
        # at threshold 0.5 the positives are 0.9 and 0.5 -> 2/4
        assert academic_fpr(self.PROBS, self.LABELS, self.SOURCES, "arxiv", 0.5) == pytest.approx(0.5)

    def test_all_predicted_human(self):
        assert academic_fpr([0.1, 0.2], [0, 0], ["arxiv", "arxiv"], "arxiv", 0.5) == 0.0

    def test_all_predicted_machine(self):
        assert academic_fpr([0.9, 0.8], [0, 0], ["arxiv", "arxiv"], "arxiv", 0.5) == 1.0

    def test_empty_subset_rejected(self):
        with pytest.raises(DataContractError):
            academic_fpr([0.5], [1], ["arxiv"], "arxiv", 0.5)


class TestCurves:
    def test_perfect_roc(self):
        series = roc_curve([0.9, 0.9, 0.1, 0.1], [1, 1, 0, 0])
        assert series.points == [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        assert trapezoid_area(series) == pytest.approx(1.0)

    def test_perfect_roc_with_distinct_scores_stays_on_ideal_path(self):
        series = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert all(x == 0.0 or y == 1.0 for x, y in series.points)
        assert trapezoid_area(series) == pytest.approx(1.0)

    def test_constant_scores_diagonal(self):
        series = roc_curve([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
        assert series.points == [(0.0, 0.0), (1.0, 1.0)]
        assert trapezoid_area(series) == pytest.approx(0.5)

    def test_trapezoid_equals_rank_auc(self):
        rng = np.random.default_rng(5)
        for seed in range(8):
            rng = np.random.default_rng(seed)
            probs = np.round(rng.uniform(0, 1, size=50), 2)
            labels = rng.integers(0, 2, size=50)
            labels[0], labels[1] = 0, 1
            assert trapezoid_area(roc_curve(probs, labels)) == pytest.approx(auc(probs, labels), abs=1e-9)

    def test_roc_monotone_and_anchored(self):
        rng = np.random.default_rng(2)
        probs = rng.uniform(0, 1, size=30)
        labels = rng.integers(0, 2, size=30)
        labels[0], labels[1] = 0, 1
        pts = roc_curve(probs, labels).points
        assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
        assert all(x1 >= x0 and y1 >= y0 for (x0, y0), (x1, y1) in zip(pts, pts[1:]))

    def test_fpr_threshold_series_non_increasing(self):
        rng = np.random.default_rng(4)
        probs = rng.uniform(0, 1, size=40)
        labels = [0] * 20 + [1] * 20
        sources = ["arxiv"] * 40
        series = fpr_threshold_curve(probs, labels, sources, "arxiv", step=0.01)
        assert len(series.points) == 101
        ys = [y for _, y in series.points]
        assert all(b <= a for a, b in zip(ys, ys[1:]))

    def test_threshold_one_counts_only_certain_positives(self):
        probs = [1.0, 0.999, 0.5]
        labels = [0, 0, 0]
        sources = ["arxiv"] * 3
        assert academic_fpr(probs, labels, sources, "arxiv", threshold=1.0) == pytest.approx(1 / 3)

    def test_curves_pair(self):
        rng = np.random.default_rng(9)
        probs = rng.uniform(0, 1, size=20)
        labels = [0, 1] * 10
        roc, fprth = curves(probs, labels, ["arxiv"] * 20, "arxiv", step=0.05)
        assert roc.kind == "roc"
        assert fprth.kind == "fpr_vs_threshold"
        assert len(fprth.points) == 21


def oracle_wilcoxon_exact(diffs):
    """Full enumeration over sign assignments, written independently."""
    diffs = [d for d in diffs if d != 0]
    n = len(diffs)
    abs_sorted = sorted(range(n), key=lambda i: abs(diffs[i]))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(diffs[abs_sorted[j + 1]]) == abs(diffs[abs_sorted[i]]):
            j += 1
        for k in range(i, j + 1):
            ranks[abs_sorted[k]] = (i + j + 2) / 2
        i = j + 1
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    w_obs = min(w_plus, w_minus)
    count = 0
    for signs in itertools.product((1, -1), repeat=n):
        wp = sum(r for r, s in zip(ranks, signs) if s > 0)
        wm = sum(ranks) - wp
        if min(wp, wm) <= w_obs + 1e-12:
            count += 1
    return w_obs, count / 2**n


class TestWilcoxon:
    def test_all_equal_rejected(self):
        with pytest.raises(DataContractError):
            wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.0, 5.0])

    def test_six_positive_differences_exact(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        b = [0.0] * 6
        w, p = wilcoxon_signed_rank(a, b)
        assert w == 0.0
        assert p == 0.03125  # 2 / 2**6, exactly representable

    def test_swap_symmetry(self):
        rng = np.random.default_rng(5)
        a = rng.normal(0, 1, size=9).tolist()
        b = rng.normal(0.3, 1, size=9).tolist()
        w1, p1 = wilcoxon_signed_rank(a, b)
        w2, p2 = wilcoxon_signed_rank(b, a)
        assert w1 == w2 and p1 == p2

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(13)
        for n in (5, 7, 9, 11, 12):
            diffs = np.round(rng.normal(0.2, 1, size=n), 1)
            diffs[diffs == 0] = 0.5
            a = diffs.tolist()
            b = [0.0] * n
            w, p = wilcoxon_signed_rank(a, b)
            ow, op = oracle_wilcoxon_exact(diffs.tolist())
            assert w == pytest.approx(ow, abs=1e-12)
            assert p == pytest.approx(op, abs=1e-12)

    def test_large_n_matches_scipy_approximation(self):
        from scipy import stats

        rng = np.random.default_rng(20)
        a = rng.normal(0.4, 1, size=30)
        b = rng.normal(0.0, 1, size=30)
        w, p = wilcoxon_signed_rank(a.tolist(), b.tolist())
        ref = stats.wilcoxon(a, b, zero_method="wilcox", correction=True, mode="approx")
        assert w == pytest.approx(float(ref.statistic), abs=1e-9)
        assert p == pytest.approx(float(ref.pvalue), abs=1e-9)

    def test_too_few_nonzero_rejected(self):
        with pytest.raises(DataContractError):
            wilcoxon_signed_rank([1.0, 1.0, 1.0, 2.0], [1.0, 1.0, 1.0, 1.0])


def fake_report(f1, fpr=0.1):
    return EvalReport(accuracy=f1, f1=f1, auc=f1, academic_fpr=fpr, confusion=(1, 0, 1, 0), n=2)


class TestMultiSeed:
    def test_significance_table_picks_best_single_and_tests_both_metrics(self):
        per_seed = []
        rng = np.random.default_rng(3)
        for s in range(8):
            eps = float(rng.uniform(0, 0.02))
            per_seed.append(
                {
                    "m1": fake_report(0.85 + eps, fpr=0.10),
                    "m2": fake_report(0.70 + eps, fpr=0.20),
                    "m3": fake_report(0.65 + eps, fpr=0.30),
                    "simple_average": fake_report(0.86 + eps, fpr=0.12),
                    "ensemble": fake_report(0.92 + eps, fpr=0.05),
                }
            )
        rows = significance_table(per_seed)
        assert [r.metric for r in rows] == ["f1", "academic_fpr"]
        assert all(r.baseline == "m1" for r in rows)
        assert rows[0].p_value is not None and rows[0].p_value < 0.05

    def test_degenerate_differences_surfaced_per_test(self):
        per_seed = [
            {
                "m1": fake_report(0.8, fpr=0.1),
                "m2": fake_report(0.7),
                "m3": fake_report(0.6),
                "simple_average": fake_report(0.75),
                "ensemble": fake_report(0.8, fpr=0.1),  # identical to baseline
            }
            for _ in range(6)
        ]
        rows = significance_table(per_seed)
        assert all(r.error is not None and "zero" in r.error for r in rows)
        assert all(r.p_value is None for r in rows)

    def test_multi_seed_run_requires_five_seeds(self):
        with pytest.raises(DataContractError):
            multi_seed_run(None, [1, 2, 3], runner=lambda cfg, s: {})

    def test_multi_seed_run_uses_runner_and_tags_failures(self):
        def runner(cfg, seed):
            if seed == 4:
                raise DataContractError("boom")
            return {
                "m1": fake_report(0.8 + seed / 100),
                "m2": fake_report(0.7),
                "m3": fake_report(0.6),
                "simple_average": fake_report(0.75),
                "ensemble": fake_report(0.9 + seed / 100),
            }

        with pytest.raises(DataContractError, match="seed 4"):
            multi_seed_run(None, [1, 2, 3, 4, 5], runner=runner)
        result = multi_seed_run(None, [1, 2, 3, 5, 6], runner=runner)
        assert len(result.per_seed) == 5
        assert len(result.significance) == 2


class TestEvaluateScores:
    def test_report_is_internally_consistent(self):
        rng = np.random.default_rng(6)
        probs = rng.uniform(0, 1, size=30)
        labels = np.array([0, 1] * 15)
        sources = ["arxiv", "news", "fiction"] * 10
        report = evaluate_scores(probs, labels, sources, threshold=0.5, source_filter="arxiv")
        tp, fp, tn, fn = report.confusion
        assert tp + fp + tn + fn == report.n == 30
        f1, acc = f1_accuracy(report.confusion)
        assert report.f1 == f1 and report.accuracy == acc
        assert 0.0 <= report.auc <= 1.0
        assert 0.0 <= report.academic_fpr <= 1.0
