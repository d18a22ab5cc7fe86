import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timbrekit.diffnet import A_STRONGER, B_STRONGER, PairRecord
from timbrekit.evaluation import ScoredPair, accuracy, cost_report, eer, far_frr_curve
from timbrekit.testkit import eer_oracle


def scored(values):
    """values: list of (score, label)."""
    out = []
    for i, (score, label) in enumerate(values):
        record = PairRecord(f"a{i}", f"b{i}", "desc", label)
        out.append(ScoredPair(record, score))
    return out


class TestAccuracy:
    def test_perfect(self):
        pairs = scored([(0.1, A_STRONGER), (0.9, B_STRONGER)])
        assert accuracy(pairs) == 100.0

    def test_ties_predict_b(self):
        pairs = scored([(0.5, A_STRONGER), (0.5, B_STRONGER), (0.5, B_STRONGER)])
        assert accuracy(pairs) == pytest.approx(200.0 / 3.0)

    def test_three_of_four(self):
        pairs = scored(
            [(0.1, A_STRONGER), (0.2, A_STRONGER), (0.8, B_STRONGER), (0.7, A_STRONGER)]
        )
        assert accuracy(pairs) == 75.0

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            accuracy([])

    def test_accuracy_plus_error_is_100(self):
        rng = np.random.default_rng(0)
        pairs = scored(
            [(float(s), rng.choice([A_STRONGER, B_STRONGER])) for s in rng.uniform(0, 1, 101)]
        )
        acc = accuracy(pairs)
        err = 100.0 * sum(
            1
            for p in pairs
            if (p.score >= 0.5) != (p.record.label == B_STRONGER)
        ) / len(pairs)
        assert acc + err == 100.0


class TestEer:
    def test_perfectly_separated(self):
        pairs = scored([(0.1, A_STRONGER), (0.2, A_STRONGER), (0.8, B_STRONGER), (0.9, B_STRONGER)])
        assert eer(pairs) == 0.0

    def test_completely_swapped(self):
        pairs = scored([(0.8, A_STRONGER), (0.9, A_STRONGER), (0.1, B_STRONGER), (0.2, B_STRONGER)])
        assert eer(pairs) == 100.0

    def test_interleaved_fifty(self):
        pairs = scored([(0.4, A_STRONGER), (0.6, A_STRONGER), (0.5, B_STRONGER), (0.7, B_STRONGER)])
        assert eer(pairs) == pytest.approx(50.0)

    def test_single_class_errors(self):
        with pytest.raises(ValueError):
            eer(scored([(0.5, A_STRONGER)]))

    def test_matches_enumeration_oracle_on_1000(self):
        rng = np.random.default_rng(12)
        values = [
            (float(s), B_STRONGER if rng.random() < 0.5 else A_STRONGER)
            for s in rng.uniform(0, 1, 1000)
        ]
        pairs = scored(values)
        fast = eer(pairs)
        slow = eer_oracle([v for v, _ in values], [lab == B_STRONGER for _, lab in values])
        assert fast == pytest.approx(slow, abs=1e-12)

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(3)
        values = [
            (float(s), B_STRONGER if rng.random() < 0.4 else A_STRONGER)
            for s in rng.uniform(0.01, 0.99, 400)
        ]
        base = eer(scored(values))
        cubed = eer(scored([(s**3, lab) for s, lab in values]))
        shrunk = eer(scored([(0.25 + s / 2, lab) for s, lab in values]))
        assert base == pytest.approx(cubed, abs=1e-12)
        assert base == pytest.approx(shrunk, abs=1e-12)

    @given(
        n_pos=st.integers(min_value=1, max_value=40),
        n_neg=st.integers(min_value=1, max_value=40),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounded_and_matches_oracle(self, n_pos, n_neg, seed):
        rng = np.random.default_rng(seed)
        values = [(float(s), B_STRONGER) for s in rng.uniform(0, 1, n_pos)]
        values += [(float(s), A_STRONGER) for s in rng.uniform(0, 1, n_neg)]
        result = eer(scored(values))
        assert 0.0 <= result <= 100.0
        slow = eer_oracle([v for v, _ in values], [lab == B_STRONGER for _, lab in values])
        assert result == pytest.approx(slow, abs=1e-12)

    def test_curve_endpoints(self):
        pairs = scored([(0.2, A_STRONGER), (0.8, B_STRONGER)])
        curve = far_frr_curve(pairs)
        assert curve[0][1] == 1.0 and curve[0][2] == 0.0
        assert curve[-1][1] == 0.0 and curve[-1][2] == 1.0


class TestScoredPair:
    def test_score_bounds(self):
        record = PairRecord("a", "b", "x", A_STRONGER)
        with pytest.raises(ValueError):
            ScoredPair(record, 1.5)
        with pytest.raises(ValueError):
            ScoredPair(record, float("nan"))


class TestCostReport:
    def test_extraction_params_zero(self):
        for kind in ("acoustic", "mfcc", "lfc"):
            assert cost_report(kind).extraction_params == 0

    def test_flops_ordering(self):
        lfc_total = cost_report("lfc").extraction_flops_per_second
        mfcc_total = cost_report("mfcc").extraction_flops_per_second
        acoustic_total = cost_report("acoustic").extraction_flops_per_second
        assert lfc_total < mfcc_total < acoustic_total

    def test_classifier_ratio(self):
        report = cost_report("acoustic")
        ratio = report.classifier_flops_per_pair / report.classifier_params
        assert 1.8 <= ratio <= 2.2

    def test_pure_function(self):
        a = cost_report("acoustic").to_dict()
        b = cost_report("acoustic").to_dict()
        assert a == b

    def test_dims(self):
        assert cost_report("acoustic").dim_per_utterance == 26
        assert cost_report("mfcc").dim_per_utterance == 13

    def test_text_format_mentions_conventions(self):
        text = cost_report("acoustic").format_text()
        assert "conventions:" in text
        assert "params=0" in text

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            cost_report("plp")
