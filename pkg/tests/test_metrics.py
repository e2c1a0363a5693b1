import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import random_trials, sweep_eer, sweep_min_dcf
from stride_lab.metrics import (
    DegenerateScoresError,
    ScoreFileError,
    TrialScoreSet,
    compute_eer,
    compute_min_dcf,
)


class TestTrialScoreSet:
    def test_requires_both_classes(self):
        with pytest.raises(ValueError):
            TrialScoreSet(trials=((0.5, True), (0.7, True)))

    def test_from_text_parses_labels_and_comments(self):
        text = """
        # development trials
        target 0.91
        nontarget 0.10  # easy impostor
        target 0.85
        nontarget 0.20
        """
        trials = TrialScoreSet.from_text(text)
        assert len(trials.trials) == 4
        assert sorted(trials.target_scores) == [0.85, 0.91]

    def test_from_text_reports_line_numbers(self):
        with pytest.raises(ScoreFileError) as err:
            TrialScoreSet.from_text("target 0.9\nbogus-line\n")
        assert err.value.lineno == 2

    def test_rejects_bad_label(self):
        with pytest.raises(ScoreFileError):
            TrialScoreSet.from_text("positive 0.9\nnontarget 0.1\n")

    def test_rejects_non_numeric_score(self):
        with pytest.raises(ScoreFileError):
            TrialScoreSet.from_text("target high\nnontarget 0.1\n")


class TestComputeEer:
    def test_perfectly_separated(self):
        trials = TrialScoreSet.from_scores([1.0, 0.9], [0.1, 0.0])
        eer, _ = compute_eer(trials)
        assert eer == 0.0

    def test_perfectly_inverted(self):
        trials = TrialScoreSet.from_scores([0.1, 0.0], [1.0, 0.9])
        eer, _ = compute_eer(trials)
        assert eer == 1.0

    def test_degenerate_scores_rejected(self):
        trials = TrialScoreSet.from_scores([0.5], [0.5])
        with pytest.raises(DegenerateScoresError):
            compute_eer(trials)

    def test_matches_sweep_oracle_on_random_sets(self):
        rng = np.random.default_rng(101)
        for _ in range(200):
            scores, labels = random_trials(rng)
            trials = TrialScoreSet(trials=tuple(zip(scores, labels)))
            eer, thr = compute_eer(trials)
            ref_eer, ref_thr = sweep_eer(scores, labels)
            assert eer == pytest.approx(ref_eer, abs=1e-9)
            assert thr == pytest.approx(ref_thr, abs=1e-9)

    def test_half_for_interleaved(self):
        # Same score multiset in both classes: chance behavior.
        trials = TrialScoreSet.from_scores([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
        eer, _ = compute_eer(trials)
        assert 0.0 < eer <= 1.0


class TestComputeMinDcf:
    def test_perfectly_separated_is_zero(self):
        trials = TrialScoreSet.from_scores([1.0, 0.9], [0.1, 0.0])
        dcf, _ = compute_min_dcf(trials)
        assert dcf == 0.0

    def test_zero_discrimination_is_one(self):
        # Identical score distributions: rejecting everything is optimal.
        scores = [0.1, 0.4, 0.7, 0.9]
        trials = TrialScoreSet.from_scores(scores, scores)
        dcf, _ = compute_min_dcf(trials, p_target=0.01)
        assert dcf == pytest.approx(1.0, abs=1e-12)

    def test_matches_sweep_oracle_on_random_sets(self):
        rng = np.random.default_rng(77)
        for _ in range(200):
            scores, labels = random_trials(rng)
            trials = TrialScoreSet(trials=tuple(zip(scores, labels)))
            dcf, thr = compute_min_dcf(trials)
            ref_dcf, ref_thr = sweep_min_dcf(scores, labels)
            assert dcf == pytest.approx(ref_dcf, abs=1e-9)
            assert thr == pytest.approx(ref_thr, abs=1e-9)

    def test_validates_parameters(self):
        trials = TrialScoreSet.from_scores([1.0], [0.0])
        with pytest.raises(ValueError):
            compute_min_dcf(trials, p_target=0.0)
        with pytest.raises(ValueError):
            compute_min_dcf(trials, c_fa=0.0)

    def test_degenerate_scores_rejected(self):
        trials = TrialScoreSet.from_scores([0.5, 0.5], [0.5])
        with pytest.raises(DegenerateScoresError):
            compute_min_dcf(trials)


@st.composite
def trial_sets(draw):
    n_target = draw(st.integers(1, 25))
    n_nontarget = draw(st.integers(1, 25))
    finite = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)
    targets = draw(st.lists(finite, min_size=n_target, max_size=n_target))
    nontargets = draw(st.lists(finite, min_size=n_nontarget, max_size=n_nontarget))
    if len(set(targets + nontargets)) < 2:
        nontargets[0] = nontargets[0] + 1.0
    return targets, nontargets


class TestMonotoneInvariance:
    @given(data=trial_sets(), which=st.integers(0, 2))
    @settings(max_examples=150, deadline=None)
    def test_eer_and_dcf_invariant(self, data, which):
        targets, nontargets = data
        transform = [
            lambda v: 2.0 * v + 3.0,
            lambda v: math.atan(v),
            lambda v: v ** 3 + 0.25 * v,
        ][which]
        # Strict monotonicity must survive float rounding on the realized
        # score values, otherwise the transform merges operating points.
        ordered = sorted(set(targets) | set(nontargets))
        mapped_values = [transform(v) for v in ordered]
        assume(all(b > a for a, b in zip(mapped_values, mapped_values[1:])))
        base = TrialScoreSet.from_scores(targets, nontargets)
        mapped = TrialScoreSet.from_scores(
            [transform(v) for v in targets], [transform(v) for v in nontargets]
        )
        eer_a, _ = compute_eer(base)
        eer_b, _ = compute_eer(mapped)
        assert eer_a == pytest.approx(eer_b, abs=1e-12)
        dcf_a, _ = compute_min_dcf(base)
        dcf_b, _ = compute_min_dcf(mapped)
        assert dcf_a == pytest.approx(dcf_b, abs=1e-12)
