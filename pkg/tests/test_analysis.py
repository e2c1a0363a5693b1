import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import conv_out_size_direct
from stride_lab.analysis import (
    AnalysisError,
    ShapeUnderflowError,
    compare,
    conv_out_size,
    count_flops,
    count_params,
    propagate_shape,
    trace,
)
from stride_lab.builder import build, make_request
from stride_lab.layers import Conv2d, TensorShape
from stride_lab.strides import StridePair, final_factors, resolve_name

INPUT_2S = TensorShape(1, 80, 200)
INPUT_3S = TensorShape(1, 80, 300)

# Exact parameter counts, derived by hand from the layer accounting rules
# (conv k*k*in*out/groups, batch norm 2/channel, fully connected in*out+out,
# projection shortcuts only on channel change).
EXACT_PARAMS = {
    ("modified_resnet", 34, "MOD"): 6_634_336,
    ("gemini_resnet", 34, "T14c"): 5_978_976,
    ("original_resnet", 34, "ORI"): 21_409_728,
    ("original_resnet", 18, "ORI"): 11_301_568,
    ("modified_resnet", 18, "MOD"): 4_105_440,
    ("gemini_resnet", 18, "T14c"): 3_450_080,
    ("modified_resnet", 50, "MOD"): 11_131_360,
    ("gemini_resnet", 50, "T14c"): 8_509_920,
    ("modified_resnet", 101, "MOD"): 15_892_448,
    ("gemini_resnet", 101, "T14c"): 13_271_008,
    ("df_resnet", 182, "MOD"): 9_842_464,
    ("df_resnet", 183, "T14c"): 9_196_384,
    ("df_resnet", 59, "MOD"): 4_693_920,
    ("df_resnet", 60, "T14c"): 4_047_840,
    ("sd_resnet", 38, "MOD"): 7_374_752,
    ("sd_resnet", 38, "T14c"): 6_719_392,
}

# Reference complexity figures in millions of parameters.
REFERENCE_PARAMS_M = {
    ("modified_resnet", 34, "MOD"): 6.63,
    ("gemini_resnet", 34, "T14c"): 5.98,
    ("original_resnet", 34, "ORI"): 21.41,
    ("modified_resnet", 18, "MOD"): 4.11,
    ("gemini_resnet", 18, "T14c"): 3.45,
    ("modified_resnet", 50, "MOD"): 11.13,
    ("gemini_resnet", 50, "T14c"): 8.51,
    ("modified_resnet", 101, "MOD"): 15.89,
    ("gemini_resnet", 101, "T14c"): 13.27,
    ("df_resnet", 182, "MOD"): 9.84,
    ("df_resnet", 183, "T14c"): 9.20,
}

# Reference FLOPs in giga-MACs at (2s, 3s) = (200, 300) frames x 80 bins.
REFERENCE_FLOPS_G = {
    ("modified_resnet", 34, "MOD"): (4.63, 6.88),
    ("gemini_resnet", 34, "T14c"): (4.41, 6.59),
    ("modified_resnet", 34, "T14"): (6.68, 9.99),
    ("modified_resnet", 34, "T23"): (8.27, 12.37),
    ("modified_resnet", 34, "T14b"): (4.97, 7.43),
    ("modified_resnet", 34, "T14d"): (4.18, 6.25),
    ("modified_resnet", 34, "T23b"): (5.45, 8.13),
    ("modified_resnet", 34, "T23c"): (4.99, 7.45),
    ("modified_resnet", 34, "T23d"): (4.43, 6.61),
    ("modified_resnet", 34, "T05"): (4.49, 6.72),
    ("modified_resnet", 34, "F50"): (4.44, 6.43),
    ("modified_resnet", 34, "T13"): (13.33, 19.95),
    ("original_resnet", 34, "ORI"): (1.25, 1.82),
    ("df_resnet", 182, "MOD"): (8.64, 12.87),
    ("df_resnet", 183, "T14c"): (8.25, 12.34),
}


def build_case(family, depth, path):
    return build(make_request(family, depth, path=path))


class TestConvOutSize:
    def test_stride_two_halves_80(self):
        assert conv_out_size(80, 3, 1, 1, 2) == 40

    def test_stride_one_preserves_80(self):
        assert conv_out_size(80, 3, 1, 1, 1) == 80

    def test_large_kernel_stem(self):
        assert conv_out_size(300, 7, 3, 1, 2) == 150

    @given(
        r=st.integers(1, 400),
        k=st.integers(1, 7),
        p=st.integers(0, 3),
        d=st.integers(1, 2),
        s=st.integers(1, 3),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_position_walk(self, r, k, p, d, s):
        span = d * (k - 1) + 1
        if r + 2 * p < span:
            return
        assert conv_out_size(r, k, p, d, s) == conv_out_size_direct(r, k, p, d, s)


class TestPropagateShape:
    def test_conv_sets_channels_and_downsamples(self):
        layer = Conv2d("c", 32, 64, (3, 3), stride=StridePair(2, 2), padding=(1, 1))
        out = propagate_shape(TensorShape(32, 80, 300), layer)
        assert out.as_tuple() == (64, 40, 150)

    def test_underflow_raises(self):
        layer = Conv2d("c", 1, 1, (3, 3), padding=(0, 0))
        with pytest.raises(ShapeUnderflowError) as err:
            propagate_shape(TensorShape(1, 2, 10), layer)
        assert err.value.dimension == "freq"

    def test_channel_mismatch_raises(self):
        layer = Conv2d("c", 16, 16, (3, 3), padding=(1, 1))
        with pytest.raises(AnalysisError):
            propagate_shape(TensorShape(8, 10, 10), layer)

    def test_composition_equals_flat_propagation(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            c1 = Conv2d("a", 4, 8, (3, 3), stride=StridePair(int(rng.integers(1, 3)), 1),
                        padding=(1, 1))
            c2 = Conv2d("b", 8, 16, (3, 3), stride=StridePair(1, int(rng.integers(1, 3))),
                        padding=(1, 1))
            start = TensorShape(4, int(rng.integers(8, 64)), int(rng.integers(8, 64)))
            step = propagate_shape(propagate_shape(start, c1), c2)
            chained = start
            for layer in [c1, c2]:
                chained = propagate_shape(chained, layer)
            assert step == chained


class TestCountParams:
    @pytest.mark.parametrize("case", sorted(EXACT_PARAMS))
    def test_exact_integers(self, case):
        report = count_params(build_case(*case))
        assert report.params_total == EXACT_PARAMS[case]

    @pytest.mark.parametrize("case", sorted(REFERENCE_PARAMS_M))
    def test_within_one_percent_of_reference(self, case):
        report = count_params(build_case(*case))
        reference = REFERENCE_PARAMS_M[case]
        assert abs(report.params_millions - reference) <= 0.01 * reference

    def test_totals_equal_per_layer_sum(self, mod34):
        report = count_params(mod34)
        assert report.params_total == sum(v for _, v in report.params_by_layer)

    def test_params_independent_of_time_frames(self, mod34):
        a = count_flops(mod34, INPUT_2S)
        b = count_flops(mod34, INPUT_3S)
        assert a.params_total == b.params_total

    def test_se_adds_exact_delta(self):
        base = count_params(build_case("modified_resnet", 34, "MOD")).params_total
        se = count_params(build(make_request("modified_resnet", 34, se_reduction=4))).params_total
        assert se - base == 159_544
        assert round(se / 1e6, 2) == 6.79


class TestCountFlops:
    @pytest.mark.parametrize("case", sorted(REFERENCE_FLOPS_G))
    def test_within_five_percent_of_reference(self, case):
        spec = build_case(*case)
        ref_2s, ref_3s = REFERENCE_FLOPS_G[case]
        got_2s = count_flops(spec, INPUT_2S).flops_giga
        got_3s = count_flops(spec, INPUT_3S).flops_giga
        assert abs(got_2s - ref_2s) <= 0.05 * ref_2s, f"{case} 2s: {got_2s:.3f} vs {ref_2s}"
        assert abs(got_3s - ref_3s) <= 0.05 * ref_3s, f"{case} 3s: {got_3s:.3f} vs {ref_3s}"

    def test_single_pointwise_conv_is_one_mac(self):
        layer = Conv2d("c", 1, 1, (1, 1))
        from stride_lab.analysis import layer_flops

        assert layer_flops(layer, (1, 1, 1)) == 1

    def test_three_seconds_costs_more_but_below_ratio(self):
        # The duration-independent head keeps the ratio at or below the
        # frame ratio 1.5; ceil effects in the floor-division shape
        # arithmetic can push individual stages up to 1% past it.
        for name in ["MOD", "T14c", "T14", "F50", "T05"]:
            spec = build(make_request("modified_resnet", 34, path=name)
                         if name != "T14c" else make_request("gemini_resnet", 34, path=name))
            low = count_flops(spec, INPUT_2S).flops_total
            high = count_flops(spec, INPUT_3S).flops_total
            assert high >= low
            assert high / low <= 1.5 * 1.01

    def test_final_time_downsampling_tracks_alpha(self):
        for name in ["MOD", "T14", "T14c", "T23", "F50", "T05", "ORI"]:
            family = "original_resnet" if name == "ORI" else "modified_resnet"
            spec = build(make_request(family, 34, path=name))
            alpha, _ = final_factors(spec.path)
            records = trace(spec, freq=80, time=320, include_head=False)
            t_out = records[-1].out_shape[2]
            assert abs(320 / t_out - alpha) <= 1

    def test_flops_totals_equal_per_layer_sum(self, gemini34):
        report = count_flops(gemini34, INPUT_3S)
        assert report.flops_total == sum(v for _, v in report.flops_by_layer)


class TestCompare:
    def test_principal_config_vs_baseline(self, mod34, gemini34):
        delta = compare(count_flops(mod34, INPUT_3S), count_flops(gemini34, INPUT_3S))
        assert delta.params_pct == pytest.approx(-9.8, abs=0.5)
        assert delta.flops_pct == pytest.approx(-4.2, abs=0.5)

    @pytest.mark.parametrize(
        "depth,expected", [(18, -16.1), (50, -23.5), (101, -16.5)]
    )
    def test_param_reduction_across_depths(self, depth, expected):
        base = count_params(build_case("modified_resnet", depth, "MOD"))
        gem = count_params(build_case("gemini_resnet", depth, "T14c"))
        assert compare(base, gem).params_pct == pytest.approx(expected, abs=0.5)

    def test_self_comparison_is_zero(self, mod34):
        report = count_flops(mod34, INPUT_2S)
        delta = compare(report, report)
        assert delta.params_pct == 0.0
        assert delta.flops_pct == 0.0

    def test_mismatched_durations_rejected(self, mod34):
        with pytest.raises(AnalysisError):
            compare(count_flops(mod34, INPUT_2S), count_flops(mod34, INPUT_3S))
