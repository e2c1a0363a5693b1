import json

import pytest

from stride_lab.cli import main
from stride_lab.serialize import parse_table


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEnumerate:
    def test_endpoint_2_16_lists_25_paths(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate", "--endpoint", "2,16")
        assert code == 0
        assert len(out.strip().splitlines()) == 25

    def test_endpoint_with_class_filter(self, capsys):
        code, out, _ = run_cli(
            capsys, "enumerate", "--class", "time-priority", "--endpoint", "2,16"
        )
        assert code == 0
        assert len(out.strip().splitlines()) == 25

    def test_trivial_endpoint_lists_one_path(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate", "--endpoint", "1,1")
        assert code == 0
        assert len(out.strip().splitlines()) == 1

    def test_default_lists_36_endpoints(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 36
        assert sum("golden-gemini" in line for line in lines) == 2

    def test_dot_output_has_36_nodes(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate", "--dot")
        assert code == 0
        assert out.count('pos="') == 36

    def test_paths_flag_lists_all_1024(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate", "--paths")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 1024
        assert sum("extension" in line for line in lines) == 1024 - 24

    def test_bad_endpoint_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "enumerate", "--endpoint", "7,16")
        assert code == 1
        assert "usage error" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "enumerate", "--wat")
        assert code == 1


class TestAnalyze:
    def test_gemini_resnet34_values(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", "resnet", "34", "--path", "T14c")
        assert code == 0
        assert "5978976 (5.98 M)" in out
        assert "(4.35 G)" in out
        assert "(6.52 G)" in out

    def test_gemini_flag_for_dfresnet(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", "dfresnet", "183", "--gemini")
        assert code == 0
        assert "(9.20 M)" in out
        assert "(8.03 G)" in out and "(12.04 G)" in out

    def test_compare_against_baseline(self, capsys):
        code, out, _ = run_cli(
            capsys, "analyze", "resnet", "34", "--path", "MOD", "--compare", "T14c"
        )
        assert code == 0
        assert "params      -9.9%" in out
        assert "flops 3s    -4.2%" in out

    def test_catalog_csv_is_byte_stable(self, capsys):
        code, first, _ = run_cli(capsys, "analyze", "resnet", "34", "--catalog")
        assert code == 0
        code, second, _ = run_cli(capsys, "analyze", "resnet", "34", "--catalog")
        assert code == 0
        assert first == second
        rows = parse_table(first)
        assert len(rows) == 24
        by_name = {r.index: r for r in rows}
        assert by_name["MOD"].params_millions == 6.63
        assert by_name["T14c"].params_millions == 5.98
        assert by_name["ORI"].params_millions == 21.41
        assert all(r.cataloged for r in rows)

    def test_json_report(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", "resnet", "34", "--path", "MOD", "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["params_total"] == 6634336

    def test_single_row_csv(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", "resnet", "34", "--path", "T14c", "--csv")
        assert code == 0
        rows = parse_table(out)
        assert len(rows) == 1 and rows[0].index == "T14c"
        assert rows[0].params_millions == 5.98

    def test_per_layer_breakdown(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", "resnet", "18", "--path", "MOD", "--per-layer")
        assert code == 0
        assert "stem.conv" in out and "head.fc" in out

    def test_catalog_requires_resnet_family(self, capsys):
        code, _, err = run_cli(capsys, "analyze", "dfresnet", "182", "--catalog")
        assert code == 1
        assert "usage error" in err

    def test_unknown_path_name_is_build_error(self, capsys):
        code, _, err = run_cli(capsys, "analyze", "resnet", "34", "--path", "T99")
        assert code == 2
        assert "error" in err

    def test_depth_mismatch_is_build_error(self, capsys):
        code, _, err = run_cli(capsys, "analyze", "dfresnet", "183", "--path", "MOD")
        assert code == 2


class TestBuildAndVerifySpec:
    def test_build_then_verify_round_trip(self, capsys, tmp_path):
        spec_file = tmp_path / "model.json"
        code, out, _ = run_cli(capsys, "build", "resnet", "18", "--path", "MOD",
                               "-o", str(spec_file))
        assert code == 0
        code, out, _ = run_cli(capsys, "verify", "--spec", str(spec_file), "--frames", "48")
        assert code == 0
        assert "ok" in out

    def test_corrupted_spec_rejected(self, capsys, tmp_path):
        spec_file = tmp_path / "model.json"
        run_cli(capsys, "build", "resnet", "18", "--path", "MOD", "-o", str(spec_file))
        doc = json.loads(spec_file.read_text())
        for layer in doc["layers"]:
            if layer["kind"] == "conv2d":
                layer["stride"]["time"] = 3
                break
        spec_file.write_text(json.dumps(doc))
        code, _, err = run_cli(capsys, "verify", "--spec", str(spec_file))
        assert code == 2
        assert "rejected" in err

    def test_build_json_loads(self, capsys):
        code, out, _ = run_cli(capsys, "build", "resnet", "18")
        assert code == 0
        doc = json.loads(out)
        assert doc["schema_version"] == 1
        assert doc["family"] == "modified_resnet"


class TestCompareCommand:
    def test_compare_subcommand(self, capsys):
        code, out, _ = run_cli(capsys, "compare", "resnet", "34", "MOD", "T14c")
        assert code == 0
        assert "params      -9.88%" in out


class TestVerifyCommand:
    def test_two_config_check_passes(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--frames", "48")
        assert code == 0
        assert out.count("ok") >= 2

    def test_json_summary(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--frames", "48", "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["failures"] == 0
        assert all(c["multiplies"] == c["analytic_flops"] for c in doc["checks"])

    def test_gradcheck_flag(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--gradcheck", "--gradcheck-trials", "6")
        assert code == 0
        assert "gradcheck" in out

    def test_table3_flag_runs_18_configs(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--all-table3-configs", "--frames", "40")
        assert code == 0
        assert out.count("ok") == 18

    def test_check_failure_exits_3(self, capsys, monkeypatch):
        from stride_lab import cli
        from stride_lab.verification import CheckResult

        def broken(*args, **kwargs):
            return (CheckResult("X", ok=False, layers_checked=1, multiplies=1,
                                analytic_flops=2, detail="multiply count 1 != analytic 2"),)

        monkeypatch.setattr(cli, "verify_catalog_configs", broken)
        code, out, _ = run_cli(capsys, "verify", "--frames", "40")
        assert code == 3
        assert "FAIL" in out


class TestMetricsCommand:
    def test_perfectly_separated_file(self, capsys, tmp_path):
        score_file = tmp_path / "scores.txt"
        score_file.write_text(
            "# dev scores\ntarget 0.9\ntarget 0.8\nnontarget 0.2\nnontarget 0.1\n"
        )
        code, out, _ = run_cli(capsys, "metrics", str(score_file))
        assert code == 0
        assert "EER        0.000%" in out
        assert "minDCF     0.0000" in out

    def test_inverted_file(self, capsys, tmp_path):
        score_file = tmp_path / "scores.txt"
        score_file.write_text("target 0.1\ntarget 0.2\nnontarget 0.8\nnontarget 0.9\n")
        code, out, _ = run_cli(capsys, "metrics", str(score_file))
        assert code == 0
        assert "EER        100.000%" in out

    def test_random_file_matches_oracle(self, capsys, tmp_path):
        import numpy as np

        from oracles import random_trials, sweep_eer, sweep_min_dcf

        rng = np.random.default_rng(11)
        scores, labels = random_trials(rng, n_min=900, n_max=1100)
        lines = [
            f"{'target' if l else 'nontarget'} {s:.9f}" for s, l in zip(scores, labels)
        ]
        score_file = tmp_path / "scores.txt"
        score_file.write_text("\n".join(lines) + "\n")
        code, out, _ = run_cli(capsys, "metrics", str(score_file))
        assert code == 0
        parsed_scores = [float(line.split()[1]) for line in lines]
        ref_eer, _ = sweep_eer(parsed_scores, labels)
        ref_dcf, _ = sweep_min_dcf(parsed_scores, labels)
        eer_line = next(line for line in out.splitlines() if line.startswith("EER"))
        dcf_line = next(line for line in out.splitlines() if line.startswith("minDCF"))
        assert float(eer_line.split()[1].rstrip("%")) == pytest.approx(100 * ref_eer, abs=1e-3)
        assert float(dcf_line.split()[1]) == pytest.approx(ref_dcf, abs=1e-4)

    def test_malformed_line_reports_line_number(self, capsys, tmp_path):
        score_file = tmp_path / "scores.txt"
        score_file.write_text("target 0.9\noops\n")
        code, _, err = run_cli(capsys, "metrics", str(score_file))
        assert code == 2
        assert "line 2" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "metrics", str(tmp_path / "none.txt"))
        assert code == 2


class TestRenderCommand:
    def test_render_to_file(self, capsys, tmp_path):
        out_file = tmp_path / "trellis.dot"
        code, _, _ = run_cli(capsys, "render", "-o", str(out_file))
        assert code == 0
        assert out_file.read_text().count('pos="') == 36

    def test_render_highlight(self, capsys):
        code, out, _ = run_cli(capsys, "render", "--highlight", "T14c,T23")
        assert code == 0
        assert 'tooltip="T14c"' in out and 'tooltip="T23"' in out


class TestSeedEnvOverride:
    def test_env_seed_changes_default(self, monkeypatch):
        from stride_lab.verification import default_seed

        monkeypatch.setenv("STRIDE_LAB_SEED", "777")
        assert default_seed() == 777
        monkeypatch.setenv("STRIDE_LAB_SEED", "not-an-int")
        with pytest.raises(ValueError):
            default_seed()
