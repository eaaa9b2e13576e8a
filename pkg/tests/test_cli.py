"""Command line behaviour: report contracts, exit codes, determinism."""

import json

from chamberwalk.cli import main


def run_json(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def run_raw(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


# -- contract examples -----------------------------------------------------------


def test_verify_tree_nlambda_reports_eight_exact_matches(capsys):
    code, report = run_json(capsys, "verify", "--suite", "tree-nlambda", "--q", "2")
    assert code == 0
    assert report["schema"] == "chamberwalk/1"
    assert report["verdict"] is True
    (suite,) = report["suites"]
    assert suite["suite"] == "tree-nlambda"
    assert len(suite["checks"]) == 8
    for check in suite["checks"]:
        assert check["verdict"] is True
        assert check["formula"] == check["enumerated"]


def test_discretize_free2_tree_uniform_quarter(capsys):
    code, report = run_json(capsys, "discretize", "--family", "free2-tree",
                            "--seed", "7")
    assert code == 0
    assert report["provenance"] == "exact"
    assert report["symmetric"] is True
    assert [e["prob"] for e in report["measure"]] == ["1/4"] * 4
    assert report["verdict"] is True


def test_verify_without_suites_is_trivially_green(capsys):
    code, report = run_json(capsys, "verify")
    assert code == 0
    assert report["suites"] == []
    assert report["verdict"] is True


# -- exit codes --------------------------------------------------------------------


def test_unknown_suite_exits_2(capsys):
    assert main(["verify", "--suite", "no-such-suite"]) == 2


def test_stochastic_suite_without_seed_exits_2(capsys):
    assert main(["verify", "--suite", "quotient-law"]) == 2


def test_simulate_without_seed_exits_2(capsys):
    assert main(["simulate", "--family", "cycle:6"]) == 2


def test_oversized_ball_exits_3(capsys):
    assert main(["ball", "--p", "2", "--radius", "9"]) == 3


def test_composite_residue_prime_exits_2(capsys):
    assert main(["ball", "--p", "4", "--radius", "2"]) == 2


def test_quotient_without_action_exits_2(capsys):
    assert main(["quotient", "--family", "cycle:6"]) == 2


def test_induce_subset_outside_network_exits_2(capsys):
    assert main(["induce", "--family", "cycle:6", "--subset", "[0, 19]"]) == 2


def test_no_command_exits_2(capsys):
    assert main([]) == 2


def test_failing_statistical_check_exits_1(capsys):
    # this seed and sample count land a borderline chi-square miss
    # (p = 0.0085 < 0.01) in the integer-mod-3 law check, reproducibly
    code, report = run_json(capsys, "verify", "--suite", "quotient-law",
                            "--seed", "20260825", "--samples", "4000")
    assert code == 1
    assert report["verdict"] is False
    failed = [c for s in report["suites"] for c in s["checks"]
              if not c["verdict"]]
    assert failed and all(c["p_value"] <= 0.01 for c in failed)


# -- determinism -------------------------------------------------------------------


def test_verify_reports_identical_across_workers(capsys):
    outputs = []
    for workers in ("1", "3", "8"):
        code, out = run_raw(capsys, "verify", "--suite", "hitting-tree",
                            "--seed", "99", "--samples", "1500",
                            "--workers", workers)
        outputs.append((code, out))
    assert outputs[0] == outputs[1] == outputs[2]


def test_simulate_same_seed_same_report(capsys):
    first = run_raw(capsys, "simulate", "--family", "tree:2", "--steps", "300",
                    "--seed", "11")
    second = run_raw(capsys, "simulate", "--family", "tree:2", "--steps", "300",
                     "--seed", "11")
    assert first == second
    assert first[0] == 0


# -- config handling ---------------------------------------------------------------


def test_config_file_merges_under_flags(tmp_path, capsys):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"family": "cycle:8", "steps": 50, "seed": 3}))
    code, report = run_json(capsys, "simulate", "--config", str(conf),
                            "--steps", "10")
    assert code == 0
    assert report["family"] == "cycle:8"
    assert report["seed"] == 3
    assert report["steps"] == 10  # flag wins over the config value


def test_malformed_config_exits_2(tmp_path, capsys):
    conf = tmp_path / "bad.json"
    conf.write_text("{not json")
    assert main(["simulate", "--config", str(conf), "--seed", "1"]) == 2


# -- report content ----------------------------------------------------------------


def test_coxeter_tables_values(capsys):
    code, report = run_json(capsys, "coxeter-tables", "--box", "2")
    assert code == 0
    assert report["weyl_order"] == 6
    row = next(r for r in report["n_lambda_table"] if r["lambda"] == [1, 1])
    assert row["chi"] == 16 and row["n_lambda"] == 42
    full = next(p for p in report["parabolics"] if p["subset"] == [1, 2])
    assert full["order"] == 6
    assert full["poincare"] == "21/8"
    assert full["longest_length"] == 3
    trivial = next(p for p in report["parabolics"] if p["subset"] == [])
    assert trivial["order"] == 1 and trivial["poincare"] == 1


def test_ball_report_partition(capsys):
    code, report = run_json(capsys, "ball", "--p", "2", "--radius", "2")
    assert code == 0
    assert report["vertices"] == 1121
    counts = {tuple(e["lambda"]): e["count"] for e in report["partition"]}
    assert counts[(0, 1)] == 7
    assert counts[(1, 1)] == 42
    assert counts[(2, 2)] == 672
    assert all(e["complete"] for e in report["partition"] if e["lambda"] != [0, 0])


def test_induce_exact_rows(capsys):
    code, report = run_json(capsys, "induce", "--family", "cycle:6",
                            "--subset", "[0, 2, 4]")
    assert code == 0
    assert report["reversibility_defect"] == 0
    for row in report["rows"]:
        probs = {e["to"]: e["prob"] for e in row["row"]}
        assert probs[row["from"]] == "1/2"
        others = [v for k, v in probs.items() if k != row["from"]]
        assert others == ["1/4", "1/4"]


def test_quotient_rotation_exact(capsys):
    code, report = run_json(capsys, "quotient", "--family", "cycle:6",
                            "--action", "rotation:2")
    assert code == 0
    assert report["classes"] == ["0", "1"]
    assert report["m_prime"] == {"0": 2, "1": 2}
    assert report["stationarity_defect"] == 0
    assert report["invariance"]["mode"] == "exact"
    assert report["invariance"]["defect"] == 0
    assert report["covolume"] == {"value": 4, "verdict": "finite", "terms": 2}
    assert report["law"] is None


def test_quotient_translation_with_law(capsys):
    code, report = run_json(capsys, "quotient", "--family", "integer-line",
                            "--action", "translation:3", "--seed", "12",
                            "--samples", "4000")
    assert code == 0
    assert report["m_prime"] == {"0": 2, "1": 2, "2": 2}
    assert report["invariance"]["mode"] == "sampled"
    assert report["law"]["verdict"] is True


# -- output formats ----------------------------------------------------------------


def test_csv_format_on_stdout(capsys):
    code, out = run_raw(capsys, "coxeter-tables", "--box", "1",
                        "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "lambda,chi,n_lambda"
    assert "1 1,16,42" in lines


def test_out_directory_receives_files(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code = main(["ball", "--p", "2", "--radius", "1", "--out", str(out_dir),
                 "--format", "csv"])
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["schema"] == "chamberwalk/1"
    assert report["vertices"] == 57
    ball_doc = json.loads((out_dir / "ball.json").read_text())
    assert len(ball_doc["vertices"]) == 57
    csv_text = (out_dir / "ball.csv").read_text().splitlines()
    assert csv_text[0] == "lambda,count"


# -- the full battery ---------------------------------------------------------------


def test_all_suites_pass(capsys):
    code, report = run_json(capsys, "verify", "--suite", "all",
                            "--seed", "20260825", "--samples", "3000")
    assert code == 0
    assert report["verdict"] is True
    assert len(report["suites"]) == 12
    assert all(s["verdict"] for s in report["suites"])
