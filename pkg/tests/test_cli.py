import pytest

from ecopanda.cli import EXIT_ALL_DIVERGED, EXIT_OK, EXIT_VALIDATION, build_parser, main

SMALL = "n = 4\np = 2\nd = 3\nhorizon = 200\niters = 200\npi = 0.6\nc_eco = 0.01\neta_eco = 0.8\n"


def test_constants_subcommand_prints_lines(capsys):
    code = main(["constants", "--mu", "1", "--L", "2", "--eta", "8", "--B", "1", "--delta", "0.5"])
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert "C=0.010606441598723816" in captured.out
    assert "c_max=0.0013258051998404771" in captured.out
    assert "warning:" in captured.err


def test_constants_subcommand_validation_failure(capsys):
    code = main(["constants", "--mu", "3", "--L", "2", "--B", "1", "--delta", "0.5"])
    captured = capsys.readouterr()
    assert code == EXIT_VALIDATION
    assert "error:" in captured.err


def test_run_subcommand_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "results"
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert "wrote 6 files" in captured.out
    assert (out / "trace_eco_panda.csv").exists()
    assert (out / "plot.svg").exists()
    assert "eco_panda" in captured.out


def test_run_subcommand_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("pi = 2.0\n")
    assert main(["run", "--config", str(cfg)]) == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err


def test_run_subcommand_missing_config_file(capsys):
    assert main(["run", "--config", "/no/such/file.cfg"]) == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err


def test_run_subcommand_reports_total_divergence(tmp_path, capsys):
    cfg = tmp_path / "diverge.cfg"
    cfg.write_text("n = 4\nhorizon = 60\niters = 60\npi = 1.0\n"
                   "methods = eco_panda\nc_eco = 100.0\neta_eco = 1.0\n")
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    captured = capsys.readouterr()
    assert code == EXIT_ALL_DIVERGED
    assert "every method diverged" in captured.err
    assert "diverged at" in captured.out


def test_verify_graph_subcommand(tmp_path, capsys):
    cfg = tmp_path / "graph.cfg"
    cfg.write_text("n = 4\nhorizon = 120\npi = 0.7\n")
    code = main(["verify-graph", "--config", str(cfg)])
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert "P1 decentralized support: pass" in captured.out
    assert "P2 doubly stochastic: pass" in captured.out
    assert "P3 joint spectrum: pass" in captured.out


def test_verify_graph_defaults_without_config(tmp_path, capsys):
    # No --config runs the default graph model keys; use a tiny horizon via file instead.
    cfg = tmp_path / "small.cfg"
    cfg.write_text("n = 3\nhorizon = 30\npi = 0.0\n")
    code = main(["verify-graph", "--config", str(cfg)])
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert "P3 joint spectrum: fail" in captured.out


def test_parser_rejects_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_parser_exposes_all_subcommands():
    parser = build_parser()
    text = parser.format_help()
    for name in ("run", "constants", "verify-graph", "serve"):
        assert name in text
