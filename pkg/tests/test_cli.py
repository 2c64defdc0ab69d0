"""Command-line behaviour: headers, determinism, exit codes, JSON shape."""

import json
import subprocess
import sys

import pytest

from seqcoal.cli import main


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_simulate_csv_header_and_determinism(capsys):
    rc, out1, _ = run_cli(capsys, "simulate", "--n", "6", "--replicates", "2",
                          "--seed", "5")
    assert rc == 0
    lines = out1.splitlines()
    assert lines[0] == "replicate,event_index,time,block_a,block_b"
    assert len(lines) == 1 + 2 * 5
    rc, out2, _ = run_cli(capsys, "simulate", "--n", "6", "--replicates", "2",
                          "--seed", "5")
    assert out2 == out1
    rc, out3, _ = run_cli(capsys, "simulate", "--n", "6", "--replicates", "2",
                          "--seed", "6")
    assert out3 != out1


def test_pebls_csv(capsys):
    rc, out, _ = run_cli(capsys, "pebls", "--n", "5", "--replicates", "3")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "replicate,individual,length"
    assert len(lines) == 1 + 3 * 4
    assert lines[1].startswith("0,2,")


def test_ra_sample_csv(capsys):
    rc, out, _ = run_cli(capsys, "ra-sample", "--paths", "3", "--steps", "5")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "path,i,R,A"
    assert len(lines) == 1 + 3 * 6
    assert lines[1] == "0,1,1,2"


def test_ra_sample_burn_in(capsys):
    rc, out, _ = run_cli(capsys, "ra-sample", "--paths", "1", "--steps", "5",
                         "--burn-in", "3")
    lines = out.splitlines()
    assert len(lines) == 1 + 3  # indices 4..6
    assert lines[1].split(",")[1] == "4"


def test_ra_extract_csv(capsys):
    rc, out, _ = run_cli(capsys, "ra-extract", "--replicates", "2", "--n", "2")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "replicate,i,R,A"
    # every replicate emits its first record with rank 1
    first = [ln for ln in lines[1:] if ln.split(",")[1] == "1"]
    assert all(ln.split(",")[2] == "1" for ln in first)


def test_limit_csv(capsys):
    rc, out, _ = run_cli(capsys, "limit", "--paths", "2", "--steps", "4")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "path,i,xi"
    assert len(lines) == 1 + 2 * 5


def test_wn_csv(capsys):
    rc, out, _ = run_cli(capsys, "wn", "--n", "50")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "kind,index,value"
    assert lines[1] == "pmf,0,0.0"
    assert any(ln.startswith("local_limit,") for ln in lines)


def test_pmf_rank_frozen_rows(capsys):
    rc, out, _ = run_cli(capsys, "pmf", "--r", "1", "--a", "3")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "x,prob"
    assert len(lines) == 3
    xs = [ln.split(",")[0] for ln in lines[1:]]
    ps = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert xs == ["1", "2"]
    assert ps[0] == 0.8
    assert ps[1] == pytest.approx(0.2, rel=1e-12)


def test_pmf_position_rows(capsys):
    rc, out, _ = run_cli(capsys, "pmf", "--kind", "position", "--r", "2",
                         "--a", "3", "--cutoff", "3")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "x,prob"
    assert len(lines) == 4
    assert float(lines[1].split(",")[1]) == pytest.approx(1.0 / 6.0)


def test_pmf_position_rejects_rank_one(capsys):
    rc, _, err = run_cli(capsys, "pmf", "--kind", "position", "--r", "1",
                         "--a", "3")
    assert rc == 2
    assert "error:" in err


def test_json_output_is_canonical(capsys):
    rc, out, _ = run_cli(capsys, "simulate", "--n", "4", "--format", "json")
    assert rc == 0
    payload = json.loads(out)
    assert out == json.dumps(payload, indent=2, sort_keys=True) + "\n"
    rc, out, _ = run_cli(capsys, "pmf", "--r", "2", "--a", "6", "--format",
                         "json")
    payload = json.loads(out)
    assert payload["probs"][0] == pytest.approx(6.0 / 9.0)
    assert out == json.dumps(payload, indent=2, sort_keys=True) + "\n"


def test_out_file_matches_stdout(tmp_path, capsys):
    rc, out, _ = run_cli(capsys, "pebls", "--n", "6")
    dest = tmp_path / "pebls.csv"
    rc2 = main(["pebls", "--n", "6", "--out", str(dest)])
    capsys.readouterr()
    assert rc2 == 0
    assert dest.read_text() == out


def test_verify_single_criterion(capsys):
    rc, out, err = run_cli(capsys, "verify", "--criteria", "4")
    assert rc == 0
    payload = json.loads(out)
    assert payload["all_pass"] is True
    assert payload["seed"] == 0
    assert [c["id"] for c in payload["criteria"]] == [4]
    assert payload["criteria"][0]["pass"] is True
    # progress goes to stderr only, with one line per criterion
    assert "criterion  4" in err
    assert "pass" in err
    assert out == json.dumps(payload, indent=2, sort_keys=True) + "\n"


def test_verify_unknown_criterion(capsys):
    rc, _, err = run_cli(capsys, "verify", "--criteria", "99")
    assert rc == 2
    assert "unknown criteria" in err


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_module_invocation_smoke(capsys):
    proc = subprocess.run(
        [sys.executable, "-m", "seqcoal.cli", "pmf", "--r", "1", "--a", "3"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    rc, out, _ = run_cli(capsys, "pmf", "--r", "1", "--a", "3")
    assert proc.stdout == out
