import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from pnq.cli import ConfigError, main, read_config, render, run_command

SCHEMA = json.loads(resources.files("pnq").joinpath("schema/report.schema.json").read_text())


def check(doc):
    jsonschema.validate(doc, SCHEMA)
    return doc


def canonical(doc):
    return {k: v for k, v in doc.items() if k not in ("runtime_ms", "threads")}


def test_count_small_value():
    code, doc = run_command(["count", "--n", "4", "--X", "50"])
    assert code == 0
    check(doc)
    assert doc["result"]["value_re"] == pytest.approx(4 * math.log(5) * math.log(2))
    assert doc["result"]["value_im"] == 0


def test_sigma_document():
    code, doc = run_command(["sigma", "--n", "4"])
    assert code == 0
    check(doc)
    r = doc["result"]
    assert (r["sigma_exact"], r["brute_count"], r["unit_group_order"], r["agree"]) == ("2", 16, 32, True)


def test_domain_error_exit_code():
    code, doc = run_command(["sigma", "--n", "5"])
    assert code == 2
    check(doc)
    assert "result" not in doc


def test_capacity_exit_code():
    code, doc = run_command(["kappa", "--n", "4", "--tol", "1e-30"])
    assert code == 3
    check(doc)


def test_failed_criterion_exit_code():
    code, doc = run_command(["report", "--criteria", "7"])
    check(doc)
    assert code == 4 and doc["result"]["all_passed"] is False


def test_kappa_routes_agree():
    code, doc = run_command(["kappa", "--n", "6", "--method", "both"])
    assert code == 0
    check(doc)
    text = json.dumps(doc["result"])
    assert "1.6113" in text


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small case\nn = 4\nX = 50\n\nell = 2  \n")
    assert read_config(str(cfg)) == {"n": "4", "X": "50", "ell": "2"}
    code, doc = run_command(["count", "--n", "4", "--X", "1", "--config", str(cfg)])
    assert code == 0
    check(doc)
    # values on the command line win over the file
    assert doc["config"]["X"] == 1 and doc["config"]["ell"] == 2


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 4\nbogus = 1\n")
    code, doc = run_command(["sigma", "--n", "4", "--config", str(cfg)])
    assert code == 2


def test_config_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n 4\n")
    with pytest.raises(ConfigError):
        read_config(str(cfg))


def test_csv_rendering():
    _, doc = run_command(["sigma", "--n", "4"])
    lines = render(doc, "csv").splitlines()
    assert lines[0] == "key,value"
    assert "result.brute_count,16" in lines


def test_thread_count_does_not_change_results():
    argv = ["count", "--n", "4", "--X", "100000", "--ell", "2"]
    _, a = run_command(argv + ["--threads", "1"])
    _, b = run_command(argv + ["--threads", "2"])
    assert canonical(a) == canonical(b)


def test_corrupt_cache_is_rebuilt(tmp_path):
    cache = tmp_path / "idx.bin"
    argv = ["typesum", "--kind", "I", "--n", "4", "--X", "2000", "--L", "10", "--cache", str(cache)]
    _, fresh = run_command(argv)
    assert cache.exists()
    cache.write_bytes(b"not an index")
    code, rebuilt = run_command(argv)
    assert code == 0
    check(rebuilt)
    assert rebuilt["result"] == fresh["result"]


def test_out_file_and_entry_point(tmp_path):
    out = tmp_path / "o.json"
    assert main(["sigma", "--n", "4", "--out", str(out)]) == 0
    check(json.loads(out.read_text()))
    proc = subprocess.run([sys.executable, "-m", "pnq.cli", "sigma", "--n", "6"], capture_output=True, text=True)
    assert proc.returncode == 0
    check(json.loads(proc.stdout))


def test_usage_error():
    assert main(["count", "--n"]) == 2
