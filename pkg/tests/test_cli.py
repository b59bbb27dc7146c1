import json
import subprocess
import sys
from importlib.resources import files


from semiodesign.cli import main

FRIDGE = str(files("semiodesign") / "data" / "refrigerator.sgn")

ISO_FILE = """
system A { sort P; ctor pa() -> P @level 0; }
morphism id : A -> A { sort P -> P; ctor pa -> pa; }
config c of A { x = pa(); }
sequence s { component t 0..1 { from c; branch id p 1.0 -> A; } }
"""


def cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def trace_file(tmp_path, counts, name="t.jsonl"):
    lines = [json.dumps({"t": t, "rec": "event", "product": "p", "kind": "K", "mag": 1.0})
             for t, c in enumerate(counts) for _ in range(c)]
    return write(tmp_path, name, "\n".join(lines) + "\n")


# -- validate ---------------------------------------------------------------------

def test_validate_ok_is_silent(capsys):
    assert cli(capsys, "validate", FRIDGE) == (0, "", "")


def test_validate_reports_position(capsys, tmp_path):
    bad = write(tmp_path, "bad.sgn", "system S {\n  ctor f(Q) -> S @level 0;\n}\n")
    code, out, err = cli(capsys, "validate", bad)
    assert code == 2 and "UNKNOWN_SORT" in err and ":2:" in err


def test_validate_missing_file(capsys, tmp_path):
    code, _, err = cli(capsys, "validate", str(tmp_path / "none.sgn"))
    assert code == 2 and "IO_ERROR" in err


def test_validate_json(capsys, tmp_path):
    bad = write(tmp_path, "bad.sgn", "system S { ctor f(Q) -> Q @level 0; }")
    code, out, _ = cli(capsys, "--json", "validate", bad)
    payload = json.loads(out)
    assert code == 2 and payload["ok"] is False
    (d,) = [d for d in payload["diagnostics"] if d["code"] == "UNKNOWN_SORT"][:1]
    assert {"code", "message", "line", "column"} <= set(d)


# -- morph-check and laws -------------------------------------------------------------

def test_morph_check(capsys):
    code, out, _ = cli(capsys, "morph-check", FRIDGE, "--morphism", "simplify", "--json")
    payload = json.loads(out)
    assert code == 0
    assert payload["valid"] and not payload["isomorphism"] and not payload["level_preserving"]
    assert cli(capsys, "morph-check", FRIDGE, "--morphism", "nope")[0] == 2


def test_laws_hold_on_refrigerator(capsys):
    code, out, _ = cli(capsys, "laws", FRIDGE, "--sequence", "redesign", "--json")
    payload = json.loads(out)
    assert code == 0 and payload["law1_holds"] and payload["law2_holds"]
    assert payload["level_break_witness"] == [0, 0]


def test_laws_fail_on_identity_sequence(capsys, tmp_path):
    path = write(tmp_path, "iso.sgn", ISO_FILE)
    code, out, _ = cli(capsys, "laws", path, "--sequence", "s", "--json")
    payload = json.loads(out)
    assert code == 1
    assert payload["well_defined_witness"] is None and payload["level_break_witness"] is None


def test_laws_unknown_names(capsys, tmp_path):
    path = write(tmp_path, "iso.sgn", ISO_FILE)
    assert cli(capsys, "laws", path, "--sequence", "zzz")[0] == 2
    assert cli(capsys, "laws", path, "--sequence", "s", "--config", "zzz")[0] == 2


# -- simulate ---------------------------------------------------------------------

def test_simulate_writes_trace_and_summary(capsys, tmp_path):
    out, summary = str(tmp_path / "t.jsonl"), str(tmp_path / "s.csv")
    code, stdout, _ = cli(capsys, "simulate", FRIDGE, "--scenario", "kitchen_trial", "--horizon", "50",
                          "--out", out, "--summary", summary, "--json")
    assert code == 0
    info = json.loads(stdout)
    assert info["seed"] == 0 and info["horizon"] == 50 and info["trace"] == out
    for line in open(out):
        rec = json.loads(line)
        assert rec["rec"] in ("event", "violation", "cluster") and isinstance(rec["t"], int)
    assert open(summary).readline().strip() == "product,slope,verdict,final_epsilon,synchronic_variety"


def test_simulate_default_seed_is_zero(capsys):
    _, a, _ = cli(capsys, "simulate", FRIDGE, "--scenario", "kitchen_trial", "--horizon", "30")
    _, b, _ = cli(capsys, "--seed", "0", "simulate", FRIDGE, "--scenario", "kitchen_trial", "--horizon", "30")
    assert a == b and a


def test_simulate_horizon_zero(capsys):
    assert cli(capsys, "simulate", FRIDGE, "--scenario", "kitchen_trial", "--horizon", "0") == (0, "", "")


def test_simulate_errors(capsys, tmp_path):
    assert cli(capsys, "simulate", FRIDGE)[0] == 2  # two scenarios, none chosen
    assert cli(capsys, "simulate", FRIDGE, "--scenario", "nope")[0] == 2
    code, _, err = cli(capsys, "simulate", FRIDGE, "--scenario", "kitchen_trial", "--horizon", "5",
                       "--out", str(tmp_path / "missing" / "t.jsonl"))
    assert code == 3 and "IO_ERROR" in err


# -- trend and clusters ------------------------------------------------------------------

def test_trend_verdicts(capsys, tmp_path):
    down = trace_file(tmp_path, [8, 7, 6, 5, 4, 3, 2, 1], "down.jsonl")
    up = trace_file(tmp_path, [1, 2, 3, 4, 5, 6, 7, 8], "up.jsonl")
    code, out, _ = cli(capsys, "trend", "--trace", down, "--product", "p", "--window", "1", "--json")
    assert code == 0 and json.loads(out) == {"product": "p", "window": 1, "slope": -1.0,
                                             "verdict": "SUCCESSFUL"}
    assert cli(capsys, "trend", "--trace", up, "--product", "p")[0] == 1
    assert cli(capsys, "trend", "--trace", up, "--product", "ghost")[0] == 2


def test_trend_malformed_trace(capsys, tmp_path):
    bad = write(tmp_path, "bad.jsonl", "{oops\n")
    code, _, err = cli(capsys, "trend", "--trace", bad, "--product", "p")
    assert code == 2 and "MALFORMED_TRACE" in err
    assert cli(capsys, "clusters", "--trace", bad)[0] == 2
    assert cli(capsys, "trend", "--trace", str(tmp_path / "none"), "--product", "p")[0] == 2


def test_clusters(capsys, tmp_path):
    out = str(tmp_path / "t.jsonl")
    cli(capsys, "simulate", FRIDGE, "--scenario", "kitchen_trial", "--horizon", "60", "--out", out)
    code, stdout, _ = cli(capsys, "clusters", "--trace", out, "--json")
    payload = json.loads(stdout)
    assert code == 0 and payload["count"] == 1 and payload["assignments"] == {"fridge1": 0}
    code, stdout, _ = cli(capsys, "clusters", "--trace", out, "--tau", "0.5", "--json")
    assert code == 0 and json.loads(stdout)["source"] == "rates"
    assert cli(capsys, "clusters", "--trace", out, "--tau", "-1")[0] == 2


def test_console_entry_point(tmp_path):
    args = [sys.executable, "-m", "semiodesign", "simulate", FRIDGE, "--scenario", "kitchen_control",
            "--horizon", "40", "--seed", "9"]
    a = subprocess.run(args, capture_output=True, check=True).stdout
    b = subprocess.run(args, capture_output=True, check=True).stdout
    assert a == b and a.count(b"\n") > 40
    usage = subprocess.run([sys.executable, "-m", "semiodesign"], capture_output=True)
    assert usage.returncode == 2


def test_unexpected_failure_is_internal_error(capsys, monkeypatch):
    import semiodesign.cli as mod

    def boom(*_):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(mod, "load_file", boom)
    code, out, err = cli(capsys, "validate", FRIDGE)
    assert code == 3 and "INTERNAL_ERROR" in err and "Traceback" not in err
