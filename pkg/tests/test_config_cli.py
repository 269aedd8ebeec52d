import csv
import json
import math
import subprocess
import sys
import textwrap

import pytest
from hypothesis import given, strategies as st

from twistspec import __version__
from twistspec.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from twistspec.config import default_config, load, loads
from twistspec.errors import ConfigurationError, NumericalFailure

FAST = """\
profile: {name: linear}
cross_section: {a1: -1.0, a2: 1.0}
transverse: {s: [0, 4, 16, 64], cells: 256, quantities: [gauss_curvature, v2]}
effective: {m: [0, 1, 2], k: 2, cells: 512, refine: false}
spectrum2d: {S: [2, 4], density: 8, nt: 32, count: 2}
gap: {n: [4, 8, 16]}
weyl: {m: [0], n: [2, 4], nt: 32}
"""


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def run(tmp_path, *args, text=FAST, out="out"):
    cfg = write(tmp_path, text)
    return main([*args, "--config", str(cfg), "--out", str(tmp_path / out)])


# -- configuration -----------------------------------------------------------------------

def test_defaults_are_documented_values():
    cfg = default_config()
    assert cfg.profile.name == "linear"
    assert (cfg.cross_section.a1, cfg.cross_section.a2) == (-1.0, 1.0)
    assert cfg.spectrum2d.S == [6.0, 12.0, 24.0]
    assert cfg.output.format == "csv"


def test_round_trip_is_identical(tmp_path):
    cfg = loads(FAST)
    again = loads(cfg.dump())
    assert again == cfg
    path = write(tmp_path, cfg.dump(), "dumped.yaml")
    assert load(path) == cfg


@given(a1=st.floats(-5, 5), width=st.floats(0.01, 5), cells=st.integers(16, 5000),
       ms=st.lists(st.floats(0, 4), min_size=1, max_size=4), fmt=st.sampled_from(["csv", "json"]))
def test_round_trip_property(a1, width, cells, ms, fmt):
    a2 = a1 + width
    if not a1 < a2:
        return
    text = (f"cross_section: {{a1: {a1!r}, a2: {a2!r}}}\n"
            f"effective: {{m: {ms!r}, cells: {cells}}}\n"
            f"output: {{format: {fmt}}}\n")
    cfg = loads(text)
    assert loads(cfg.dump()) == cfg


@pytest.mark.parametrize("text,line,fragment", [
    ("profile: {name: linear}\ncross_section:\n  a1: 2.0\n  a2: 1.0\n", 3, "a1 < a2"),
    ("profile:\n  name: spiral\n", 2, "unknown profile"),
    ("effective:\n  k: 3\n  bogus: 1\n", 3, "bogus"),
    ("output:\n  format: xml\n", 2, "format"),
    ("spectrum2d:\n  S: [12, 6]\n", 2, "increasing"),
    ("spectrum2d:\n  S: [1.03]\n  density: 16\n", 3, "integer"),
    ("verify:\n  tolerances:\n    disk: -1\n", 3, "positive"),
    ("verify:\n  tolerances:\n    nonsense: 1.0e-3\n", 3, "unknown tolerance"),
    ("\n\nwhatever: 1\n", 3, "unknown section"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigurationError) as info:
        loads(text, "exp.yaml")
    msg = str(info.value)
    assert msg.startswith(f"exp.yaml:{line}:")
    assert fragment in msg


def test_missing_derivatives_for_v1():
    text = "profile:\n  name: linear\n  derivatives: 2\ntransverse:\n  quantities: [v1]\n"
    with pytest.raises(ConfigurationError, match="v1 needs 3"):
        loads(text)
    prof = loads(text.replace("[v1]", "[mean_curvature]")).build_profile()
    assert prof.d2theta is not None and prof.d3theta is None


def test_invalid_yaml_reports_line():
    with pytest.raises(ConfigurationError, match=r"<string>:3: invalid YAML"):
        loads("profile:\n  name: [linear\n")


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load(tmp_path / "missing.yaml")


# -- commands ----------------------------------------------------------------------------

def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_transverse_table_and_manifest(tmp_path):
    assert run(tmp_path, "transverse") == EXIT_OK
    rows = read_csv(tmp_path / "out" / "transverse.csv")
    assert list(rows[0]) == ["s", "lambda_s", "lambda1", "gap", "gauss_curvature", "v2"]
    gaps = [abs(float(r["gap"])) for r in rows]
    assert all(b < a for a, b in zip(gaps[1:], gaps[2:]))
    man = json.loads((tmp_path / "out" / "transverse_manifest.json").read_text())
    assert man["version"] == __version__ and man["status"] == "pass"
    assert man["config"]["transverse"]["cells"] == 256
    assert all(c["anchor"] for c in man["checks"])
    assert "sweep" in man["timings_s"]


def test_flat_profile_gives_constant_column(tmp_path):
    text = FAST.replace("{name: linear}", "{name: constant, params: {c: 0.0}}")
    assert run(tmp_path, "transverse", text=text) == EXIT_OK
    lam = {r["lambda_s"] for r in read_csv(tmp_path / "out" / "transverse.csv")}
    assert len(lam) == 1
    assert float(lam.pop()) == pytest.approx(math.pi ** 2 / 4, rel=5e-5)


def test_csv_output_is_bit_identical(tmp_path):
    assert run(tmp_path, "effective", out="a") == EXIT_OK
    assert main(["effective", "--config", str(tmp_path / "cfg.yaml"), "--out", str(tmp_path / "b"),
                 "--threads", "3"]) == EXIT_OK
    a = (tmp_path / "a" / "effective.csv").read_bytes()
    assert a == (tmp_path / "b" / "effective.csv").read_bytes()
    # shortest round-trip floats
    for r in read_csv(tmp_path / "a" / "effective.csv"):
        assert repr(float(r["lambda"])) == r["lambda"]


def test_effective_first_level(tmp_path):
    text = FAST.replace("refine: false", "refine: true")
    assert run(tmp_path, "effective", text=text) == EXIT_OK
    rows = read_csv(tmp_path / "out" / "effective.csv")
    first = next(r for r in rows if float(r["m"]) == 0 and r["k"] == "1")
    assert float(first["lambda"]) == pytest.approx(5.783185962946785, abs=1e-6)
    assert first["multiplicity"] == "2"
    ones = [float(r["lambda"]) for r in rows if r["k"] == "1"]
    assert all(b > a for a, b in zip(ones, ones[1:]))


def test_json_format(tmp_path):
    cfg = write(tmp_path, FAST)
    assert main(["gap", "--config", str(cfg), "--out", str(tmp_path), "--format", "json"]) == EXIT_OK
    records = json.loads((tmp_path / "gap.json").read_text())
    assert [r["n"] for r in records] == [4, 8, 16]
    assert all(r["total"] < 0 for r in records)


def test_spectrum2d_flat_sanity(tmp_path):
    text = FAST.replace("{name: linear}", "{name: constant, params: {c: 0.0}}")
    assert run(tmp_path, "spectrum2d", text=text) == EXIT_OK
    rows = read_csv(tmp_path / "out" / "spectrum2d.csv")
    low = next(r for r in rows if r["S"] == "4.0" and r["end_condition"] == "dirichlet_ends" and r["index"] == "1")
    assert float(low["eigenvalue"]) == pytest.approx(math.pi ** 2 / 4 + math.pi ** 2 / 64, rel=5e-3)


def test_spectrum2d_degenerate_counts(tmp_path):
    assert run(tmp_path, "spectrum2d") == EXIT_OK
    man = json.loads((tmp_path / "out" / "spectrum2d_manifest.json").read_text())
    assert man["diagnostics"]["below_counts"]["4.0"] >= 1


def test_spectrum2d_annulus_has_no_count_check(tmp_path):
    text = FAST.replace("{a1: -1.0, a2: 1.0}", "{a1: 1.0, a2: 2.0}")
    assert run(tmp_path, "spectrum2d", text=text) == EXIT_OK
    man = json.loads((tmp_path / "out" / "spectrum2d_manifest.json").read_text())
    assert not any("count" in c["name"] for c in man["checks"])


def test_weyl_command(tmp_path):
    assert run(tmp_path, "weyl") == EXIT_OK
    res = [float(r["residual"]) for r in read_csv(tmp_path / "out" / "weyl.csv")]
    assert res[1] < res[0]


def test_gap_rejects_annulus(tmp_path):
    text = FAST.replace("{a1: -1.0, a2: 1.0}", "{a1: 1.0, a2: 2.0}")
    assert run(tmp_path, "gap", text=text) == EXIT_CONFIG


def test_config_error_exit_code(tmp_path, capsys):
    bad = "cross_section:\n  a1: 1.0\n  a2: 0.0\n"
    assert run(tmp_path, "transverse", text=bad) == EXIT_CONFIG
    assert "cfg.yaml:2:" in capsys.readouterr().err


def test_v1_without_derivatives_exit_code(tmp_path):
    text = "profile: {name: linear, derivatives: 2}\ntransverse: {quantities: [v1]}\n"
    assert run(tmp_path, "transverse", text=text) == EXIT_CONFIG


def test_bad_thread_count(tmp_path):
    assert run(tmp_path, "gap", "--threads", "0") == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    from twistspec import sturm

    def broken(*a, **k):
        raise NumericalFailure("forced")

    monkeypatch.setattr(sturm, "lambda_of_s_sweep", broken)
    assert run(tmp_path, "transverse") == EXIT_NUMERIC


def test_verify_with_infeasible_tolerance(tmp_path):
    text = "verify:\n  tolerances:\n    disk: 1.0e-13\n"
    assert run(tmp_path, "verify", text=text) == EXIT_ASSERT
    rows = read_csv(tmp_path / "out" / "verify.csv")
    assert rows[0]["status"] == "tolerance infeasible"


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "twistspec.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("transverse", "effective", "spectrum2d", "gap", "weyl", "verify"):
        assert cmd in out.stdout


def test_exponent_without_decimal_point_is_a_float():
    cfg = loads("effective: {tol: 1e-9}\nspectrum2d: {tol: 1E-7}\n")
    assert cfg.effective.tol == 1e-9 and cfg.spectrum2d.tol == 1e-7
