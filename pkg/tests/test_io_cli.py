import csv
import json

import numpy as np
import pytest

from bhlab import io
from bhlab.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from bhlab.errors import ConfigurationError
from bhlab.solver import CFLStep, FixedStep, RationalFamily, SingleMode
from bhlab.spectral import GridSpec, RealField

BASE = """
[grid]
n = 64
L = 10
[equation]
alpha = 0.5
[time]
t_max = 0.05
dt = 0.01
[initial]
variant = single_mode
amplitude = 0.3
[diagnostics]
cadence = 2
beta0 = -1
[output]
plot = off
"""


def edit(text, section, key, value=None):
    """Replace, add or (value None) remove one key of an INI text."""
    out, cur, done = [], None, False
    for line in text.strip().splitlines():
        if line.startswith("["):
            if cur == section and not done and value is not None:
                out.append(f"{key} = {value}")
                done = True
            cur = line.strip("[]")
        elif cur == section and line.split("=")[0].strip() == key:
            if value is not None:
                out.append(f"{key} = {value}")
            done = True
            continue
        out.append(line)
    if cur == section and not done and value is not None:
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# field files


def test_field_round_trip_is_bitwise(tmp_path):
    g = GridSpec(128, 7.3)
    rng = np.random.default_rng(1)
    u = RealField(g, rng.standard_normal(128) * 1e3 + 1e-300)
    io.write_field(tmp_path / "f.txt", u)
    v = io.read_field(tmp_path / "f.txt")
    assert v.grid == g
    assert np.array_equal(v.values, u.values)
    assert (tmp_path / "f.txt").read_text().startswith("# bh-field v1 n=128 L=7.2999999999999998")


@pytest.mark.parametrize("content", [
    "1.0\n2.0\n",
    "# bh-field v1 n=4 L=1\n1\n2\n3\n",
    "# bh-field v1 n=4 L=1\n1\n2\nx\n4\n",
    "# bh-field v1 n=6 L=1\n1\n2\n3\n4\n5\n6\n",
])
def test_field_file_errors(tmp_path, content):
    (tmp_path / "bad.txt").write_text(content)
    with pytest.raises(ConfigurationError):
        io.read_field(tmp_path / "bad.txt")


# ---------------------------------------------------------------------------
# configuration


def test_parse_base_config(tmp_path):
    cfg = io.parse_config(BASE, tmp_path)
    assert cfg.sim.grid == GridSpec(64, 10.0)
    assert cfg.sim.alpha == 0.5
    assert isinstance(cfg.sim.dt_policy, FixedStep)
    assert cfg.sim.initial_data == SingleMode(0.3, 1)
    assert cfg.sim.diag_every == 2 and cfg.sim.beta0 == -1
    assert cfg.sim.weights is None
    assert cfg.plot is False and cfg.final_field is True
    assert cfg.output_dir == tmp_path / "out"


def test_parse_cfl_and_rational():
    text = edit(edit(BASE, "time", "dt"), "time", "cfl_sigma", "0.4")
    text = edit(edit(text, "initial", "amplitude"), "initial", "variant", "rational")
    text = edit(edit(text, "initial", "a", "2"), "initial", "b", "3")
    cfg = io.parse_config(text)
    assert isinstance(cfg.sim.dt_policy, CFLStep) and cfg.sim.dt_policy.sigma == 0.4
    assert cfg.sim.initial_data == RationalFamily(2.0, 3.0, True)


@pytest.mark.parametrize("section, key", [("grid", "n"), ("grid", "L"), ("equation", "alpha"),
                                          ("time", "t_max"), ("initial", "variant")])
def test_missing_required_key_is_named(section, key):
    with pytest.raises(ConfigurationError, match=rf"\[{section}\] {key}"):
        io.parse_config(edit(BASE, section, key))


@pytest.mark.parametrize("section, key, value", [
    ("time", "cfl_sigma", "0.5"),        # dt and cfl together
    ("diagnostics", "p", "2.5"),         # p without q
    ("grid", "colour", "blue"),          # unknown key
    ("grid", "n", "100"),                # not a power of two
    ("grid", "n", "sixty"),              # unparsable
    ("equation", "alpha", "2.5"),        # alpha out of range
    ("initial", "variant", "sawtooth"),  # unknown variant
    ("initial", "a", "1"),               # key of another variant
    ("output", "plot", "maybe"),
])
def test_config_errors(section, key, value):
    with pytest.raises(ConfigurationError):
        io.parse_config(edit(BASE, section, key, value))


def test_unknown_section_and_malformed():
    with pytest.raises(ConfigurationError):
        io.parse_config(BASE + "[extras]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        io.parse_config("not an ini file")


def test_weighted_config_rejects_bad_weight():
    text = edit(edit(BASE, "diagnostics", "p", "2.5"), "diagnostics", "q", "1.5")
    with pytest.raises(ConfigurationError):
        io.parse_config(text)


def test_shipped_configs_parse():
    for name in ("blowup", "blowup_fine", "smooth_weighted"):
        cfg = io.load_config(f"configs/{name}.ini")
        assert cfg.sim.grid.n_points >= 1024


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        io.load_config(tmp_path / "nope.ini")


# ---------------------------------------------------------------------------
# CLI


def _write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


def test_simulate_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "run"
    assert main(["simulate", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader((out / "records.csv").open()))
    assert tuple(rows[0]) == io.RECORD_COLUMNS
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([0.0, 0.02, 0.04, 0.05])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stop_reason"] == "t_max"
    final = io.read_field(out / "final_field.txt")
    assert final.grid == GridSpec(64, 10.0)
    assert "stop_reason = t_max" in capsys.readouterr().out


def test_simulate_zero_initial_data(tmp_path):
    text = edit(edit(BASE, "initial", "amplitude"), "initial", "variant", "zero")
    out = tmp_path / "z"
    assert main(["simulate", str(_write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader((out / "records.csv").open()))
    assert len(rows) == 5  # the equilibrium is advanced and recorded
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[1:6])


def test_simulate_with_plots(tmp_path):
    text = edit(BASE, "output", "plot", "on")
    out = tmp_path / "p"
    assert main(["simulate", str(_write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    assert (out / "snapshots.svg").exists() and (out / "ux_max.svg").exists()


def test_simulate_config_error_exit(tmp_path, capsys):
    cfg = _write(tmp_path, edit(BASE, "equation", "alpha"))
    assert main(["simulate", str(cfg)]) == EXIT_CONFIG
    assert "[equation] alpha" in capsys.readouterr().err


def test_usage_error_exit():
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["kernel-table", "--p", "2.5"]) == EXIT_CONFIG


def test_certify_threshold(tmp_path):
    out = tmp_path / "c"
    assert main(["certify", "threshold", "--a", "1300", "--b", "1", "--out", str(out)]) == EXIT_OK
    assert "overall = PASS" in (out / "cert_report.txt").read_text()
    assert main(["certify", "threshold", "--a", "1", "--b", "1", "--out", str(out)]) == EXIT_FAILED
    assert main(["certify", "threshold", "--a", "1", "--out", str(out)]) == EXIT_CONFIG


def test_certify_lemma22_small(tmp_path):
    out = tmp_path / "l"
    code = main(["certify", "lemma22", "--n-fields", "3", "--n", "128", "--rational", "--out", str(out)])
    assert code == EXIT_OK
    text = (out / "cert_report.txt").read_text()
    assert "fields = 4" in text and "overall = PASS" in text


def test_certify_lemma22_field_file(tmp_path):
    g = GridSpec(128, 20.0)
    io.write_field(tmp_path / "f.txt", RealField(g, np.sin(2 * np.pi * g.nodes / 20.0)))
    assert main(["certify", "lemma22", "--field", str(tmp_path / "f.txt"), "--out", str(tmp_path)]) == EXIT_OK


def test_certify_appendix_and_gns(tmp_path):
    for which in ("appendix", "gns"):
        code = main(["certify", which, "--alpha", "1", "--p", "2", "--n-fields", "2", "--n", "64",
                     "--out", str(tmp_path / which)])
        assert code == EXIT_OK
    assert main(["certify", "appendix", "--n-fields", "1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_kernel_table_middle_range(tmp_path):
    out = tmp_path / "k"
    assert main(["kernel-table", "--q", "0.7", "--p", "2.8", "--alpha", "0.6", "--x-min", "0.5",
                 "--x-max", "2", "--per-decade", "4", "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader((out / "kernel.csv").open()))
    assert rows[0] == ["x", "I_value", "tail_bound"]
    assert "small_x_fit = none" in (out / "kernel_fit.txt").read_text()


def test_kernel_table_rejects_bad_weight(tmp_path):
    assert main(["kernel-table", "--q", "1.5", "--p", "2.5", "--alpha", "0.5", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["kernel-table", "--q", "0.5", "--p", "2.5", "--alpha", "0.5", "--x-min", "2",
                 "--x-max", "1", "--out", str(tmp_path)]) == EXIT_CONFIG
