import io
import json

import numpy as np
import pytest

from cascade_qed.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    PRESETS,
    RunSpec,
    main,
    parse_config,
    spec_from_dict,
    spec_to_dict,
)
from cascade_qed.errors import ConfigError
from cascade_qed.spectra import default_grid, peak_positions


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    lines = text.split("\n")
    header = lines[1].split(",")
    data = np.loadtxt(io.StringIO("\n".join(lines[2:])), delimiter=",", ndmin=2)
    return lines[0], header, data


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name, capsys):
    code, out, _ = run(["preset", name, "--emit-config"], capsys)
    assert code == EXIT_OK
    assert parse_config(io.StringIO(out)) == PRESETS[name]


def test_fig3_upper_preset_values():
    spec = PRESETS["fig3-upper"]
    assert spec.config.gamma_A == 5.0
    assert [s.g for s in spec.config.sites] == [50, 50]
    assert all((s.kappa_ex, s.kappa_in, s.delta, s.h) == (500, 0.5, 0, 0) for s in spec.config.sites)
    assert spec.initial.atom == 1 and spec.grid is None


def test_phase_conventions():
    g = {n: [s.g for s in PRESETS[n].config.sites] for n in ("fig2-lower", "fig3-lower", "fig5-atom1")}
    assert g["fig2-lower"][0] == 1j * g["fig2-lower"][1]
    assert g["fig3-lower"][0] == -1j * g["fig3-lower"][1]
    assert g["fig5-atom1"][0] == -1j * g["fig5-atom1"][1] == g["fig5-atom1"][2]
    assert PRESETS["fig2-upper"].config.sites[0].kappa_in == 0.1


def test_minimal_config_uses_default_grid():
    spec = spec_from_dict({"gamma_A": 1.0, "sites": [{"kappa_ex": 2.0, "g": [1, 0]}]})
    assert spec.resolved_grid == default_grid(spec.config)
    assert spec.initial.atom == 1


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"links": [{"phi_a": 0}, {"phi_a": 0}]}, "links"),
        ({"sites": [{"kappa_ex": -1}]}, "sites[0].kappa_ex"),
        ({"sites": [{"g": [1]}]}, "sites[0].g"),
        ({"initial": {"atom": 3}}, "initial.atom"),
        ({"initial": {"amplitudes": [[1, 0]] * 2}}, "initial.amplitudes"),
        ({"grid": {"min": 1, "max": 0, "points": 5}}, "grid"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_schema_violations_name_the_field(patch, field, tmp_path, capsys):
    data = {"gamma_A": 1.0, "sites": [{"kappa_ex": 1.0}, {"kappa_ex": 1.0}], **patch}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    code, _, err = run(["spectrum", "--config", str(path)], capsys)
    assert code == EXIT_CONFIG
    assert field in err


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text('{\n  "gamma_A": 1,\n  "sites": [}\n')
    code, _, err = run(["spectrum", "--config", str(path)], capsys)
    assert code == EXIT_CONFIG and "line 3" in err


def test_explicit_amplitudes():
    amps = [[0, 0]] * 6
    amps[0] = [0.6, 0]
    amps[3] = [0, 0.8]
    spec = spec_from_dict({"gamma_A": 1.0, "sites": [{"kappa_ex": 1.0}] * 2, "initial": {"amplitudes": amps}})
    assert spec.state.norm2 == pytest.approx(1.0)
    assert spec_from_dict(spec_to_dict(spec)) == spec
    with pytest.raises(ConfigError, match="norm"):
        spec_from_dict({"gamma_A": 1.0, "sites": [{}], "initial": {"amplitudes": [[1, 0], [1, 0], [0, 0]]}})


def test_spectrum_csv_format(capsys):
    code, out, _ = run(["spectrum", "--preset", "fig3-upper", "--grid=-100,100,11"], capsys)
    assert code == EXIT_OK
    first, header, data = read_csv(out)
    assert first == "# cascade-qed v1 spectrum"
    assert header == [
        "omega", "T_fiber_a", "T_fiber_b", "T_side_atom_1", "T_side_atom_2",
        "T_scatter_site_1", "T_scatter_site_2",
    ]
    assert data.shape == (11, 7) and "\r" not in out
    assert data[0, 0] == -100.0


def test_stdin_pipeline_and_fig5_doublet(capsys, monkeypatch):
    _, cfg, _ = run(["preset", "fig5-atom2"], capsys)
    code, out, _ = run(["spectrum", "--config", "-"], capsys, stdin=cfg, monkeypatch=monkeypatch)
    assert code == EXIT_OK
    _, _, data = read_csv(out)
    peaks = peak_positions(data[:, 0], data[:, 1])
    assert len(peaks) == 2 and peaks[0] == pytest.approx(-peaks[1])


def test_output_is_deterministic_across_threads(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["spectrum", "--preset", "fig4-atom2", "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["spectrum", "--preset", "fig4-atom2", "--out", str(b), "--threads", "4"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_evolve_csv(capsys):
    code, out, _ = run(["evolve", "--preset", "fig3-lower"], capsys)
    assert code == EXIT_OK
    first, header, data = read_csv(out)
    assert first == "# cascade-qed v1 evolve"
    assert header[:3] == ["t", "re_xi_1", "im_xi_1"] and "P_fiber_a" in header
    norm, pspon = data[:, header.index("norm2")], data[:, header.index("P_spon")]
    assert np.abs(norm + pspon - 1).max() < 1e-8


def test_reduced_spectrum_and_compare(capsys):
    code, out, _ = run(["reduced-spectrum", "--preset", "fig3-lower"], capsys)
    assert code == EXIT_OK and out.startswith("# cascade-qed v1 reduced-spectrum\n")
    code, out, err = run(["compare", "--preset", "fig2-upper", "--oracle", "strong"], capsys)
    assert code == EXIT_OK
    assert "equal-g" in err and "sup-norm" in err and "peaks" in err
    _, header, _ = read_csv(out)
    assert header[-1] == "T_fiber_b_oracle"


def test_compare_rejects_unsupported_oracle_config(capsys):
    code, _, err = run(["compare", "--preset", "fig4-atom1", "--oracle", "strong"], capsys)
    assert code == EXIT_CONFIG and "two sites" in err


def test_validate_preset(capsys):
    code, out, _ = run(["validate", "--preset", "fig3-lower"], capsys)
    assert code == EXIT_OK
    assert out.count("PASS") == 5


def test_pole_on_axis_exit_code(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"gamma_A": 0.0, "sites": [{}], "grid": {"min": -1, "max": 1, "points": 3}}))
    code, _, err = run(["spectrum", "--config", str(path)], capsys)
    assert code == EXIT_NUMERICAL and "imaginary axis" in err


def test_runspec_is_hashable_value():
    assert isinstance(PRESETS["fig2-upper"], RunSpec)
    assert PRESETS["fig2-upper"] != PRESETS["fig2-lower"]
