import math

import pytest

from eulerarnold.config import load_config, parse_config, parse_override
from eulerarnold.errors import ParseError, ValidationError
from eulerarnold.spectral import FourierField

MINIMAL = 'equation = "wunsch"\n[initial]\nmodes = [[2, 1.0, "sin"]]\n'


def test_minimal_document_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.equation == "wunsch"
    assert (cfg.N, cfg.M, cfg.dt, cfg.t_fin) == (256, 512, 1e-4, 0.5)
    assert cfg.modes == [(2, 1.0, "sin")]
    assert cfg.initial_condition().allclose(FourierField.from_trig(256, sin={2: 1.0}))


def test_negative_final_time_rejected():
    with pytest.raises(ValidationError) as e:
        parse_config(MINIMAL + "", overrides=["t_fin=-1"])
    assert e.value.field == "t_fin"
    with pytest.raises(ValidationError):
        parse_config("t_fin = -1\n" + MINIMAL)


def test_snapshot_beyond_final_time_rejected():
    with pytest.raises(ValidationError) as e:
        parse_config("t_fin = 0.5\nsnapshots = [0.1, 0.7]\n" + MINIMAL)
    assert e.value.field == "snapshots"


def test_snapshots_sorted_and_deduplicated():
    cfg = parse_config("snapshots = [0.25, 0, 0.125, 0.25]\n" + MINIMAL)
    assert cfg.snapshots == [0.0, 0.125, 0.25]


def test_syntax_error_reports_line():
    with pytest.raises(ParseError) as e:
        parse_config('equation = "wunsch"\nN = = 3\n')
    assert e.value.line == 2


def test_unknown_key_reports_line_and_field():
    with pytest.raises(ParseError) as e:
        parse_config(MINIMAL + "[detect]\nslope_treshold = 0.1\n")
    assert e.value.field == "detect.slope_treshold"
    assert e.value.line == 5


def test_type_errors_name_the_field():
    with pytest.raises(ValidationError) as e:
        parse_config('N = "big"\n' + MINIMAL)
    assert e.value.field == "N"
    with pytest.raises(ValidationError):
        parse_config("N = true\n" + MINIMAL)


@pytest.mark.parametrize("doc,field", [
    ('[initial]\nmodes = [[1, 1.0, "sin"]]\n', "equation"),
    ('equation = "kdv"\n[initial]\nmodes = [[1, 1.0, "sin"]]\n', "equation"),
    ('equation = "ewp"\n', "initial"),
    ('equation = "ewp"\n[initial]\nmodes = [[0, 1.0, "sin"]]\n', "initial.modes[0]"),
    ('equation = "ewp"\n[initial]\nmodes = [[2, 1.0, "tan"]]\n', "initial.modes[0]"),
    ('equation = "ewp"\n[initial]\nmodes = [[2, 1.0]]\n', "initial.modes[0]"),
    ('equation = "ewp"\nN = 8\n[initial]\nmodes = [[9, 1.0, "sin"]]\n', "initial.modes"),
    ('equation = "ewp"\n[initial]\nfourier_csv = "missing.csv"\n', "initial.fourier_csv"),
    ('equation = "ewp"\ndt = 1.0\nt_fin = 0.5\n[initial]\nmodes = [[2, 1.0, "sin"]]\n', "dt"),
    ('equation = "ewp"\n[detect]\ntail_threshold = 1.5\n[initial]\nmodes = [[2, 1.0, "sin"]]\n',
     "detect.tail_threshold"),
    ('equation = "ewp"\n[weld]\nprefactor = [0.5]\n[initial]\nmodes = [[2, 1.0, "sin"]]\n',
     "weld.prefactor"),
])
def test_validation_failures(doc, field):
    with pytest.raises(ValidationError) as e:
        parse_config(doc)
    assert e.value.field == field


def test_numeric_phase():
    cfg = parse_config('equation = "ewp"\nN = 8\n[initial]\nmodes = [[3, 2.0, 1.5707963267948966]]\n')
    assert cfg.initial_condition().allclose(FourierField.from_trig(8, cos={3: 2.0}), atol=1e-15)


def test_fourier_csv_relative_to_config(tmp_path):
    f = FourierField.from_trig(4, cos={2: 1.0})
    f.to_csv(tmp_path / "u0.csv")
    (tmp_path / "c.toml").write_text('equation = "ewp"\nN = 16\n[initial]\nfourier_csv = "u0.csv"\n')
    cfg = load_config(tmp_path / "c.toml")
    assert cfg.initial_condition().allclose(f.with_band_limit(16))


def test_missing_config_file(tmp_path):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "nope.toml")


def test_overrides():
    assert parse_override("N=64") == ("N", 64)
    assert parse_override("weld.enabled=true") == ("weld.enabled", True)
    assert parse_override("equation=ewp") == ("equation", "ewp")
    assert parse_override("weld.prefactor=[0, 0.5]") == ("weld.prefactor", [0, 0.5])
    with pytest.raises(ParseError):
        parse_override("N")
    cfg = parse_config(MINIMAL, overrides=["N=64", "detect.cadence=0.01", "weld.prefactor=[0, 1]"])
    assert cfg.N == 64 and cfg.cadence == 0.01 and cfg.weld_prefactor == 1j


def test_digest_is_stable_and_sensitive():
    a = parse_config(MINIMAL)
    b = parse_config('# same settings, spelled differently\nequation="wunsch"\nN = 256\n'
                     "initial.modes = [ [2, 1, 'sin'] ]\n")
    assert a.digest() == b.digest()
    assert parse_config(MINIMAL, overrides=["N=128"]).digest() != a.digest()


def test_simulation_config_carries_settings():
    cfg = parse_config("snapshots = [0.1]\n" + MINIMAL, overrides=["detect.slope_threshold=0.01"])
    sim = cfg.simulation_config()
    assert sim.kind == "wunsch" and sim.snapshot_times == (0.1,)
    assert sim.slope_threshold == 0.01 and sim.M == 512
    assert math.isclose(sim.dt, 1e-4)


def test_digest_ignores_output_directory():
    assert parse_config(MINIMAL, overrides=["out=a"]).digest() == parse_config(MINIMAL).digest()
