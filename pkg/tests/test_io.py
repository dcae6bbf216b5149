import json

import numpy as np
import pytest

from hetrobust.adversary import FixedOutlier, LinearModel, PowerLawProfile, Scenario, contaminate, Gaussian
from hetrobust.exceptions import DomainError
from hetrobust.io import CsvFormatError, load_dataset, load_profile, write_dataset, write_flags


def write(path, text):
    path.write_text(text)
    return path


def test_profile_csv(tmp_path):
    p = load_profile(write(tmp_path / "p.csv", "lambda\n0.5\n0.1\n"))
    assert p.in_input_order().tolist() == [0.5, 0.1]


def test_profile_json(tmp_path):
    p = load_profile(write(tmp_path / "p.json", json.dumps([0.2, 0.0])))
    assert p.lambdas.tolist() == [0.0, 0.2]


def test_profile_out_of_range_line(tmp_path):
    with pytest.raises(CsvFormatError, match="lambda out of range at line 3"):
        load_profile(write(tmp_path / "p.csv", "lambda\n0.5\n1.5\n"))


def test_profile_bad_header(tmp_path):
    with pytest.raises(CsvFormatError, match="line 1"):
        load_profile(write(tmp_path / "p.csv", "rate\n0.5\n"))


def test_profile_json_out_of_range(tmp_path):
    with pytest.raises(DomainError):
        load_profile(write(tmp_path / "p.json", "[0.1, -1]"))


def test_dataset_mean(tmp_path):
    data = load_dataset(write(tmp_path / "d.csv", "x1,x2,lambda\n1,2,0.1\n3,4,0.2\n"))
    assert data.mode == "mean"
    assert data.points.tolist() == [[1, 2], [3, 4]]


def test_dataset_regression(tmp_path):
    data = load_dataset(write(tmp_path / "d.csv", "w1,y,lambda\n1,2,0.1\n"))
    assert data.mode == "regression"
    assert data.responses.tolist() == [2.0]


@pytest.mark.parametrize(
    "text, line",
    [
        ("x1,lambda\n1,0.1\n2\n", 3),
        ("x1,lambda\nabc,0.1\n", 2),
        ("x2,lambda\n1,0.1\n", 1),
        ("x1,lambda\n1,nan\n", 2),
        ("x1\n1\n", 1),
    ],
)
def test_dataset_errors_carry_line(tmp_path, text, line):
    with pytest.raises(CsvFormatError) as err:
        load_dataset(write(tmp_path / "d.csv", text))
    assert err.value.line == line


def test_dataset_no_rows(tmp_path):
    with pytest.raises(CsvFormatError):
        load_dataset(write(tmp_path / "d.csv", "x1,lambda\n"))


@pytest.mark.parametrize(
    "scenario",
    [
        Scenario(Gaussian(mean=(0.0, 1.0)), FixedOutlier(value=(9.0, 9.0)), PowerLawProfile(q=1.0, n=50)),
        Scenario(LinearModel(beta=(1.0,), sigma=0.1), FixedOutlier(covariate=(3.0,), response=0.0), PowerLawProfile(q=1.0, n=50)),
    ],
)
def test_round_trip_is_exact(tmp_path, scenario):
    data = contaminate(scenario, seed=11)
    write_dataset(data, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.points, data.points)
    assert np.array_equal(back.profile.in_input_order(), data.profile.in_input_order())
    if data.responses is not None:
        assert np.array_equal(back.responses, data.responses)
    write_flags(data, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "index,corrupted"
    assert len(lines) == 51
