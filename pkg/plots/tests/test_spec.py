import json

import pytest

from estplots import (PlotSpec, Series, SpecFormatError, bundled_spec_path,
                      list_bundled_specs, load_spec, parse_expression,
                      spec_from_dict)


def test_expression_plain_sum():
    assert parse_expression("x1 + x3 + x5") == \
        ((1.0, "x1"), (1.0, "x3"), (1.0, "x5"))


def test_expression_signed_coefficients():
    assert parse_expression("2*a - 0.5*b_2 + 1e-3*c") == \
        ((2.0, "a"), (-0.5, "b_2"), (1e-3, "c"))


def test_expression_leading_minus_and_tight_spacing():
    assert parse_expression("-x1+x2") == ((-1.0, "x1"), (1.0, "x2"))


@pytest.mark.parametrize("bad", ["", "x1 x2", "x1 + * x2", "x1 +", "3.5",
                                 "x1 + -2*x2"])
def test_expression_rejects_malformed(bad):
    with pytest.raises(SpecFormatError):
        parse_expression(bad)


def test_series_requires_known_kind():
    with pytest.raises(SpecFormatError, match="kind"):
        Series(label="a", color="black", kind="scatter")


def test_series_bank_reconstruction_needs_bank_and_weights():
    with pytest.raises(SpecFormatError, match="bank"):
        Series(label="a", color="red", kind="bank_reconstruction",
               weights=(1.0,))
    with pytest.raises(SpecFormatError, match="weights"):
        Series(label="a", color="red", kind="bank_reconstruction", bank=1)


def test_spec_rejects_unknown_fields():
    with pytest.raises(SpecFormatError, match="palette"):
        spec_from_dict({"series": [{"label": "a", "color": "k",
                                    "expr": "x1"}],
                        "palette": "viridis"})
    with pytest.raises(SpecFormatError, match="marker"):
        spec_from_dict({"series": [{"label": "a", "color": "k",
                                    "expr": "x1", "marker": "o"}]})


def test_spec_requires_series():
    with pytest.raises(SpecFormatError):
        spec_from_dict({"series": []})
    with pytest.raises(SpecFormatError):
        spec_from_dict({"title": "empty"})


def test_load_spec_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{]")
    with pytest.raises(SpecFormatError, match="JSON"):
        load_spec(p)
    with pytest.raises(SpecFormatError, match="not found"):
        load_spec(tmp_path / "absent.json")


def test_bundled_theta_sum_spec_shape():
    assert "threeinertia_theta_sum" in list_bundled_specs()
    spec = load_spec(bundled_spec_path("threeinertia_theta_sum"))
    assert isinstance(spec, PlotSpec)
    assert len(spec.series) == 7
    colors = [s.color for s in spec.series]
    assert colors.count("black") == 1
    assert colors.count("red") == 1
    assert colors.count("blue") == 5
    naive = spec.series[1]
    assert naive.kind == "bank_reconstruction"
    assert naive.bank == 1
    assert naive.weights == (1.0, 0.0, 1.0, 0.0, 1.0, 0.0)


def test_spec_roundtrips_through_file(tmp_path):
    raw = {"series": [{"label": "a", "color": "black", "expr": "x1"}],
           "ylabel": "x", "figsize": [6, 3], "dpi": 100}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(raw))
    spec = load_spec(p)
    assert spec.figsize == (6.0, 3.0)
    assert spec.dpi == 100
    assert spec.series[0].label == "a"
