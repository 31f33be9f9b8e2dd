import json

import numpy as np
import pytest

from estplots import (EmptyLogError, LogFormatError, MissingColumnError,
                      PlotSpec, Series, SidecarError, build_figure,
                      build_series_data, default_sidecar_path, load_log,
                      render, with_paths)


def _write_csv(path, cols):
    names = list(cols)
    rows = np.column_stack([np.asarray(cols[k], dtype=float) for k in names])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@pytest.fixture
def toy_run(tmp_path):
    """Two-state plant, one bank that sees only the first coordinate."""
    t = np.linspace(0.0, 1.0, 21)
    cols = {
        "t": t,
        "x1": np.sin(t),
        "x2": np.cos(t),
        "z1_1": np.sin(t) + 0.1,
        "xhat1_1": np.sin(t) + 0.01,
        "xhat1_2": np.cos(t) - 0.02,
    }
    csv_path = tmp_path / "toy_log.csv"
    _write_csv(csv_path, cols)
    sidecar = {"banks": [{"o_i": 1, "V_i": [[1.0], [0.0]],
                          "W_i": [[1.0, 0.0]]}]}
    (tmp_path / "toy_log.json").write_text(json.dumps(sidecar))
    return csv_path, cols


def _spec(csv_path, out, series):
    return PlotSpec(series=tuple(series), csv=str(csv_path), out=str(out))


def test_load_log_columns(toy_run):
    csv_path, cols = toy_run
    loaded = load_log(csv_path)
    assert set(loaded) == set(cols)
    np.testing.assert_allclose(loaded["x2"], cols["x2"], rtol=0, atol=0)


def test_default_sidecar_path():
    assert default_sidecar_path("runs/abc_log.csv").name == "abc_log.json"
    assert default_sidecar_path("runs/other.csv").name == "other.json"


def test_expr_series_evaluation(toy_run):
    csv_path, cols = toy_run
    spec = _spec(csv_path, "unused.png",
                 [Series(label="sum", color="black", expr="x1 + 2*x2")])
    _, evaluated = build_series_data(spec)
    np.testing.assert_allclose(evaluated[0][1], cols["x1"] + 2 * cols["x2"])


def test_bank_reconstruction_series(toy_run):
    csv_path, cols = toy_run
    spec = _spec(csv_path, "unused.png",
                 [Series(label="naive", color="red",
                         kind="bank_reconstruction", bank=1,
                         weights=(1.0, 1.0))])
    _, evaluated = build_series_data(spec)
    # the bank sees coordinate 1 through z; coordinate 2 comes from xhat
    np.testing.assert_allclose(evaluated[0][1],
                               cols["z1_1"] + cols["xhat1_2"])


def test_missing_column_is_named(toy_run, tmp_path):
    csv_path, _ = toy_run
    out = tmp_path / "fig.png"
    spec = _spec(csv_path, out,
                 [Series(label="bad", color="black", expr="x1 + x9")])
    with pytest.raises(MissingColumnError) as err:
        render(spec)
    assert err.value.column == "x9"
    assert not out.exists()


def test_empty_csv_writes_nothing(tmp_path):
    empty = tmp_path / "empty_log.csv"
    empty.write_text("")
    header_only = tmp_path / "header_log.csv"
    header_only.write_text("t,x1\n")
    out = tmp_path / "fig.png"
    series = [Series(label="a", color="black", expr="x1")]
    for path in (empty, header_only):
        with pytest.raises(EmptyLogError):
            render(_spec(path, out, series))
        assert not out.exists()
    with pytest.raises(EmptyLogError, match="not found"):
        render(_spec(tmp_path / "nowhere_log.csv", out, series))
    assert not out.exists()


def test_malformed_csv_body(tmp_path):
    ragged = tmp_path / "ragged_log.csv"
    ragged.write_text("t,x1\n0.0,1.0\n0.1\n")
    words = tmp_path / "words_log.csv"
    words.write_text("t,x1\n0.0,fast\n")
    series = [Series(label="a", color="black", expr="x1")]
    for path in (ragged, words):
        with pytest.raises(LogFormatError):
            render(_spec(path, tmp_path / "fig.png", series))


def test_sidecar_problems(toy_run, tmp_path):
    csv_path, _ = toy_run
    series = [Series(label="naive", color="red", kind="bank_reconstruction",
                     bank=3, weights=(1.0, 1.0))]
    with pytest.raises(SidecarError, match="bank 3"):
        build_series_data(_spec(csv_path, "fig.png", series))

    lonely = tmp_path / "lonely_log.csv"
    lonely.write_text("t,x1\n0.0,1.0\n")
    series = [Series(label="naive", color="red", kind="bank_reconstruction",
                     bank=1, weights=(1.0,))]
    with pytest.raises(SidecarError, match="not found"):
        build_series_data(_spec(lonely, "fig.png", series))


def test_render_writes_png_with_styled_lines(toy_run, tmp_path):
    csv_path, _ = toy_run
    out = tmp_path / "fig.png"
    spec = _spec(csv_path, out, [
        Series(label="truth", color="black", expr="x1", linewidth=2.0),
        Series(label="naive", color="red", kind="bank_reconstruction",
               bank=1, weights=(1.0, 0.0)),
        Series(label="estimate", color="blue", expr="xhat1_1"),
    ])
    fig = build_figure(spec)
    lines = fig.axes[0].get_lines()
    assert [ln.get_color() for ln in lines] == ["black", "red", "blue"]
    assert lines[0].get_linewidth() == 2.0

    path = render(spec)
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000


def test_render_is_pixel_stable(toy_run, tmp_path):
    csv_path, _ = toy_run
    series = [Series(label="truth", color="black", expr="x1 + x2"),
              Series(label="est", color="blue", expr="xhat1_1 - xhat1_2")]
    a = render(_spec(csv_path, tmp_path / "a.png", series))
    b = render(_spec(csv_path, tmp_path / "b.png", series))
    assert a.read_bytes() == b.read_bytes()


def test_with_paths_prefers_flags(toy_run, tmp_path):
    csv_path, _ = toy_run
    spec = _spec("spec_default.csv", "spec_default.png",
                 [Series(label="a", color="black", expr="x1")])
    merged = with_paths(spec, csv=str(csv_path), out=str(tmp_path / "o.png"))
    assert merged.csv == str(csv_path)
    assert merged.out == str(tmp_path / "o.png")
    kept = with_paths(spec)
    assert kept.csv == "spec_default.csv"
