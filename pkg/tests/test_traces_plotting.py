"""Trace CSV round-trips, averaging, threshold lookup and SVG output."""

from __future__ import annotations

import numpy as np
import pytest

import smoothquant as sq
from smoothquant.traces import CSV_HEADER, Trace, _format_number
from smoothquant.errors import EmptyTraces, MalformedLine, UnknownKind


def _trace(iters, rel, seed=None, **overrides):
    n = len(iters)
    fields = dict(
        iters=np.asarray(iters, dtype=int),
        rel_error=np.asarray(rel, dtype=float),
        f_gap=np.linspace(1.0, 0.1, n),
        bits_cum=np.cumsum(np.full(n, 100.0)),
        time_ms=np.linspace(0.0, 5.0, n),
        meta={} if seed is None else {"seed": seed, "method": "dcgd+"},
    )
    fields.update(overrides)
    return Trace(**fields)


def test_format_number():
    assert _format_number(3.0) == "3"
    assert _format_number(-17.0) == "-17"
    assert _format_number(0.1) == "0.1"
    assert _format_number(1e300) == "1e+300"  # too big for int form
    # repr round-trips arbitrary floats exactly
    value = 0.12345678901234567
    assert float(_format_number(value)) == value


def test_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    trace = _trace(np.arange(30), rng.uniform(1e-12, 1.0, 30))
    path = tmp_path / "run.csv"
    trace.to_csv(path)
    text = path.read_text()
    assert text.splitlines()[0] == CSV_HEADER
    back = Trace.from_csv(path)
    np.testing.assert_array_equal(back.iters, trace.iters)
    np.testing.assert_array_equal(back.rel_error, trace.rel_error)
    np.testing.assert_array_equal(back.f_gap, trace.f_gap)
    np.testing.assert_array_equal(back.bits_cum, trace.bits_cum)
    np.testing.assert_array_equal(back.time_ms, trace.time_ms)
    assert back.meta["path"] == str(path)


def test_from_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("iteration,err\n0,1\n")
    with pytest.raises(MalformedLine):
        Trace.from_csv(path)


def test_from_csv_rejects_short_line(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text(CSV_HEADER + "\n0,1.0,1.0,0\n")
    with pytest.raises(MalformedLine, match="line 2"):
        Trace.from_csv(path)


def test_first_reach():
    trace = _trace([0, 1, 2, 3], [1.0, 0.5, 0.01, 0.001])
    hit = trace.first_reach(0.05)
    assert hit == {
        "iter": 2,
        "bits": pytest.approx(300.0),
        "time_ms": pytest.approx(trace.time_ms[2]),
    }
    assert trace.first_reach(1e-9) is None
    # already satisfied at the zeroth record
    assert trace.first_reach(2.0)["iter"] == 0


def test_average_traces_mean_and_meta():
    a = _trace([0, 1, 2], [1.0, 0.4, 0.2], seed=0)
    b = _trace([0, 1, 2], [1.0, 0.6, 0.4], seed=1)
    avg = sq.average_traces([a, b])
    np.testing.assert_allclose(avg.rel_error, [1.0, 0.5, 0.3])
    assert avg.meta["n_seeds"] == 2
    assert "seed" not in avg.meta
    assert avg.meta["method"] == "dcgd+"


def test_average_traces_truncates_to_shortest():
    """A diverged (shorter) seed truncates the average, never pads it."""
    a = _trace([0, 1, 2, 3], [1.0, 0.4, 0.2, 0.1])
    b = _trace([0, 1], [1.0, 0.6])
    avg = sq.average_traces([a, b])
    assert len(avg) == 2
    np.testing.assert_allclose(avg.rel_error, [1.0, 0.5])


def test_average_traces_errors():
    with pytest.raises(EmptyTraces):
        sq.average_traces([])
    with pytest.raises(MalformedLine):
        sq.average_traces(
            [_trace([0, 1, 2], [1, 0.5, 0.2]), _trace([0, 2, 4], [1, 0.5, 0.2])]
        )


def test_emit_svg_plot_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    traces = [
        _trace(np.arange(20), np.geomspace(1.0, 1e-8, 20)),
        _trace(np.arange(20), np.geomspace(1.0, 1e-4, 20)),
    ]
    for i, t in enumerate(traces):
        t.meta["label"] = f"curve{i}"
    out_a, out_b = tmp_path / "a.svg", tmp_path / "b.svg"
    bytes_a = sq.emit_svg_plot(traces, "iters", out_a)
    bytes_b = sq.emit_svg_plot(traces, "iters", out_b)
    assert bytes_a == bytes_b
    assert out_a.read_bytes() == bytes_a
    assert bytes_a.startswith(b"<svg") or b"<svg" in bytes_a[:200]


def test_emit_svg_plot_axes(tmp_path):
    trace = _trace(np.arange(10), np.geomspace(1.0, 1e-3, 10))
    trace.meta["label"] = "run"
    for axis in ("iters", "mbytes", "time"):
        data = sq.emit_svg_plot([trace], axis, tmp_path / f"{axis}.svg")
        assert b"rel_error" in data or b"<svg" in data
    with pytest.raises(UnknownKind):
        sq.emit_svg_plot([trace], "epochs", tmp_path / "bad.svg")
    with pytest.raises(EmptyTraces):
        sq.emit_svg_plot([], "iters", tmp_path / "empty.svg")
    with pytest.raises(EmptyTraces):
        sq.emit_svg_plot([_trace([], [])], "iters", tmp_path / "empty2.svg")


def test_emit_svg_floor_handles_zero_error(tmp_path):
    """Exact zeros must not break the log scale."""
    trace = _trace([0, 1, 2], [1.0, 1e-20, 0.0])
    trace.meta["label"] = "zero"
    data = sq.emit_svg_plot([trace], "iters", tmp_path / "zero.svg")
    assert len(data) > 0
