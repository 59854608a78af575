import json

import numpy as np

from lptm_kit import EvalReport, Segment, SegmentSet
from lptm_kit.reports import (
    JsonlWriter,
    plot_data_efficiency,
    plot_forecast,
    plot_loss_curve,
    plot_segments,
    write_table,
)


def test_jsonl_writer_file_and_echo(tmp_path, capsys):
    path = tmp_path / "log.jsonl"
    with JsonlWriter(path, echo=True) as log:
        log.write({"event": "one", "x": 1})
        log.write({"event": "two", "y": [1, 2]})
    lines = path.read_text().strip().splitlines()
    assert [json.loads(line)["event"] for line in lines] == ["one", "two"]
    assert json.loads(lines[1])["y"] == [1, 2]
    out = capsys.readouterr().out
    assert out.count("\n") == 2


def test_jsonl_writer_without_path(capsys):
    with JsonlWriter(None, echo=True) as log:
        log.write({"event": "hello"})
    assert "hello" in capsys.readouterr().out


def test_write_table(tmp_path):
    path = tmp_path / "t.tsv"
    write_table(path, [(1, 0.5), (2, 0.25)], header=("step", "loss"))
    lines = path.read_text().splitlines()
    assert lines[0] == "step\tloss"
    assert lines[1] == "1\t0.5"
    assert len(lines) == 3


def test_plots_render_to_files(tmp_path):
    values = np.sin(np.linspace(0, 12, 64))
    segset = SegmentSet((Segment(1, 20), Segment(20, 40), Segment(40, 64)), 64)
    plot_segments(values, segset, tmp_path / "seg.png")
    plot_loss_curve([1, 2, 3], [0.9, 0.5, 0.3], tmp_path / "loss.png")
    plot_forecast(values[:48], values[48:56], values[48:56] + 0.1, tmp_path / "fc.png")
    reports = [
        EvalReport(metric="rmse", values=(1.0, 1.2), metadata={"percent": 10}),
        EvalReport(metric="rmse", values=(0.7, 0.8), metadata={"percent": 100}),
    ]
    plot_data_efficiency(reports, tmp_path / "de.png")
    for name in ("seg.png", "loss.png", "fc.png", "de.png"):
        data = (tmp_path / name).read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(data) > 1000
