import numpy as np
import orjson
import pytest

from regioncal.output import JsonLinesWriter, render_json, render_table, write_jsonl
from regioncal.output.reports import render_comparison, render_frequencies, render_report_text


def test_render_table():
    text = render_table(["name", "value"], [("a", 1.5), ("long name", None), ("b", 12)])
    assert text == (
        "name        value\n"
        "---------  ------\n"
        "a          1.5000\n"
        "long name       -\n"
        "b              12\n"
    )


def test_render_json():
    data = {"b": np.float64(0.25), "a": np.arange(2)}
    output = render_json(data)
    assert output.endswith(b"}\n")
    assert orjson.loads(output) == {"b": 0.25, "a": [0, 1]}
    assert output.index(b'"b"') < output.index(b'"a"')


def test_render_report_full():
    text = render_report_text(
        {
            "kind": "full",
            "class_average_accuracy": 0.8,
            "global_accuracy": 0.875,
            "classes": [
                {"class_id": 0, "accuracy": 1.0, "pixels": 100},
                {"class_id": 1, "accuracy": None, "pixels": 0},
            ],
        }
    )
    assert "class-average accuracy: 0.8000\n" in text
    assert "global accuracy:        0.8750\n" in text
    assert text.splitlines()[3].split() == ["1", "0", "-"]


def test_render_report_weak():
    text = render_report_text(
        {
            "kind": "weak",
            "hamming_loss": 0.5,
            "classes": [
                {
                    "class_id": 0,
                    "precision": 1.0,
                    "recall": 0.5,
                    "true_positives": 1,
                    "false_positives": 0,
                    "false_negatives": 1,
                }
            ],
        }
    )
    assert text.splitlines()[0].split() == ["class", "precision", "recall", "tp", "fp", "fn"]
    assert text.endswith("hamming loss: 0.5000\n")


def test_render_comparison():
    text = render_comparison([("none", 0.6, 0.9), ("jc", 0.95, 0.97)])
    assert text.splitlines()[0].split() == ["method", "class-average", "global"]
    assert text.splitlines()[3].split() == ["jc", "0.9500", "0.9700"]
    weak = render_comparison([("jc", 0.1, 0.9, 0.8)], kind="weak")
    assert "mean precision" in weak


def test_render_frequencies():
    text = render_frequencies([30, 10], [0.7, 0.3])
    assert text.splitlines()[2].split() == ["0", "30", "0.7500", "0.7000"]


def test_jsonl_writer(tmp_path):
    path = tmp_path / "sub" / "records.jsonl"
    with JsonLinesWriter(path, chunk_size=10) as writer:
        for index in range(5):
            writer.write({"index": index, "value": np.float64(index / 3)})

    lines = path.read_bytes().splitlines()
    assert writer.count == 5
    assert [orjson.loads(line)["index"] for line in lines] == [0, 1, 2, 3, 4]
    assert orjson.loads(lines[1])["value"] == 1 / 3
    assert list(path.parent.iterdir()) == [path]


def test_jsonl_writer_error(tmp_path):
    """A failing block leaves no partial file, and keeps the previous output."""
    path = tmp_path / "records.jsonl"
    path.write_bytes(b'{"old":true}\n')
    with pytest.raises(RuntimeError):
        with JsonLinesWriter(path, chunk_size=10) as writer:
            for index in range(5):
                writer.write({"index": index})
            raise RuntimeError("interrupted")

    assert path.read_bytes() == b'{"old":true}\n'
    assert list(tmp_path.iterdir()) == [path]


def test_jsonl_writer_error_new_file(tmp_path):
    path = tmp_path / "records.jsonl"
    with pytest.raises(TypeError):
        write_jsonl(path, [{"n": 1}, {"n": object()}])

    assert list(tmp_path.iterdir()) == []


def test_write_jsonl(tmp_path):
    path = tmp_path / "records.jsonl"
    assert write_jsonl(path, ({"n": n} for n in range(3))) == 3
    assert path.read_bytes() == b'{"n":0}\n{"n":1}\n{"n":2}\n'
