import pytest
import yaml

from llmlogad.config import DEFAULTS, RunConfig, load_document, merge, parse_assignment, set_dotted
from llmlogad.errors import ConfigError, IoError
from llmlogad.fileio import atomic_open, atomic_write_text


def test_defaults_build():
    run = RunConfig.from_document({})
    assert run.drain.depth == 4 and run.drain.similarity_threshold == 0.4
    assert run.subset.size == 2000 and run.train_ratio == 0.8
    assert run.backend.requests_per_minute == 20 and run.backend.max_in_flight == 4
    assert run.window_sizes == (10, 20, 30, 40, 50)
    assert [(e.prompt_id, e.mode, e.view) for e in run.experiments()] == [("P2", "zero_shot", "content")]


def test_merge_is_deep_and_pure():
    out = merge(DEFAULTS, {"drain": {"depth": 5}})
    assert out["drain"]["depth"] == 5 and out["drain"]["max_children"] == 100
    assert DEFAULTS["drain"]["depth"] == 4


def test_assignments():
    assert parse_assignment("subset.size=500") == ("subset.size", 500)
    assert parse_assignment("experiment.window_sizes=[10, 20]") == ("experiment.window_sizes", [10, 20])
    assert parse_assignment("backend.endpoint_url=http://h:1/v1") == ("backend.endpoint_url", "http://h:1/v1")
    with pytest.raises(ConfigError):
        parse_assignment("novalue")
    doc = {"seed": 1}
    with pytest.raises(ConfigError):
        set_dotted(doc, "seed.x", 2)


def test_grid_and_aliases():
    run = RunConfig.from_document(
        {"prompts": {"ids": ["p1", "P2"], "modes": ["zero", "few"]}, "experiment": {"views": ["raw", "event"]}}
    )
    assert len(run.experiments()) == 8
    assert {e.mode for e in run.experiments()} == {"zero_shot", "few_shot"}
    assert RunConfig.from_document({"experiment": {"window_sizes": []}}).experiments() == []


def test_custom_layout_over_preset():
    run = RunConfig.from_document({"dataset": {"preset": "spirit", "content_start_index": 10}})
    assert run.dataset.name == "spirit" and run.dataset.content_start_index == 10


@pytest.mark.parametrize(
    "doc",
    [
        {"dataset": {"preset": "hdfs"}},
        {"drain": {"depth": 1}},
        {"subset": {"size": "many"}},
        {"experiment": {"views": ["tree"]}},
    ],
)
def test_invalid_documents(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_document(doc).experiments()


def test_validate_files(tmp_path):
    run = RunConfig.from_document({"dataset": {"path": str(tmp_path / "x.log")}})
    with pytest.raises(ConfigError, match="x.log"):
        run.validate_files()
    (tmp_path / "x.log").write_text("")
    run.validate_files()
    with pytest.raises(ConfigError, match="cassette"):
        RunConfig.from_document(
            {"dataset": {"path": str(tmp_path / "x.log")}, "backend": {"cassette": str(tmp_path / "c")}}
        ).validate_files(need_backend=True)


def test_load_document(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"seed": 3}))
    assert load_document(path) == {"seed": 3}
    path.write_text("- a list")
    with pytest.raises(ConfigError):
        load_document(path)
    with pytest.raises(ConfigError, match="nope.yaml"):
        load_document(tmp_path / "nope.yaml")


def test_dump_round_trips():
    run = RunConfig.from_document({"seed": 11})
    assert RunConfig.from_document(yaml.safe_load(run.dump())) == run


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    target = tmp_path / "report.csv"
    atomic_write_text(target, "old\n")
    with pytest.raises(RuntimeError):
        with atomic_open(target) as fh:
            fh.write("partial")
            raise RuntimeError("interrupted")
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["report.csv"]


def test_atomic_write_reports_io_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoError):
        atomic_write_text(blocker / "sub" / "x.txt", "data")
