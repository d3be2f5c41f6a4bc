import json

import pytest

from searchlab import cli


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    base = ["--seed", "5", "--out", str(out)]
    assert cli.main(["gen-scenes", *base, "--count", "2", "--rows", "28",
                     "--cols", "28"]) == 0
    scenes = str(out / "scenes")
    assert cli.main(["gen-episodes", *base, "--scenes", scenes,
                     "--per-scene", "3"]) == 0
    episodes = str(out / "episodes")
    assert cli.main(["gen-demos", *base, "--scenes", scenes,
                     "--episodes", episodes, "--source", "shortest"]) == 0
    return out


def test_pipeline_writes_manifests(pipeline):
    for sub in ("scenes", "episodes", "demos"):
        manifest = json.loads((pipeline / sub / "manifest.json").read_text())
        assert manifest["seed"] == 5
        assert manifest["command"]
    demo_manifest = json.loads((pipeline / "demos" / "manifest.json").read_text())
    assert demo_manifest["inputs"]  # content hashes of scene/episode inputs


def test_stats_and_reports(pipeline):
    base = ["--seed", "5", "--out", str(pipeline)]
    args = ["--scenes", str(pipeline / "scenes"),
            "--episodes", str(pipeline / "episodes"),
            "--demos", str(pipeline / "demos")]
    assert cli.main(["stats", *base, *args]) == 0
    stats = json.loads((pipeline / "reports" / "stats.json").read_text())
    assert stats["episodes"] == 6
    assert stats["success_rate"] == 1.0
    assert (pipeline / "reports" / "episode-lengths.svg").exists()
    assert cli.main(["behaviors", *base, *args]) == 0
    assert (pipeline / "reports" / "behaviors.csv").exists()
    assert cli.main(["time-estimate", *base, *args]) == 0
    assert (pipeline / "reports" / "time-estimate.csv").exists()


def test_train_and_eval(pipeline, tmp_path):
    base = ["--seed", "5", "--out", str(pipeline)]
    assert cli.main(["train-bc", *base,
                     "--scenes", str(pipeline / "scenes"),
                     "--episodes", str(pipeline / "episodes"),
                     "--demos", str(pipeline / "demos" / "shortest.jsonl"),
                     "--epochs", "1", "--hidden", "8"]) == 0
    ckpt = pipeline / "checkpoints" / "bc-final.ckpt"
    assert ckpt.exists()
    assert cli.main(["eval", *base, "--checkpoint", str(ckpt),
                     "--scenes", str(pipeline / "scenes"),
                     "--episodes", str(pipeline / "episodes")]) == 0
    report = json.loads((pipeline / "reports" / "eval.json").read_text())
    assert report["episodes"] == 6


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-scenes", "--seed", "1", "--out", "/tmp/x", "--bogus"])
    assert exc.value.code == 2


def test_config_file_overrides_flags(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"count": 1, "rows": 26, "cols": 26}))
    out = tmp_path / "out"
    assert cli.main(["--config", str(config), "gen-scenes", "--seed", "1",
                     "--out", str(out), "--count", "99"]) == 0
    scenes = list((out / "scenes").glob("scene-*.json"))
    assert len(scenes) == 1


def test_missing_input_reports_error(tmp_path):
    code = cli.main(["gen-episodes", "--seed", "1", "--out", str(tmp_path),
                     "--scenes", str(tmp_path / "nope")])
    assert code == 1
