import json

from openact.cli import main


def test_cli_full_workflow(tmp_path, capsys):
    world = tmp_path / "world"
    out = tmp_path / "out"
    rc = main(
        [
            "synth", "--out", str(world), "--seed", "5",
            "--actions", "3", "--objects", "5", "--clips-per-activity", "2",
        ]
    )
    assert rc == 0
    assert (world / "manifest.json").is_file()

    cache = tmp_path / "affinity.json"
    rc = main(
        [
            "affinity-build",
            "--kb", str(world / "edges.tsv"),
            "--manifest", str(world / "manifest.json"),
            "--cache", str(cache),
        ]
    )
    assert rc == 0
    assert cache.is_file()

    rc = main(
        [
            "run",
            "--manifest", str(world / "manifest.json"),
            "--kb", str(world / "edges.tsv"),
            "--config", str(world / "config.toml"),
            "--cache", str(cache),
            "--out", str(out),
        ]
    )
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "search space: 15 activities" in stdout
    assert (out / "predictions.jsonl").is_file()
    report = json.loads((out / "report.json").read_text())
    assert report["metrics"]["activity"]["accuracy"] == 1.0

    eval_out = tmp_path / "eval"
    rc = main(
        [
            "evaluate",
            "--predictions", str(out / "predictions.jsonl"),
            "--manifest", str(world / "manifest.json"),
            "--out", str(eval_out),
        ]
    )
    assert rc == 0
    assert (eval_out / "report.csv").read_text().splitlines()[0] == (
        "metric,correct,total,accuracy"
    )

    refine_out = tmp_path / "refined"
    rc = main(
        [
            "refine",
            "--manifest", str(world / "manifest.json"),
            "--kb", str(world / "edges.tsv"),
            "--embeddings", str(world / "embeddings.txt"),
            "--out", str(refine_out),
        ]
    )
    assert rc == 0
    assert (refine_out / "model.bin").is_file()
    assert (refine_out / "trace.csv").is_file()
    posterior = json.loads((refine_out / "posterior.json").read_text())
    assert abs(sum(posterior["probs"].values()) - 1.0) <= 1e-9


def test_cli_engine_errors_exit_nonzero(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    rc = main(
        [
            "run",
            "--manifest", str(missing),
            "--kb", str(tmp_path / "edges.tsv"),
            "--out", str(tmp_path / "out"),
        ]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_cli_synth_rejects_bad_spec(tmp_path):
    rc = main(["synth", "--out", str(tmp_path / "w"), "--actions", "0"])
    assert rc == 1
