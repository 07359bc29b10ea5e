import json

import pytest

from axgen import cli, datagen


@pytest.fixture(scope="session")
def blobs_run(data_dir, tmp_path_factory):
    """One full prepare+train chain shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    prep = root / "prep"
    run = root / "run"
    rc = cli.main(
        [
            "prepare",
            str(data_dir / "blobs.csv"),
            "--out-dir",
            str(prep),
            "--seed",
            "0",
        ]
    )
    assert rc == 0
    rc = cli.main(
        [
            "train",
            str(prep / "blobs.json"),
            "--topology",
            "4,3,3",
            "--pop",
            "20",
            "--gens",
            "12",
            "--seed",
            "4",
            "--baseline-acc",
            "0.7",
            "--out-dir",
            str(run),
            "--quiet",
        ]
    )
    assert rc == 0
    return {"prep": prep, "run": run, "root": root}


class TestPrepare:
    def test_writes_dataset_and_manifest(self, data_dir, tmp_path, capsys):
        rc = cli.main(
            ["prepare", str(data_dir / "blobs.csv"), "--out-dir", str(tmp_path)]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "blobs" in out and "3 classes" in out
        ds = json.loads((tmp_path / "blobs.json").read_text())
        assert ds["version"] == 1 and ds["w_in"] == 4
        man = json.loads((tmp_path / "blobs.manifest.json").read_text())
        assert man["command"] == "prepare"
        assert len(man["dataset_sha256"]) == 64
        assert man["outputs"] == ["blobs.json"]
        assert "seconds" in man["timings"]

    def test_name_override(self, data_dir, tmp_path):
        rc = cli.main(
            [
                "prepare",
                str(data_dir / "blobs.csv"),
                "--name",
                "mydata",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert rc == 0
        assert (tmp_path / "mydata.json").exists()

    def test_missing_file_is_usage_error(self, tmp_path, capsys):
        rc = cli.main(["prepare", str(tmp_path / "nope.csv")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_csv_is_data_error(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n")
        rc = cli.main(["prepare", str(p), "--out-dir", str(tmp_path)])
        assert rc == 2
        assert "no 'class' column" in capsys.readouterr().err

    def test_label_col_flag(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("a,grade\n1,x\n2,y\n3,x\n4,y\n5,x\n6,y\n")
        rc = cli.main(
            ["prepare", str(p), "--label-col", "grade", "--out-dir", str(tmp_path)]
        )
        assert rc == 0


class TestTrain:
    def test_outputs_and_archive_shape(self, blobs_run):
        run = blobs_run["run"]
        doc = json.loads((run / "archive.json").read_text())
        assert doc["version"] == 1
        assert doc["dataset"] == "blobs"
        assert doc["topology"] == [4, 3, 3]
        assert doc["entries"]
        for e in doc["entries"]:
            assert set(e) >= {
                "area_fa",
                "train_acc",
                "test_acc",
                "generation",
                "model",
                "feasible",
            }
            assert e["feasible"] is True
        man = json.loads((run / "manifest.json").read_text())
        assert man["command"] == "train"
        assert man["seed"] == 4
        assert sorted(man["outputs"]) == ["archive.json", "progress.ndjson"]

    def test_progress_log_fields_and_hv_monotone(self, blobs_run):
        lines = (blobs_run["run"] / "progress.ndjson").read_text().splitlines()
        assert len(lines) == 13  # init + 12 generations
        prev = -1.0
        for ln in lines:
            rec = json.loads(ln)
            assert set(rec) == {
                "generation",
                "best_error",
                "min_area",
                "archive_size",
                "hypervolume",
            }
            assert rec["hypervolume"] >= prev - 1e-12
            prev = rec["hypervolume"]

    def test_rerun_is_byte_identical(self, blobs_run, tmp_path):
        rc = cli.main(
            [
                "train",
                str(blobs_run["prep"] / "blobs.json"),
                "--topology",
                "4,3,3",
                "--pop",
                "20",
                "--gens",
                "12",
                "--seed",
                "4",
                "--baseline-acc",
                "0.7",
                "--out-dir",
                str(tmp_path),
                "--quiet",
            ]
        )
        assert rc == 0
        a = (blobs_run["run"] / "archive.json").read_bytes()
        assert (tmp_path / "archive.json").read_bytes() == a

    def test_no_feasible_exit_code_and_fallback(self, blobs_run, tmp_path, capsys):
        rc = cli.main(
            [
                "train",
                str(blobs_run["prep"] / "blobs.json"),
                "--topology",
                "4,3,3",
                "--pop",
                "10",
                "--gens",
                "2",
                "--seed",
                "0",
                "--baseline-acc",
                "1.0",
                "--out-dir",
                str(tmp_path),
                "--quiet",
            ]
        )
        assert rc == 3
        assert "no feasible" in capsys.readouterr().err
        doc = json.loads((tmp_path / "archive.json").read_text())
        assert doc["entries"]
        assert all(e["feasible"] is False for e in doc["entries"])

    def test_config_file_fills_unset_flags(self, blobs_run, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            'topology = "4,3,3"\npop = 20\ngens = 12\nseed = 4\nbaseline_acc = 0.7\n'
        )
        rc = cli.main(
            [
                "train",
                str(blobs_run["prep"] / "blobs.json"),
                "--config",
                str(cfg),
                "--out-dir",
                str(tmp_path / "out"),
                "--quiet",
            ]
        )
        assert rc == 0
        a = (blobs_run["run"] / "archive.json").read_bytes()
        assert (tmp_path / "out" / "archive.json").read_bytes() == a

    def test_flag_beats_config(self, blobs_run, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"gens": 12, "seed": 999}))
        rc = cli.main(
            [
                "train",
                str(blobs_run["prep"] / "blobs.json"),
                "--config",
                str(cfg),
                "--topology",
                "4,3,3",
                "--pop",
                "20",
                "--seed",
                "4",
                "--baseline-acc",
                "0.7",
                "--out-dir",
                str(tmp_path / "out"),
                "--quiet",
            ]
        )
        assert rc == 0
        man = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert man["seed"] == 4  # the flag, not the config value
        a = (blobs_run["run"] / "archive.json").read_bytes()
        assert (tmp_path / "out" / "archive.json").read_bytes() == a

    def test_unknown_config_key_rejected(self, blobs_run, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"generations": 5}))
        rc = cli.main(
            [
                "train",
                str(blobs_run["prep"] / "blobs.json"),
                "--config",
                str(cfg),
                "--quiet",
            ]
        )
        assert rc == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_unknown_dataset_needs_explicit_settings(self, blobs_run, capsys):
        rc = cli.main(["train", str(blobs_run["prep"] / "blobs.json"), "--quiet"])
        assert rc == 2
        assert "topology" in capsys.readouterr().err

    def test_bad_topology_string(self, blobs_run, capsys):
        rc = cli.main(
            [
                "train",
                str(blobs_run["prep"] / "blobs.json"),
                "--topology",
                "4;3;3",
                "--quiet",
            ]
        )
        assert rc == 2


class TestReport:
    def test_csv_to_stdout_with_knee(self, blobs_run, capsys):
        rc = cli.main(["report", str(blobs_run["run"] / "archive.json")])
        assert rc == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0] == "area_fa,train_acc,test_acc,nonmono"
        assert lines[-1].startswith("knee: area_fa=")
        body = lines[1:-1]
        areas = [int(ln.split(",")[0]) for ln in body]
        assert areas == sorted(areas)

    def test_nonmono_flag(self, tmp_path, capsys):
        doc = {
            "version": 1,
            "dataset": "x",
            "entries": [
                {"area_fa": 5, "train_acc": 0.8, "test_acc": 0.90},
                {"area_fa": 6, "train_acc": 0.9, "test_acc": 0.85},
                {"area_fa": 7, "train_acc": 0.95, "test_acc": 0.95},
            ],
        }
        p = tmp_path / "a.json"
        p.write_text(json.dumps(doc))
        rc = cli.main(["report", str(p)])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        flags = [ln.split(",")[3] for ln in lines[1:-1]]
        assert flags == ["0", "1", "0"]

    def test_write_to_file(self, blobs_run, tmp_path, capsys):
        out = tmp_path / "report.csv"
        rc = cli.main(
            ["report", str(blobs_run["run"] / "archive.json"), "--out", str(out)]
        )
        assert rc == 0
        assert out.read_text().startswith("area_fa,")
        assert "knee:" in capsys.readouterr().out

    def test_rejects_non_archive(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("{}")
        assert cli.main(["report", str(p)]) == 2


class TestEmit:
    def test_writes_named_verilog(self, blobs_run, tmp_path, capsys):
        rc = cli.main(
            [
                "emit",
                str(blobs_run["run"] / "archive.json"),
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        files = sorted(p.name for p in tmp_path.iterdir())
        vs = [f for f in files if f.endswith(".v")]
        assert len(vs) == 1
        name = vs[0]
        # blobs_<area>_<pct acc with one decimal>.v
        stem = name[:-2]
        parts = stem.split("_")
        assert parts[0] == "blobs"
        assert parts[1].isdigit()
        float(parts[2])  # e.g. 95.3
        assert "." in parts[2]
        assert name in out
        text = (tmp_path / name).read_text()
        assert "module axgen_top(" in text
        man = json.loads((tmp_path / f"{stem}.manifest.json").read_text())
        assert man["command"] == "emit"

    def test_emit_specific_index_and_rerun_identical(self, blobs_run, tmp_path):
        args = [
            "emit",
            str(blobs_run["run"] / "archive.json"),
            "--index",
            "0",
            "--out-dir",
        ]
        assert cli.main(args + [str(tmp_path / "a")]) == 0
        assert cli.main(args + [str(tmp_path / "b")]) == 0
        va = next((tmp_path / "a").glob("*.v"))
        vb = next((tmp_path / "b").glob("*.v"))
        assert va.name == vb.name
        assert va.read_bytes() == vb.read_bytes()

    def test_bad_index(self, blobs_run, tmp_path, capsys):
        rc = cli.main(
            [
                "emit",
                str(blobs_run["run"] / "archive.json"),
                "--index",
                "99",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert rc == 2
        assert "--index" in capsys.readouterr().err

    def test_module_name_flag(self, blobs_run, tmp_path):
        rc = cli.main(
            [
                "emit",
                str(blobs_run["run"] / "archive.json"),
                "--module",
                "top_dut",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert rc == 0
        text = next(tmp_path.glob("*.v")).read_text()
        assert "module top_dut(" in text


class TestMisc:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as ei:
            cli.main(["--version"])
        assert ei.value.code == 0
        assert "axgen" in capsys.readouterr().out

    def test_datagen_main_writes_files(self, tmp_path, capsys):
        rc = datagen.main(["--out-dir", str(tmp_path), "--only", "breast_cancer"])
        assert rc == 0
        assert (tmp_path / "breast_cancer.csv").exists()
        assert "683 rows" in capsys.readouterr().out
