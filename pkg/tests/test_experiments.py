import numpy as np
import pytest

from adjnorm import cli
from adjnorm import config as C
from adjnorm import experiments as E


def write_config(tmp_path, out_dir, **overrides):
    base = {
        "dataset": {
            "name": "toy",
            "synth_users": "60",
            "synth_items": "30",
            "synth_per_user": "12",
            "synth_zipf": "0.8",
            "synth_seed": "3",
            "kcore_min": "1",
            "split_seed": "3",
        },
        "model": {"backbone": "lightgcn", "layers": "2", "r": "0.5", "embed_dim": "8"},
        "train": {
            "max_epochs": "3",
            "eval_every": "1",
            "patience": "5",
            "batch_size": "256",
        },
        "eval": {"k": "5", "seeds": "0"},
        "output": {"dir": str(out_dir)},
    }
    for section, kv in overrides.items():
        base.setdefault(section, {}).update(kv)
    lines = []
    for section, kv in base.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in kv.items())
    path = tmp_path / "exp.ini"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestConfig:
    def test_load_roundtrip(self, tmp_path):
        path = write_config(tmp_path, tmp_path / "out")
        cfg = C.load_config(path)
        assert cfg.synth.num_users == 60
        assert cfg.model.layers == 2
        assert cfg.model.r == 0.5
        assert cfg.train.max_epochs == 3
        assert cfg.ks == [5]
        assert cfg.seeds == [0]
        assert cfg.dataset_name == "toy"
        assert cfg.split_dir == tmp_path / "out" / "splits"

    def test_defaults(self, tmp_path):
        path = tmp_path / "min.ini"
        path.write_text("[dataset]\nsynth_users = 5\nsynth_items = 5\n"
                        "synth_per_user = 2\n")
        cfg = C.load_config(path)
        assert cfg.model.backbone.value == "lightgcn"
        assert cfg.model.embed_dim == 64
        assert cfg.train.learning_rate == 0.001
        assert cfg.split.kcore_min == 10
        assert cfg.baseline.kind.value == "none"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            C.load_config(tmp_path / "absent.ini")

    def test_validate_needs_a_source(self, tmp_path):
        path = tmp_path / "empty.ini"
        path.write_text("[model]\nlayers = 1\n")
        with pytest.raises(ValueError):
            C.load_config(path).validate()

    def test_validate_names_missing_dataset_path(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[dataset]\npath = /nope/missing.tsv\n")
        with pytest.raises(FileNotFoundError, match="/nope/missing.tsv"):
            C.load_config(path).validate()


@pytest.fixture
def prepared(tmp_path):
    out = tmp_path / "out"
    path = write_config(tmp_path, out)
    cfg = C.load_config(path)
    ds = E.run_prepare(cfg)
    return path, cfg, ds


class TestPrepare:
    def test_writes_split_files(self, prepared):
        _, cfg, _ = prepared
        for name in (
            "train.tsv",
            "val.tsv",
            "test.tsv",
            "idmap_users.tsv",
            "idmap_items.tsv",
            "stats.tsv",
        ):
            assert (cfg.split_dir / name).exists()

    def test_prints_stats_table(self, tmp_path, capsys):
        path = write_config(tmp_path, tmp_path / "out")
        assert cli.main(["prepare", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "toy" in out
        assert "#users" in out and "sparsity" in out

    def test_reload_matches(self, prepared):
        _, cfg, ds = prepared
        loaded = E._load_prepared(cfg)
        np.testing.assert_array_equal(loaded.train, ds.train)
        np.testing.assert_array_equal(loaded.test, ds.test)
        np.testing.assert_array_equal(loaded.item_degree, ds.item_degree)


class TestTrainEval:
    def test_metrics_csv_structure(self, prepared):
        path, cfg, _ = prepared
        assert cli.main(["train", "--config", str(path)]) == 0
        csv = (cfg.output_dir / "metrics.csv").read_text().splitlines()
        assert csv[0] == E.METRICS_HEADER
        width = len(E.METRICS_HEADER.split(","))
        assert all(len(line.split(",")) == width for line in csv[1:])
        seeds = [line.split(",")[7] for line in csv[1:]]
        assert seeds == ["0", "mean", "std"]
        assert (cfg.output_dir / "seed0" / "best.ckpt").exists()
        log_lines = (
            cfg.output_dir / "seed0" / "training_log.csv"
        ).read_text().splitlines()
        assert log_lines[0] == "epoch,loss,val_recall@20,elapsed_ms"

    def test_deterministic_across_runs(self, prepared):
        path, cfg, ds = prepared
        first = E.run_train_eval(cfg, ds=ds)
        (cfg.output_dir / "metrics.csv").unlink()
        second = E.run_train_eval(cfg, ds=ds)
        assert len(first) == len(second)
        for a, b in zip(first, second):
            assert (a.recall, a.ndcg, a.nov, a.pru) == (b.recall, b.ndcg, b.nov, b.pru)

    def test_train_before_prepare_names_missing_dir(self, tmp_path, capsys):
        path = write_config(tmp_path, tmp_path / "never_prepared")
        assert cli.main(["train", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "never_prepared" in err and "prepare" in err

    def test_eval_checkpoint_matches_train_metrics(self, prepared, capsys):
        path, cfg, ds = prepared
        reports = E.run_train_eval(cfg, ds=ds)
        ckpt = cfg.output_dir / "seed0" / "best.ckpt"
        assert cli.main(
            ["eval", "--config", str(path), "--checkpoint", str(ckpt)]
        ) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == E.METRICS_HEADER
        fields = out[1].split(",")
        assert float(fields[9]) == pytest.approx(reports[0].recall)
        assert float(fields[10]) == pytest.approx(reports[0].ndcg)


class TestSweep:
    def test_sweep_csv_and_plot(self, prepared):
        path, cfg, ds = prepared
        csv_path = E.run_sweep(cfg, "r", [0.0, 1.0], ds=ds)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == f"axis_value,{E.METRICS_HEADER}"
        axis_values = {line.split(",")[0] for line in lines[1:]}
        assert axis_values == {"0", "1"}
        assert (cfg.output_dir / "sweep.svg").exists()

    def test_cli_sweep_depth(self, prepared):
        path, cfg, _ = prepared
        code = cli.main(
            ["sweep", "--config", str(path), "--axis", "depth", "--values", "1,2"]
        )
        assert code == 0
        assert (cfg.output_dir / "sweep.csv").exists()

    def test_unsorted_values_rejected(self, prepared):
        path, cfg, ds = prepared
        with pytest.raises(ValueError):
            E.run_sweep(cfg, "r", [1.0, 0.5], ds=ds)

    def test_bad_axis_rejected_by_parser(self, prepared, capsys):
        path, _, _ = prepared
        code = cli.main(
            ["sweep", "--config", str(path), "--axis", "gamma", "--values", "1"]
        )
        assert code == 1

    def test_report_regenerates_plot(self, prepared):
        path, cfg, ds = prepared
        E.run_sweep(cfg, "r", [0.0, 1.0], ds=ds)
        (cfg.output_dir / "sweep.svg").unlink()
        assert cli.main(["report", "--dir", str(cfg.output_dir)]) == 0
        assert (cfg.output_dir / "sweep.svg").exists()


class TestCliErrors:
    def test_no_command_is_usage_error(self):
        assert cli.main([]) == 1

    def test_missing_config_is_data_error(self, tmp_path, capsys):
        code = cli.main(["prepare", "--config", str(tmp_path / "nope.ini")])
        assert code == 2
        assert "nope.ini" in capsys.readouterr().err

    def test_thread_cap_env(self, monkeypatch):
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            monkeypatch.delenv(var, raising=False)
        monkeypatch.setenv("ADJNORM_THREADS", "2")
        cli._cap_threads()
        import os

        assert os.environ["OMP_NUM_THREADS"] == "2"
        assert os.environ["MKL_NUM_THREADS"] == "2"


class TestVerifyTheoryCommand:
    def test_small_run_passes(self, capsys):
        code = cli.main(
            [
                "verify-theory",
                "--sizes",
                "6,10",
                "--rs",
                "0.5,1",
                "--graphs",
                "2",
                "--tol",
                "1e-6",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "RESULT: PASS" in out
        assert "l_star" in out
