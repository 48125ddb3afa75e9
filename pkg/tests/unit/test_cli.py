"""Unit tests for the rankvec command line."""

from pathlib import Path

import pytest

from src.cli.rankvec import run


def _lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if line]


@pytest.fixture
def toy_files(tmp_path: Path) -> tuple[Path, Path]:
    corpus, pairs = tmp_path / "toy.txt", tmp_path / "toy.tsv"
    code = run(
        [
            "gen-toy",
            "--seed", "1",
            "--clusters", "3",
            "--per-cluster", "8",
            "--vocab", "10",
            "--pairs", "12",
            "--corpus-out", str(corpus),
            "--pairs-out", str(pairs),
        ]
    )  # fmt: skip
    assert code == 0
    return corpus, pairs


@pytest.fixture
def base_index(tmp_path: Path, toy_files: tuple[Path, Path]) -> Path:
    out = tmp_path / "e1.rki"
    code = run(["index", "--corpus", str(toy_files[0]), "--dim", "8", "--features", "128", "--out", str(out)])
    assert code == 0
    return out


@pytest.mark.unit
class TestHelp:
    def test_help_lists_defaults(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert run(["train", "--help"]) == 0
        text = " ".join(capsys.readouterr().out.split())
        for default in ("[default: 0.05]", "[default: 0.5]", "[default: 0.8]", "[default: 64]"):
            assert default in text

    def test_eval_help_lists_lambda_inf(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert run(["eval", "--help"]) == 0
        assert "[default: 0.1]" in " ".join(capsys.readouterr().out.split())


@pytest.mark.unit
class TestExitCodes:
    def test_unknown_flag(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert run(["index", "--bogus"]) == 1
        assert _lines(capsys.readouterr().err)[-1].startswith("rankvec: error[usage]:")

    def test_threshold_validation(
        self, capsys: pytest.CaptureFixture[str], toy_files: tuple[Path, Path], base_index: Path, tmp_path: Path
    ) -> None:
        capsys.readouterr()
        code = run(
            [
                "train",
                "--corpus", str(toy_files[0]),
                "--index", str(base_index),
                "--tau-l", "0.9",
                "--tau-u", "0.5",
                "--out", str(tmp_path / "m.rkm"),
            ]
        )  # fmt: skip
        assert code == 1
        assert "tau_l must not exceed tau_u" in capsys.readouterr().err

    def test_missing_corpus_is_data_error(self, capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
        code = run(["index", "--corpus", str(tmp_path / "none.txt"), "--out", str(tmp_path / "x.rki")])
        assert code == 2
        assert _lines(capsys.readouterr().err)[-1].startswith("rankvec: error[data]:")

    def test_constant_gold_is_domain_error(
        self, capsys: pytest.CaptureFixture[str], base_index: Path, tmp_path: Path
    ) -> None:
        dataset = tmp_path / "flat.tsv"
        dataset.write_text("a cat\ta dog\t2.0\nthe sun\tthe moon\t2.0\nred\tblue\t2.0\n", encoding="utf-8")
        assert run(["eval", "--dataset", str(dataset), "--index", str(base_index)]) == 2
        assert _lines(capsys.readouterr().err)[-1].startswith("rankvec: error[domain]:")


@pytest.mark.unit
class TestCommands:
    def test_config_printed_before_work(self, capsys: pytest.CaptureFixture[str], base_index: Path, toy_files: tuple[Path, Path]) -> None:
        capsys.readouterr()
        assert run(["eval", "--dataset", str(toy_files[1]), "--index", str(base_index)]) == 0
        err = capsys.readouterr().err
        assert err.startswith("rankvec: config ")
        assert '"lambda_inf": 0.1' in err

    def test_env_and_flag_precedence(
        self,
        capsys: pytest.CaptureFixture[str],
        monkeypatch: pytest.MonkeyPatch,
        base_index: Path,
        toy_files: tuple[Path, Path],
    ) -> None:
        monkeypatch.setenv("RANKVEC_LAMBDA_INF", "0.4")
        capsys.readouterr()
        assert run(["eval", "--dataset", str(toy_files[1]), "--index", str(base_index)]) == 0
        assert _lines(capsys.readouterr().out)[1].startswith("blend,0.4,12,")
        assert run(["eval", "--dataset", str(toy_files[1]), "--index", str(base_index), "--lambda-inf", "0.2"]) == 0
        assert _lines(capsys.readouterr().out)[1].startswith("blend,0.2,12,")

    def test_score_writes_tsv(
        self, capsys: pytest.CaptureFixture[str], base_index: Path, toy_files: tuple[Path, Path], tmp_path: Path
    ) -> None:
        out = tmp_path / "scores.tsv"
        code = run(["score", "--pairs", str(toy_files[1]), "--index", str(base_index), "--scorer", "rank", "--out", str(out)])
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "sentence1\tsentence2\tpredicted"
        assert len(lines) == 13

    def test_analyze_buckets_csv(self, capsys: pytest.CaptureFixture[str], base_index: Path, toy_files: tuple[Path, Path]) -> None:
        capsys.readouterr()
        assert run(["analyze", "buckets", "--dataset", str(toy_files[1]), "--index", str(base_index)]) == 0
        lines = _lines(capsys.readouterr().out)
        assert lines[0] == "bucket,lower,upper,count,spearman"
        assert len(lines) == 4

    def test_train_then_blend_with_retrained_index(
        self, capsys: pytest.CaptureFixture[str], tmp_path: Path, base_index: Path, toy_files: tuple[Path, Path]
    ) -> None:
        corpus, pairs = toy_files
        model, loss_log, e2_index = tmp_path / "e2.rkm", tmp_path / "loss.csv", tmp_path / "e2.rki"
        code = run(
            [
                "train",
                "--corpus", str(corpus),
                "--index", str(base_index),
                "--dim", "8",
                "--features", "128",
                "--batch-size", "8",
                "--epochs", "1",
                "--out", str(model),
                "--loss-log", str(loss_log),
            ]
        )  # fmt: skip
        assert code == 0
        assert loss_log.read_text(encoding="utf-8").startswith("step,l_cl,lambda_lr,l_total\n")
        assert run(["index", "--corpus", str(corpus), "--encoder", f"model:{model}", "--out", str(e2_index)]) == 0
        capsys.readouterr()
        assert run(["eval", "--dataset", str(pairs), "--model", str(model), "--index", str(e2_index)]) == 0
        assert _lines(capsys.readouterr().out)[0] == "scorer,lambda_inf,pairs,spearman"

    def test_model_against_base_index_is_rejected(
        self, capsys: pytest.CaptureFixture[str], tmp_path: Path, base_index: Path, toy_files: tuple[Path, Path]
    ) -> None:
        model = tmp_path / "e2.rkm"
        code = run(
            [
                "train", "--corpus", str(toy_files[0]), "--index", str(base_index),
                "--dim", "8", "--features", "128", "--batch-size", "8", "--epochs", "1",
                "--seed", "3", "--out", str(model),
            ]
        )  # fmt: skip
        assert code == 0
        assert run(["eval", "--dataset", str(toy_files[1]), "--model", str(model), "--index", str(base_index)]) == 2
        assert "fingerprint" in capsys.readouterr().err

    def test_export_embeddings(self, base_index: Path, tmp_path: Path) -> None:
        out = tmp_path / "e1.tsv"
        assert run(["export-embeddings", "--index", str(base_index), "--out", str(out)]) == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 24

    def test_bench(self, capsys: pytest.CaptureFixture[str], base_index: Path) -> None:
        capsys.readouterr()
        assert run(["bench", "--index", str(base_index), "--batch-size", "4", "--repeats", "1"]) == 0
        lines = _lines(capsys.readouterr().out)
        assert lines[0] == "stage,batch_size,corpus_size,dim,seconds"
        assert len(lines) == 3

    def test_metrics_file(self, tmp_path: Path, base_index: Path) -> None:
        metrics = tmp_path / "metrics.prom"
        assert run(["--metrics-out", str(metrics), "bench", "--index", str(base_index), "--repeats", "1"]) == 0
        assert "rankvec_rank_vectors_total" in metrics.read_text(encoding="utf-8")
