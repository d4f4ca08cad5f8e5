import pytest

from recnet import main
from src.commands import BOUND_FILE, CHECKPOINT_FILE, COVER_FILE, RANKINGS_FILE, TRAIN_LOG_FILE
from src.metrics import PER_USER_FILE, REPORT_FILE


def _run(*argv):
    return main(["--quiet", "--threads", "1", *argv])


@pytest.fixture
def prepared(toy_log, tmp_path):
    out = tmp_path / "prepared"
    assert _run("--out", str(out), "prepare", "--raw", str(toy_log)) == 0
    return out


@pytest.fixture
def trained(prepared, tmp_path):
    out = tmp_path / "run"
    assert _run("--out", str(out), "train", "--data", str(prepared), "--epochs", "5") == 0
    return out


class TestCover:

    def test_two_by_three(self, tmp_path, capsys):
        assert _run("--out", str(tmp_path), "cover", "2", "3") == 0
        assert "chromatic_value\t3.000000" in capsys.readouterr().out
        assert (tmp_path / COVER_FILE).is_file()

    def test_exhaustive(self, tmp_path, capsys):
        assert _run("--out", str(tmp_path), "cover", "3", "2", "--method", "exhaustive") == 0
        assert "chromatic_value\t3.000000" in capsys.readouterr().out

    def test_invalid_grid(self, tmp_path):
        assert _run("--out", str(tmp_path), "cover", "0", "3") == 2


class TestErrors:

    def test_delta_out_of_range(self, tmp_path):
        assert _run("--out", str(tmp_path), "bound", "--checkpoint", "x.json", "--delta", "1.5") == 2

    def test_missing_checkpoint(self, prepared, tmp_path):
        code = _run("--out", str(tmp_path / "eval"), "eval", "--checkpoint", str(tmp_path / "absent.json"),
                    "--data", str(prepared))
        assert code == 2

    def test_missing_config(self, tmp_path):
        assert _run("--config", str(tmp_path / "absent.json"), "cover", "1", "1") == 2

    def test_unparsable_log(self, tmp_path):
        raw = tmp_path / "bad.tsv"
        raw.write_text("1\t2\n")
        assert _run("--out", str(tmp_path / "prepared"), "prepare", "--raw", str(raw)) == 1

    def test_rank_needs_positive_k(self, trained, prepared, tmp_path):
        code = _run("--out", str(tmp_path), "rank", "--checkpoint", str(trained / CHECKPOINT_FILE),
                    "--data", str(prepared), "-k", "0")
        assert code == 2


class TestPipeline:

    def test_prepare_outputs(self, prepared):
        for name in ("index.map", "train.tsv", "test.tsv", "stats.txt", "config.json"):
            assert (prepared / name).is_file()

    def test_train_outputs(self, trained):
        assert (trained / CHECKPOINT_FILE).is_file()
        assert len((trained / TRAIN_LOG_FILE).read_text().splitlines()) == 5

    def test_rerun_is_byte_identical(self, toy_log, tmp_path):
        outputs = []
        for name in ("first", "second"):
            base = tmp_path / name
            assert _run("--out", str(base / "prepared"), "prepare", "--raw", str(toy_log)) == 0
            assert _run("--out", str(base / "run"), "train", "--data", str(base / "prepared"), "--epochs", "5") == 0
            assert _run("--out", str(base / "eval"), "eval", "--checkpoint", str(base / "run" / CHECKPOINT_FILE),
                        "--data", str(base / "prepared")) == 0
            outputs.append([
                (base / "run" / CHECKPOINT_FILE).read_bytes(),
                (base / "run" / TRAIN_LOG_FILE).read_bytes(),
                (base / "eval" / REPORT_FILE).read_bytes(),
                (base / "eval" / PER_USER_FILE).read_bytes(),
            ])
        assert outputs[0] == outputs[1]

    def test_rank_and_bound(self, trained, prepared, tmp_path):
        checkpoint = str(trained / CHECKPOINT_FILE)
        assert _run("--out", str(tmp_path / "rank"), "rank", "--checkpoint", checkpoint, "--data", str(prepared),
                    "-k", "2", "--users", "1,2") == 0
        lines = (tmp_path / "rank" / RANKINGS_FILE).read_text().splitlines()
        # item 7 never reaches train, so item 6 is the only test candidate
        assert [line.split("\t")[:3] for line in lines] == [["1", "1", "6"], ["2", "1", "6"]]

        assert _run("--out", str(tmp_path / "bound"), "bound", "--checkpoint", checkpoint,
                    "--data", str(prepared), "--delta", "0.1") == 0
        text = (tmp_path / "bound" / BOUND_FILE).read_text()
        assert "delta\t0.1\n" in text
        assert "B_is_heuristic\tTrue\n" in text

    def test_compare_identical_reports(self, trained, prepared, tmp_path, capsys):
        checkpoint = str(trained / CHECKPOINT_FILE)
        for name in ("a", "b"):
            assert _run("--out", str(tmp_path / name), "eval", "--checkpoint", checkpoint,
                        "--data", str(prepared)) == 0
        capsys.readouterr()
        assert _run("--out", str(tmp_path / "cmp"), "compare", str(tmp_path / "a"), str(tmp_path / "b")) == 0
        out = capsys.readouterr().out
        assert "p_value\t1.0\n" in out
        assert "significant\tFalse\n" in out
