import numpy as np
import pytest

import tvbseg
from tvbseg.cli import main
from tvbseg.formats import read_pgm, write_pgm
from tvbseg.numerics import F32


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small end-to-end fixture: model, stats, dataset on disk."""
    root = tmp_path_factory.mktemp("cli")
    model = str(root / "model.tvb")
    data = str(root / "data")
    stats = str(root / "stats.tvb")
    assert main(["init", "--out", model, "--seed", "0", "--variant", "kan"]) == 0
    assert main(["synth", "--out", data, "--count", "3", "--seed", "4",
                 "--size", "64"]) == 0
    assert main(["stats", "--model", model, "--data", data,
                 "--out", stats]) == 0
    return {"root": root, "model": model, "data": data, "stats": stats}


class TestSynth:
    def test_file_layout(self, workspace):
        names = sorted(p.name for p in (workspace["root"] / "data").iterdir())
        assert names == ["img_0000.pgm", "img_0001.pgm", "img_0002.pgm",
                         "msk_0000.pgm", "msk_0001.pgm", "msk_0002.pgm"]

    def test_masks_binary(self, workspace):
        mask = read_pgm(str(workspace["root"] / "data" / "msk_0000.pgm"))
        assert set(np.unique(mask)).issubset({0.0, 1.0})

    def test_bad_count(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "d"), "--count", "0",
                     "--seed", "1"]) == 2


class TestInfer:
    def test_writes_mean_and_uncertainty(self, workspace, tmp_path):
        prefix = str(tmp_path / "pred")
        code = main(["infer", "--model", workspace["model"],
                     "--stats", workspace["stats"],
                     "--image", str(workspace["root"] / "data" / "img_0000.pgm"),
                     "--mask", str(workspace["root"] / "data" / "msk_0000.pgm"),
                     "--k", "4", "--seed", "1", "--out", prefix])
        assert code == 0
        mean = read_pgm(prefix + "_mean.pgm")
        unc = read_pgm(prefix + "_unc.pgm")
        assert mean.shape == (64, 64) and unc.shape == (64, 64)

    def test_box_prompt(self, workspace, tmp_path):
        prefix = str(tmp_path / "pred")
        code = main(["infer", "--model", workspace["model"],
                     "--stats", workspace["stats"],
                     "--image", str(workspace["root"] / "data" / "img_0000.pgm"),
                     "--box", "8,8,48,48", "--k", "2", "--seed", "1",
                     "--out", prefix])
        assert code == 0

    def test_malformed_box(self, workspace, tmp_path):
        code = main(["infer", "--model", workspace["model"],
                     "--stats", workspace["stats"],
                     "--image", str(workspace["root"] / "data" / "img_0000.pgm"),
                     "--box", "8,8,48", "--k", "2", "--seed", "1",
                     "--out", str(tmp_path / "x")])
        assert code == 2

    def test_missing_model_file(self, workspace, tmp_path):
        code = main(["infer", "--model", str(tmp_path / "nope.tvb"),
                     "--stats", workspace["stats"],
                     "--image", str(workspace["root"] / "data" / "img_0000.pgm"),
                     "--box", "8,8,48,48", "--out", str(tmp_path / "x")])
        assert code == 3


class TestTrainAnalyzePrune:
    def test_full_flow(self, workspace, tmp_path):
        trained = str(tmp_path / "trained.tvb")
        trace = str(tmp_path / "trace.csv")
        report = str(tmp_path / "report.csv")
        pruned = str(tmp_path / "pruned.tvb")
        assert main(["train", "--model", workspace["model"],
                     "--data", workspace["data"], "--iters", "2",
                     "--seed", "1", "--out", trained, "--trace", trace]) == 0
        lines = open(trace).read().strip().split("\n")
        assert lines[0] == "iteration,l_unw,l_feat,total,mu"
        assert len(lines) == 3
        assert main(["analyze", "--model", trained,
                     "--data", workspace["data"], "--out", report]) == 0
        header = open(report).readline().strip()
        assert header == "channel,positive_ratio,rank"
        assert main(["prune", "--model", trained, "--report", report,
                     "--keep", "4", "--out", pruned]) == 0
        back = tvbseg.load_model(pruned)
        assert back.prune_mask.sum() == 4

    def test_train_rejects_mlp(self, workspace, tmp_path):
        mlp = str(tmp_path / "mlp.tvb")
        assert main(["init", "--out", mlp, "--variant", "mlp"]) == 0
        assert main(["train", "--model", mlp, "--data", workspace["data"],
                     "--iters", "1", "--out", str(tmp_path / "o.tvb")]) == 2

    def test_prune_rejects_bad_report(self, workspace, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("channel,positive_ratio,rank\n0,0.5,0\n")
        assert main(["prune", "--model", workspace["model"],
                     "--report", str(bad), "--keep", "4",
                     "--out", str(tmp_path / "o.tvb")]) == 3


class TestEval:
    def test_csv_shape(self, workspace, capsys):
        code = main(["eval", "--model", workspace["model"],
                     "--stats", workspace["stats"], "--k", "2",
                     "--data", workspace["data"], "--seed", "1"])
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 4
        assert lines[-1].startswith("mean,")
        for line in lines[:-1]:
            name, score = line.split(",")
            assert name.startswith("img_")
            assert 0.0 <= float(score) <= 1.0

    def test_deterministic_mode_without_stats(self, workspace, capsys):
        assert main(["eval", "--model", workspace["model"],
                     "--data", workspace["data"]]) == 0
        first = capsys.readouterr().out
        assert main(["eval", "--model", workspace["model"],
                     "--data", workspace["data"]]) == 0
        assert capsys.readouterr().out == first


class TestErrors:
    def test_unknown_command_usage_error(self):
        assert main(["frobnicate"]) == 2

    def test_missing_data_dir(self, workspace, tmp_path):
        assert main(["stats", "--model", workspace["model"],
                     "--data", str(tmp_path / "void"),
                     "--out", str(tmp_path / "s.tvb")]) == 3

    def test_corrupt_model_container(self, workspace, tmp_path):
        bad = tmp_path / "corrupt.tvb"
        bad.write_bytes(b"TVB1\x05\x00\x00\x00short")
        assert main(["stats", "--model", str(bad), "--data", workspace["data"],
                     "--out", str(tmp_path / "s.tvb")]) == 3

    def test_non_finite_model_numeric_error(self, workspace, tmp_path):
        from tvbseg.formats import read_container, write_container
        entries = read_container(workspace["model"])
        entries["pixel_proj_w"] = entries["pixel_proj_w"].copy()
        entries["pixel_proj_w"][0] = np.inf
        bad = tmp_path / "inf.tvb"
        write_container(bad, entries)
        assert main(["stats", "--model", str(bad), "--data", workspace["data"],
                     "--out", str(tmp_path / "s.tvb")]) == 4

    def test_orphan_image_missing_mask(self, workspace, tmp_path):
        d = tmp_path / "orphan"
        d.mkdir()
        write_pgm(str(d / "img_0000.pgm"), np.zeros((16, 16), F32))
        assert main(["eval", "--model", workspace["model"],
                     "--data", str(d)]) == 3
