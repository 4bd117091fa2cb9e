import json
import os

import pytest

from textlier.cli import main, sub_seed
from textlier.corpus import read_embeddings

from synth import write_benchmark_files


@pytest.fixture()
def toy_corpus(tmp_path):
    raw = tmp_path / "raw.jsonl"
    recs = [{"id": "a", "text": "First sentence. Second one."},
            {"id": "b", "text": "Only sentence here"}]
    raw.write_text("".join(json.dumps(r) + "\n" for r in recs))
    return str(raw)


class TestSubSeeds:
    def test_stable_and_distinct(self):
        assert sub_seed(5, "split") == sub_seed(5, "split")
        assert sub_seed(5, "split") != sub_seed(5, "ae")
        assert sub_seed(5, "split") != sub_seed(6, "split")


class TestEmbed:
    def test_hash_provider(self, toy_corpus, tmp_path):
        out = str(tmp_path / "emb.jsonl")
        rc = main(["embed", "--input", toy_corpus, "--out", out,
                   "--embed-dim", "8", "--max-sent", "4"])
        assert rc == 0
        docs, header = read_embeddings(out)
        assert len(docs) == 2
        assert header["embed_dim"] == 8
        assert docs[0].sentence_count == 2

    def test_rerun_is_byte_identical(self, toy_corpus, tmp_path):
        out1, out2 = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
        for out in (out1, out2):
            assert main(["embed", "--input", toy_corpus, "--out", out,
                         "--embed-dim", "8", "--max-sent", "4"]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_missing_input_exits_2_no_output(self, tmp_path):
        out = str(tmp_path / "emb.jsonl")
        rc = main(["embed", "--input", str(tmp_path / "nope.jsonl"),
                   "--out", out])
        assert rc == 2
        assert not os.path.exists(out)

    def test_file_provider_requires_path(self, toy_corpus, tmp_path):
        rc = main(["embed", "--input", toy_corpus, "--provider", "file",
                   "--out", str(tmp_path / "e.jsonl")])
        assert rc == 2

    def test_malformed_corpus_exits_3(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n")
        rc = main(["embed", "--input", str(bad),
                   "--out", str(tmp_path / "e.jsonl")])
        assert rc == 3


class TestInject:
    def _write(self, path, n, tag):
        path.write_text("".join(
            json.dumps({"id": f"{tag}{i}", "text": f"text {i}."}) + "\n"
            for i in range(n)))

    def test_counts_and_tags(self, tmp_path):
        normal, pool = tmp_path / "n.jsonl", tmp_path / "o.jsonl"
        self._write(normal, 20, "n")
        self._write(pool, 10, "o")
        out = str(tmp_path / "mix.jsonl")
        rc = main(["inject", "--normal", str(normal), "--outliers", str(pool),
                   "-n", "5", "--seed", "1", "--out", out])
        assert rc == 0
        recs = [json.loads(l) for l in open(out)]
        assert len(recs) == 25
        assert sum(1 for r in recs if r["source"] == "outlier_corpus") == 5

    def test_n_exceeds_pool(self, tmp_path):
        normal, pool = tmp_path / "n.jsonl", tmp_path / "o.jsonl"
        self._write(normal, 3, "n")
        self._write(pool, 2, "o")
        rc = main(["inject", "--normal", str(normal), "--outliers", str(pool),
                   "-n", "5", "--seed", "1", "--out", str(tmp_path / "x.jsonl")])
        assert rc == 2


class TestSplitCommand:
    def test_writes_three_files(self, tmp_path):
        raw_path, lut_path = write_benchmark_files(tmp_path, 40, 10, seed=3)
        emb = str(tmp_path / "emb.jsonl")
        assert main(["embed", "--input", raw_path, "--provider", "file",
                     "--provider-path", lut_path, "--out", emb,
                     "--max-sent", "8"]) == 0
        out_dir = str(tmp_path / "splits")
        assert main(["split", "--embeddings", emb, "--out-dir", out_dir,
                     "--seed", "2"]) == 0
        sizes = {}
        for name in ("train", "validation", "test"):
            docs, _ = read_embeddings(os.path.join(out_dir, f"{name}.jsonl"))
            sizes[name] = len(docs)
        assert sum(sizes.values()) == 50
        assert sizes["train"] == 40
        assert os.path.exists(os.path.join(out_dir, "split_config.json"))

    def test_requires_out_dir(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["split", "--embeddings", "whatever.jsonl"])
        assert exc.value.code == 2


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    raw_path, lut_path = write_benchmark_files(tmp, 120, 30, seed=21)
    emb = str(tmp / "emb.jsonl")
    assert main(["embed", "--input", raw_path, "--provider", "file",
                 "--provider-path", lut_path, "--out", emb,
                 "--max-sent", "8"]) == 0
    ckpt = str(tmp / "model.ckpt")
    assert main(["train", "--embeddings", emb, "--out", ckpt,
                 "--out-dir", str(tmp), "--seed", "4",
                 "--epochs", "12"]) == 0
    return tmp, emb, ckpt


class TestTrainScoreEval:
    def test_train_outputs(self, pipeline):
        tmp, _, ckpt = pipeline
        assert os.path.exists(ckpt)
        assert os.path.exists(tmp / "train_config.json")
        assert os.path.exists(tmp / "training_loss.png")

    def test_score(self, pipeline):
        tmp, emb, ckpt = pipeline
        out = str(tmp / "scores.jsonl")
        assert main(["score", "--checkpoint", ckpt, "--embeddings", emb,
                     "--out", out]) == 0
        recs = [json.loads(l) for l in open(out)]
        assert len(recs) == 150
        assert all(r["scorer"] == "ae_recon" for r in recs)
        assert os.path.exists(tmp / "scores.png")

    def test_eval_writes_report_and_figure(self, pipeline):
        tmp, emb, ckpt = pipeline
        out = str(tmp / "report.json")
        assert main(["eval", "--checkpoint", ckpt, "--embeddings", emb,
                     "--partition", "validation", "--out", out]) == 0
        report = json.loads(open(out).read())
        assert report["n_samples"] == 15
        assert set(report["confusion"]) == {"tn", "fp", "fn", "tp"}
        assert os.path.exists(tmp / "report.txt")
        assert os.path.exists(tmp / "report.png")

    def test_eval_train_partition_near_perfect(self, pipeline):
        tmp, emb, ckpt = pipeline
        out = str(tmp / "train_report.json")
        assert main(["eval", "--checkpoint", ckpt, "--embeddings", emb,
                     "--partition", "train", "--out", out]) == 0
        report = json.loads(open(out).read())
        assert report["f1"] >= 0.9

    def test_score_with_corrupt_checkpoint_exits_3(self, pipeline, tmp_path):
        _, emb, _ = pipeline
        bad = tmp_path / "bad.ckpt"
        bad.write_text("garbage\n")
        rc = main(["score", "--checkpoint", str(bad), "--embeddings", emb,
                   "--out", str(tmp_path / "s.jsonl")])
        assert rc == 3

    def test_baseline_command(self, pipeline, tmp_path):
        _, emb, _ = pipeline
        out_dir = str(tmp_path / "base")
        rc = main(["baseline", "--scorer", "mahalanobis", "--embeddings", emb,
                   "--partition", "validation", "--out-dir", out_dir,
                   "--seed", "4"])
        assert rc == 0
        for name in ("mahalanobis_scores.jsonl", "mahalanobis_report.json",
                     "mahalanobis_report.txt", "mahalanobis_scores.png",
                     "mahalanobis_config.json"):
            assert os.path.exists(os.path.join(out_dir, name))

    def test_config_file_resolution(self, pipeline, tmp_path):
        tmp, emb, _ = pipeline
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pca_k": 2, "seed": 4}))
        out_dir = str(tmp_path / "base_pca")
        rc = main(["baseline", "--scorer", "pca", "--embeddings", emb,
                   "--config", str(cfg), "--out-dir", out_dir])
        assert rc == 0
        resolved = json.loads(open(os.path.join(out_dir, "pca_config.json")).read())
        assert resolved["pca_k"] == 2 and resolved["seed"] == 4

    def test_unknown_config_key_exits_2(self, pipeline, tmp_path):
        _, emb, _ = pipeline
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus_knob": 1}))
        rc = main(["baseline", "--scorer", "pca", "--embeddings", emb,
                   "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
        assert rc == 2
