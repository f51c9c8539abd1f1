# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""End-to-end tests for the ``cmlab`` command line on a small synthetic corpus."""

import csv

import pytest
from cmlab import __version__
from cmlab.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, build_parser, load_segmenter, main
from cmlab.corpus_model import Perturbation, load_corpus
from cmlab.errors import CmlabError

_LIDS = ["ab", "aab", "abab", "aabb", "abba", "aaab", "abn", "baab"]
_POS = ["NOUN", "VERB", "ADJ"]
_FAST = ["--epochs", "5", "--patience", "5"]


def _ratings(i):
    base = 1 + (i * 7) % 5
    return [base, base, base + 1] if base < 5 else [5, 5, 4]


def _records(n=60, prefix="s", ratings=True):
    records = []
    for i in range(n):
        lids = _LIDS[i % len(_LIDS)]
        rec = {
            "id": f"{prefix}{i:02d}",
            "tokens": [
                {"surface": f"w{j}", "lid": {"a": "l1", "b": "l2", "n": "neutral"}[c], "pos": _POS[(i + j) % 3]}
                for j, c in enumerate(lids)
            ],
            "source": "gcm" if i % 2 == 0 else "osn",
            "script": "roman",
        }
        if ratings:
            rec["ratings"] = _ratings(i)
        records.append(rec)
    return records


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


def _without_paths(report):
    return [line for line in report.read_text(encoding="utf-8").splitlines() if not line.startswith("paths.")]


@pytest.fixture
def corpus(write_corpus):
    return write_corpus(_records())


@pytest.fixture
def annotations(tmp_path):
    path = tmp_path / "annotations.csv"
    lines = ["sample_id,r1,r2,r3"] + [f"s{i:02d}," + ",".join(str(r) for r in _ratings(i)) for i in range(60)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def metrics(tmp_path, corpus):
    out = tmp_path / "metrics.csv"
    assert main(["metrics", "--in", str(corpus), "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture
def splits(tmp_path, metrics, annotations):
    out_dir = tmp_path / "splits"
    argv = ["split", "--metrics", str(metrics), "--ratings", str(annotations), "--out-dir", str(out_dir)]
    assert main(argv) == EXIT_OK
    return out_dir


class TestParser:
    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert f"cmlab {__version__}" in capsys.readouterr().out

    def test_missing_command(self):
        assert main([]) == EXIT_VALIDATION

    def test_unknown_flag(self, corpus, tmp_path):
        assert main(["metrics", "--in", str(corpus), "--out", str(tmp_path / "m.csv"), "--bogus"]) == EXIT_VALIDATION

    def test_bad_choice(self, corpus, tmp_path):
        argv = ["perturb", "--in", str(corpus), "--out", str(tmp_path / "p.jsonl"), "--kind", "shuffle"]
        assert main(argv) == EXIT_VALIDATION

    def test_every_command_listed(self):
        text = build_parser().format_help()
        for command in ("metrics", "perturb", "ngrams", "agree", "split", "analyze", "train", "eval", "baseline"):
            assert command in text
        assert "fertility" in text
        assert "report" in text


class TestExitCodes:
    def test_missing_input_is_io_error(self, tmp_path, capsys):
        assert main(["metrics", "--in", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "m.csv")]) == EXIT_IO
        assert "absent.jsonl" in capsys.readouterr().err

    def test_malformed_corpus_is_validation_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json\n", encoding="utf-8")
        assert main(["metrics", "--in", str(bad), "--out", str(tmp_path / "m.csv")]) == EXIT_VALIDATION
        assert not (tmp_path / "m.csv").exists()

    def test_undecodable_corpus_is_validation_error(self, tmp_path, capsys, write_corpus):
        bad = write_corpus(_records(2), "latin1.jsonl")
        bad.write_bytes(bad.read_bytes() + '{"id": "caf\u00e9"}\n'.encode("latin-1"))
        assert main(["metrics", "--in", str(bad), "--out", str(tmp_path / "m.csv")]) == EXIT_VALIDATION
        err = capsys.readouterr().err
        assert "latin1.jsonl:3" in err
        assert "UTF-8" in err
        assert not (tmp_path / "m.csv").exists()

    def test_unknown_config_key(self, tmp_path, corpus):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("temperature = 3\n", encoding="utf-8")
        argv = ["metrics", "--in", str(corpus), "--out", str(tmp_path / "m.csv"), "--config", str(cfg)]
        assert main(argv) == EXIT_VALIDATION

    def test_bad_seed(self, tmp_path, corpus):
        argv = ["metrics", "--in", str(corpus), "--out", str(tmp_path / "m.csv"), "--seed", "-1"]
        assert main(argv) == EXIT_VALIDATION


class TestMetrics:
    def test_one_row_per_sentence(self, metrics):
        rows = _read_csv(metrics)
        assert rows[0][:6] == ["id", "length", "cmi", "switch_points", "burstiness", "symcom_sentence"]
        assert [r[0] for r in rows[1:]] == [f"s{i:02d}" for i in range(60)]

    def test_jobs_do_not_change_output(self, tmp_path, corpus, metrics):
        out = tmp_path / "parallel.csv"
        assert main(["metrics", "--in", str(corpus), "--out", str(out), "--jobs", "4"]) == EXIT_OK
        assert out.read_bytes() == metrics.read_bytes()


class TestPerturb:
    def test_swap(self, tmp_path, corpus):
        out = tmp_path / "swapped.jsonl"
        assert main(["perturb", "--in", str(corpus), "--out", str(out), "--kind", "swap", "--seed", "7"]) == EXIT_OK
        perturbed = load_corpus(out)
        assert len(perturbed) == 60
        assert all(s.perturbation is Perturbation.SWAP for s in perturbed)

    def test_swap_is_seeded(self, tmp_path, corpus):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            assert main(["perturb", "--in", str(corpus), "--out", str(out), "--kind", "swap", "--seed", "3"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_backtranslate_offline(self, tmp_path, corpus):
        stub = tmp_path / "words.tsv"
        stub.write_text("# a\tb\nw0\tword0\n", encoding="utf-8")
        out = tmp_path / "bt.jsonl"
        argv = ["perturb", "--in", str(corpus), "--out", str(out), "--kind", "backtranslate"]
        argv += ["--offline-stub", str(stub)]
        assert main(argv) == EXIT_OK
        perturbed = load_corpus(out)
        assert perturbed
        assert all(s.perturbation is Perturbation.BACK_TRANSLATE for s in perturbed)

    def test_backtranslate_without_endpoint(self, tmp_path, corpus):
        argv = ["perturb", "--in", str(corpus), "--out", str(tmp_path / "bt.jsonl"), "--kind", "backtranslate"]
        assert main(argv) == EXIT_VALIDATION


class TestNgrams:
    def test_bigrams(self, tmp_path, corpus):
        out = tmp_path / "ngrams.csv"
        assert main(["ngrams", "--in", str(corpus), "--n", "2", "--top", "3", "--out", str(out)]) == EXIT_OK
        rows = _read_csv(out)
        assert rows[0] == ["ngram", "frequency"]
        assert 1 <= len(rows) - 1 <= 3
        counts = [int(r[1]) for r in rows[1:]]
        assert counts == sorted(counts, reverse=True)


class TestAgree:
    def test_tables_per_source(self, tmp_path, annotations, corpus):
        out, md = tmp_path / "rel.csv", tmp_path / "rel.md"
        argv = ["agree", "--in", str(annotations), "--corpus", str(corpus), "--out", str(out), "--markdown", str(md)]
        assert main(argv) == EXIT_OK
        header = _read_csv(out)[0]
        assert header[0] == "disagreement"
        for name in ("gcm", "osn", "all"):
            assert f"{name}_icc1k" in header
        assert md.read_text(encoding="utf-8").startswith("| Disagreement |")


class TestSplitTrainEval:
    def test_split_files(self, splits):
        for name in ("train", "dev", "test", "split"):
            assert (splits / f"{name}.csv").is_file()
        assignment = _read_csv(splits / "split.csv")
        assert assignment[0] == ["id", "split"]
        assert len(assignment) - 1 == 60
        counts = {s: sum(1 for r in assignment[1:] if r[1] == s) for s in ("train", "dev", "test")}
        assert counts == {"train": 42, "dev": 6, "test": 12}
        assert "average" in _read_csv(splits / "train.csv")[0]

    def test_train_eval_baseline(self, tmp_path, splits, annotations, capsys):
        model = tmp_path / "model.cmlab"
        history = tmp_path / "history.csv"
        argv = ["train", "--features", str(splits / "train.csv"), "--dev", str(splits / "dev.csv")]
        argv += ["--out", str(model), "--history-out", str(history), *_FAST]
        assert main(argv) == EXIT_OK
        assert model.is_file()
        assert _read_csv(history)[0] == ["epoch", "train_loss", "dev_rmse", "best_dev_rmse"]
        assert "best dev rmse=" in capsys.readouterr().out

        preds = tmp_path / "preds.csv"
        argv = ["eval", "--model", str(model), "--features", str(splits / "test.csv"), "--predictions-out", str(preds)]
        assert main(argv) == EXIT_OK
        assert "model: rmse=" in capsys.readouterr().out
        assert len(_read_csv(preds)) - 1 == 12

        assert main(["baseline", "--kind", "random", "--features", str(splits / "test.csv")]) == EXIT_OK
        assert capsys.readouterr().out.startswith("random: rmse=")
        assert main(["baseline", "--kind", "human", "--ratings", str(annotations)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("human: rmse=")

    def test_baseline_needs_inputs(self):
        assert main(["baseline", "--kind", "random"]) == EXIT_VALIDATION
        assert main(["baseline", "--kind", "human"]) == EXIT_VALIDATION

    def test_eval_rejects_corrupt_model(self, tmp_path, splits):
        model = tmp_path / "model.cmlab"
        model.write_bytes(b"not a model")
        assert main(["eval", "--model", str(model), "--features", str(splits / "test.csv")]) == EXIT_VALIDATION

    def test_features_need_average(self, tmp_path, metrics):
        argv = ["train", "--features", str(metrics), "--dev", str(metrics), "--out", str(tmp_path / "m.cmlab")]
        assert main(argv) == EXIT_VALIDATION


class TestFertility:
    def test_segmenter_file(self, tmp_path, corpus, capsys):
        seg = tmp_path / "seg.py"
        seg.write_text("def pieces(word):\n    return 2\n", encoding="utf-8")
        out = tmp_path / "fertility.csv"
        assert main(["fertility", "--in", str(corpus), "--segmenter", f"{seg}:pieces", "--out", str(out)]) == EXIT_OK
        printed = capsys.readouterr().out.splitlines()
        assert printed[0] == "all: fertility=2.0000"
        assert _read_csv(out)[1] == ["all", "2.000000"]

    def test_bad_segmenter_spec(self):
        with pytest.raises(CmlabError):
            load_segmenter("no_colon_here")

    def test_missing_attribute(self, tmp_path):
        seg = tmp_path / "seg.py"
        seg.write_text("VALUE = 1\n", encoding="utf-8")
        with pytest.raises(CmlabError, match="not a callable"):
            load_segmenter(f"{seg}:VALUE")

    def test_missing_file_is_io_error(self, tmp_path, corpus):
        argv = ["fertility", "--in", str(corpus), "--segmenter", f"{tmp_path / 'nope.py'}:pieces"]
        assert main(argv) == EXIT_IO


class TestAnalyze:
    def test_with_predictions(self, tmp_path, metrics, annotations, corpus):
        preds = tmp_path / "preds.csv"
        lines = ["id,prediction,truth"] + [f"s{i:02d},3.0,{sum(_ratings(i)) / 3!r}" for i in range(20)]
        preds.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "analysis.md"
        argv = ["analyze", "--metrics", str(metrics), "--ratings", str(annotations), "--corpus", str(corpus)]
        argv += ["--predictions", str(preds), "--out", str(out)]
        assert main(argv) == EXIT_OK
        text = out.read_text(encoding="utf-8")
        for heading in ("## Correlations", "## Perturbation impact", "## Error analysis"):
            assert heading in text
        for sibling in ("analysis_ratings.svg", "analysis_disagreement.svg", "analysis_errors.svg"):
            assert (tmp_path / sibling).is_file()
        assert _read_csv(tmp_path / "analysis_correlations.csv")[0][:2] == ["feature", "target"]

    def test_dataset_statistics_per_source(self, tmp_path, metrics, annotations, corpus):
        out = tmp_path / "analysis.md"
        argv = ["analyze", "--metrics", str(metrics), "--ratings", str(annotations), "--corpus", str(corpus)]
        assert main(argv + ["--out", str(out)]) == EXIT_OK
        text = out.read_text(encoding="utf-8")
        assert "## Dataset statistics" in text
        for group, count in (("gcm", 30), ("osn", 30), ("all", 60)):
            assert f"| {group} | {count} |" in text
            for metric in ("cmi", "switch_points", "burstiness", "symcom"):
                chart = tmp_path / f"analysis_{group}_{metric}.svg"
                assert chart.read_text(encoding="utf-8").startswith("<svg")

    def test_statistics_without_corpus_cover_all_rows(self, tmp_path, metrics, annotations):
        out = tmp_path / "analysis.md"
        argv = ["analyze", "--metrics", str(metrics), "--ratings", str(annotations), "--out", str(out)]
        assert main(argv) == EXIT_OK
        assert "| all | 60 |" in out.read_text(encoding="utf-8")
        assert (tmp_path / "analysis_all_cmi.svg").is_file()
        assert not (tmp_path / "analysis_gcm_cmi.svg").exists()

    def test_mismatched_ids(self, tmp_path, metrics):
        ratings = tmp_path / "other.csv"
        ratings.write_text("sample_id,r1,r2,r3\nzz,1,2,3\n", encoding="utf-8")
        argv = ["analyze", "--metrics", str(metrics), "--ratings", str(ratings), "--out", str(tmp_path / "a.md")]
        assert main(argv) == EXIT_VALIDATION


@pytest.mark.slow
class TestReport:
    def test_pipeline(self, tmp_path, corpus, write_corpus):
        foreign = write_corpus(_records(20, prefix="f"), "foreign.jsonl")
        out_dir = tmp_path / "report"
        argv = ["report", "--corpus", str(corpus), "--out-dir", str(out_dir), "--transfer-corpus", str(foreign)]
        assert main(argv + _FAST) == EXIT_OK
        text = (out_dir / "report.md").read_text(encoding="utf-8")
        assert text.startswith("# cmlab report")
        assert f"cmlab {__version__}" in text
        assert "epochs=5" in text
        headings = ("Inter-annotator agreement", "Dataset statistics", "Acceptability prediction")
        for heading in headings + ("Transfer evaluation",):
            assert heading in text
        for name in ("metrics.csv", "reliability.csv", "gcm_predictions.csv", "all_model.cmlab", "all_errors.svg"):
            assert (out_dir / name).is_file()
        for name in ("report_gcm_cmi.svg", "report_osn_symcom.svg", "report_all_burstiness.svg"):
            assert (out_dir / name).is_file()

    def test_deterministic(self, tmp_path, corpus):
        a, b = tmp_path / "a", tmp_path / "b"
        for out_dir in (a, b):
            assert main(["report", "--corpus", str(corpus), "--out-dir", str(out_dir), *_FAST]) == EXIT_OK
        assert _without_paths(a / "report.md") == _without_paths(b / "report.md")
        assert (a / "all_predictions.csv").read_bytes() == (b / "all_predictions.csv").read_bytes()

    def test_no_annotations(self, tmp_path, write_corpus):
        bare = write_corpus(_records(ratings=False), "bare.jsonl")
        assert main(["report", "--corpus", str(bare), "--out-dir", str(tmp_path / "r")]) == EXIT_VALIDATION
