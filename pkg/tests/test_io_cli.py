import json

import numpy as np
import pytest

from edcr import (
    ClassSet,
    ContractError,
    CorrectionRule,
    DataError,
    DetectionRule,
    RuleSet,
    UNKNOWN_NAME,
    apply_ruleset,
    generate_synthetic,
)
from edcr import io
from edcr.cli import main
from helpers import make_conds, make_table


class TestPredictionsFormat:
    def test_roundtrip_with_gt(self, tmp_path):
        table = make_table(["a", "b"], ["a", "b", UNKNOWN_NAME], ["a", "novel", "b"])
        path = tmp_path / "p.csv"
        io.write_predictions(path, table)
        back = io.read_predictions(path, classes=table.classes)
        assert back == table

    def test_roundtrip_without_gt(self, tmp_path):
        table = make_table(["a", "b"], ["a", "b"])
        path = tmp_path / "p.csv"
        io.write_predictions(path, table)
        back = io.read_predictions(path)
        assert back == table

    def test_classes_inferred_sorted(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("sample_id,pred\nx,zebra\ny,ant\n")
        table = io.read_predictions(path)
        assert table.classes.names == ("ant", "zebra")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("id,prediction\nx,a\n")
        with pytest.raises(DataError, match=":1:"):
            io.read_predictions(path)

    def test_duplicate_ids(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("sample_id,pred\nx,a\nx,a\n")
        with pytest.raises(DataError, match="duplicate"):
            io.read_predictions(path)

    def test_field_count_line_number(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("sample_id,pred,gt\nx,a,a\ny,a\n")
        with pytest.raises(DataError, match=":3:"):
            io.read_predictions(path)

    def test_declared_classes_enforced(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("sample_id,pred\nx,mystery\n")
        with pytest.raises(ContractError, match="mystery"):
            io.read_predictions(path, classes=ClassSet(("a",)))


class TestConditionsFormat:
    def test_roundtrip(self, tmp_path):
        table = make_table(["a"], ["a", "a"], ids=["s1", "s2"])
        conds = make_conds(["c1", "c2"], [[1, 0], [0, 1]])
        path = tmp_path / "c.csv"
        io.write_conditions(path, table, conds)
        back = io.read_conditions(path, table)
        assert back.condition_names == conds.condition_names
        assert np.array_equal(back.values, conds.values)

    def test_row_order_follows_table(self, tmp_path):
        table = make_table(["a"], ["a", "a"], ids=["s1", "s2"])
        path = tmp_path / "c.csv"
        path.write_text("sample_id,c\ns2,1\ns1,0\n")
        back = io.read_conditions(path, table)
        assert back.column("c").tolist() == [False, True]


class TestTrajectoriesFormat:
    def test_roundtrip(self, tmp_path):
        corpus = generate_synthetic(seed=1, n_samples=5, noise=0.2)
        path = tmp_path / "t.csv"
        io.write_trajectories(path, corpus.records)
        back = io.read_trajectories(path)
        assert len(back) == 5
        for orig, loaded in zip(corpus.records, back):
            assert loaded.sample_id == orig.sample_id
            assert loaded.points == orig.points  # repr round-trips floats exactly

    def test_bad_idx_sequence(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("sample_id,idx,t,lat,lon\na,0,0,0,0\na,2,1,0,0\n")
        with pytest.raises(DataError, match=":3:"):
            io.read_trajectories(path)

    def test_non_contiguous_sample(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(
            "sample_id,idx,t,lat,lon\n"
            "a,0,0,0,0\na,1,1,0,0\n"
            "b,0,0,0,0\nb,1,1,0,0\n"
            "a,0,5,0,0\na,1,6,0,0\n"
        )
        with pytest.raises(DataError, match="contiguous"):
            io.read_trajectories(path)


def sample_ruleset():
    classes = ClassSet(("a", "b"))
    a, b = classes.labels
    return RuleSet(
        classes=classes,
        condition_names=("c1", "c2"),
        epsilon=0.1,
        detection_rules=(DetectionRule(a, ("c1", "c2"), 0.25, 0.75),),
        correction_rules=(CorrectionRule(b, (("c1", a),), 0.125, 0.9),),
    )


class TestRulesetFormat:
    def test_roundtrip_identity(self, tmp_path):
        rule_set = sample_ruleset()
        path = tmp_path / "rules.yaml"
        io.save_ruleset(path, rule_set)
        assert io.load_ruleset(path) == rule_set

    def test_roundtrip_per_class_epsilon(self, tmp_path):
        rule_set = sample_ruleset()
        import dataclasses

        mapped = dataclasses.replace(rule_set, epsilon={"a": 0.1, "b": 0.2})
        path = tmp_path / "rules.yaml"
        io.save_ruleset(path, mapped)
        assert io.load_ruleset(path) == mapped

    def test_bad_version(self, tmp_path):
        path = tmp_path / "rules.yaml"
        path.write_text("format_version: 99\nclasses: [a]\nconditions: []\nepsilon: 0.1\n")
        with pytest.raises(DataError, match="version"):
            io.load_ruleset(path)

    def test_not_yaml(self, tmp_path):
        path = tmp_path / "rules.yaml"
        path.write_text("{unbalanced")
        with pytest.raises(DataError):
            io.load_ruleset(path)

    def test_apply_identical_after_roundtrip(self, tmp_path):
        rule_set = sample_ruleset()
        path = tmp_path / "rules.yaml"
        io.save_ruleset(path, rule_set)
        loaded = io.load_ruleset(path)
        table = make_table(["a", "b"], ["a", "a", "b"])
        conds = make_conds(["c1", "c2"], [[1, 0, 1], [0, 1, 0]])
        before, _ = apply_ruleset(rule_set, table, conds)
        after, _ = apply_ruleset(loaded, table, conds)
        assert before.predicted == after.predicted


class TestTraceFormat:
    def test_roundtrip(self, tmp_path):
        table = make_table(["a", "b"], ["a", "a", "b"])
        conds = make_conds(["c1", "c2"], [[1, 0, 1], [1, 1, 0]])
        _, trace = apply_ruleset(sample_ruleset(), table, conds)
        path = tmp_path / "trace.csv"
        io.write_trace(path, trace)
        assert io.read_trace(path) == trace


def run(argv):
    return main([str(part) for part in argv])


def gen_corpus(tmp_path, seed=3, samples=300, noise=0.25, holdout=""):
    out = tmp_path / f"corpus{seed}"
    argv = ["gen", "--seed", seed, "--samples", samples, "--noise", noise, "--out", out]
    if holdout:
        argv += ["--holdout", holdout]
    assert run(argv) == 0
    return out


class TestCli:
    def test_full_pipeline(self, tmp_path, capsys):
        corpus = gen_corpus(tmp_path)
        learn_dir = tmp_path / "learned"
        assert run(
            ["learn", "--predictions", corpus / "predictions.csv", "--conditions",
             corpus / "conditions.csv", "--epsilon", 0.1, "--out", learn_dir]
        ) == 0
        apply_dir = tmp_path / "applied"
        assert run(
            ["apply", "--ruleset", learn_dir / "ruleset.yaml", "--predictions",
             corpus / "predictions.csv", "--conditions", corpus / "conditions.csv",
             "--out", apply_dir]
        ) == 0
        eval_dir = tmp_path / "evaled"
        assert run(
            ["eval", "--predictions", apply_dir / "revised.csv", "--trace",
             apply_dir / "trace.csv", "--mode", "strict", "--out", eval_dir]
        ) == 0
        for out_dir in (corpus, learn_dir, apply_dir, eval_dir):
            manifest = json.loads((out_dir / "manifest.json").read_text())
            for name, digest in manifest["outputs"].items():
                assert io.sha256_file(out_dir / name) == digest
        metrics = (eval_dir / "metrics.csv").read_text()
        assert "error_f1" in metrics

    def test_apply_matches_library_call(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=5)
        learn_dir = tmp_path / "learned"
        run(["learn", "--predictions", corpus / "predictions.csv", "--conditions",
             corpus / "conditions.csv", "--out", learn_dir])
        apply_dir = tmp_path / "applied"
        run(["apply", "--ruleset", learn_dir / "ruleset.yaml", "--predictions",
             corpus / "predictions.csv", "--conditions", corpus / "conditions.csv",
             "--out", apply_dir])
        rule_set = io.load_ruleset(learn_dir / "ruleset.yaml")
        table = io.read_predictions(corpus / "predictions.csv", classes=rule_set.classes)
        conds = io.read_conditions(corpus / "conditions.csv", table)
        revised, _ = apply_ruleset(rule_set, table, conds)
        expected = tmp_path / "expected.csv"
        io.write_predictions(expected, revised)
        assert expected.read_bytes() == (apply_dir / "revised.csv").read_bytes()

    def test_empty_ruleset_apply_is_identity(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=6, samples=50)
        table = io.read_predictions(corpus / "predictions.csv")
        empty = RuleSet(table.classes, (), 0.0)
        ruleset_path = tmp_path / "empty.yaml"
        io.save_ruleset(ruleset_path, empty)
        apply_dir = tmp_path / "applied"
        assert run(["apply", "--ruleset", ruleset_path, "--predictions",
                    corpus / "predictions.csv", "--conditions", corpus / "conditions.csv",
                    "--out", apply_dir]) == 0
        revised = io.read_predictions(apply_dir / "revised.csv", classes=table.classes)
        assert revised.predicted == table.predicted

    def test_epsilon_range_exit_code(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=7, samples=50)
        code = run(["learn", "--predictions", corpus / "predictions.csv", "--conditions",
                    corpus / "conditions.csv", "--epsilon", 1.5, "--out", tmp_path / "x"])
        assert code == 2

    def test_missing_gt_exit_code(self, tmp_path):
        path = tmp_path / "nogt.csv"
        path.write_text("sample_id,pred\nx,a\ny,b\n")
        conds = tmp_path / "c.csv"
        conds.write_text("sample_id,c\nx,1\ny,0\n")
        code = run(["learn", "--predictions", path, "--conditions", conds,
                    "--out", tmp_path / "x"])
        assert code == 2

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sample_id,pred,gt\nx,a,a\ny,b\n")
        conds = tmp_path / "c.csv"
        conds.write_text("sample_id,c\nx,1\n")
        code = run(["learn", "--predictions", bad, "--conditions", conds,
                    "--out", tmp_path / "x"])
        assert code == 3

    def test_missing_condition_column_exit_code(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=8, samples=50)
        learn_dir = tmp_path / "learned"
        run(["learn", "--predictions", corpus / "predictions.csv", "--conditions",
             corpus / "conditions.csv", "--out", learn_dir])
        table = io.read_predictions(corpus / "predictions.csv")
        narrow = tmp_path / "narrow.csv"
        lines = ["sample_id,nothing"] + [f"{s},0" for s in table.sample_ids]
        narrow.write_text("\n".join(lines) + "\n")
        code = run(["apply", "--ruleset", learn_dir / "ruleset.yaml", "--predictions",
                    corpus / "predictions.csv", "--conditions", narrow,
                    "--out", tmp_path / "x"])
        assert code == 2

    def test_sweep_and_unseen_and_verify(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=9, samples=400, holdout="walk,drive")
        sweep_dir = tmp_path / "sweep"
        assert run(["sweep", "--predictions", corpus / "predictions.csv", "--conditions",
                    corpus / "conditions.csv", "--epsilons", "0,0.1",
                    "--out", sweep_dir]) == 0
        assert (sweep_dir / "sweep.csv").exists()
        unseen_dir = tmp_path / "unseen"
        assert run(["unseen", "--predictions", corpus / "predictions.csv", "--conditions",
                    corpus / "conditions.csv", "--holdout", "walk,drive",
                    "--fractions", "0,0.2", "--out", unseen_dir]) == 0
        text = (unseen_dir / "unseen.csv").read_text()
        assert text.startswith("fraction,baseline_accuracy,edcr_accuracy,delta")
        verify_dir = tmp_path / "verify"
        assert run(["verify", "--predictions", corpus / "predictions.csv", "--conditions",
                    corpus / "conditions.csv", "--trials", 200,
                    "--correction-scenarios", 20, "--out", verify_dir]) == 0
        assert (verify_dir / "theorem_report.csv").exists()

    def test_correction_scope_flag(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=14, samples=200)
        learn_dir = tmp_path / "learned"
        run(["learn", "--predictions", corpus / "predictions.csv", "--conditions",
             corpus / "conditions.csv", "--out", learn_dir])
        body_dir, flagged_dir = tmp_path / "body", tmp_path / "flagged"
        for scope, out in (("body", body_dir), ("flagged", flagged_dir)):
            assert run(["apply", "--ruleset", learn_dir / "ruleset.yaml",
                        "--predictions", corpus / "predictions.csv",
                        "--conditions", corpus / "conditions.csv",
                        "--correction-scope", scope, "--out", out]) == 0
        # learner-produced correction bodies sit inside detection bodies,
        # so the two scopes agree on learner output
        assert (body_dir / "revised.csv").read_bytes() == (flagged_dir / "revised.csv").read_bytes()

    def test_eval_novel_aware_mode(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=15, samples=200, holdout="walk,drive")
        learn_dir, apply_dir, eval_dir = tmp_path / "l", tmp_path / "a", tmp_path / "e"
        run(["learn", "--predictions", corpus / "predictions.csv", "--conditions",
             corpus / "conditions.csv", "--out", learn_dir])
        run(["apply", "--ruleset", learn_dir / "ruleset.yaml", "--predictions",
             corpus / "predictions.csv", "--conditions", corpus / "conditions.csv",
             "--out", apply_dir])
        assert run(["eval", "--predictions", apply_dir / "revised.csv",
                    "--mode", "novel-aware", "--out", eval_dir]) == 0
        text = (eval_dir / "metrics.csv").read_text()
        assert "scoring_mode,,novel-aware" in text

    def test_manifest_input_digests(self, tmp_path):
        corpus = gen_corpus(tmp_path, seed=16, samples=100)
        learn_dir = tmp_path / "learned"
        run(["learn", "--predictions", corpus / "predictions.csv", "--conditions",
             corpus / "conditions.csv", "--out", learn_dir])
        manifest = json.loads((learn_dir / "manifest.json").read_text())
        assert manifest["inputs"]["predictions.csv"] == io.sha256_file(corpus / "predictions.csv")
        assert manifest["inputs"]["conditions.csv"] == io.sha256_file(corpus / "conditions.csv")
        assert manifest["command"] == "learn"

    def test_gen_deterministic_digests(self, tmp_path):
        a = gen_corpus(tmp_path, seed=12, samples=80)
        b_dir = tmp_path / "again"
        assert run(["gen", "--seed", 12, "--samples", 80, "--noise", 0.25,
                    "--out", b_dir]) == 0
        for name in ("trajectories.csv", "predictions.csv", "conditions.csv"):
            assert (a / name).read_bytes() == (b_dir / name).read_bytes()
