"""End-to-end runs of the command-line client against the in-process app."""
import json
import pathlib

import pytest
from click.testing import CliRunner

from discoursegen.cli import main
from discoursegen.corpus import read_jsonl, write_jsonl
from discoursegen.schema import load_schema, load_schema_from_file

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def runner():
    return CliRunner()


def invoke_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def news_inputs():
    sequences = [
        ["main_event", "consequence", "journalist_evaluation"],
        ["main_event", "main_event", "current_context", "anecdotal_event"],
    ]
    return [
        {"id": f"a{k}", "input": {"headline": f"Headline {k}"},
         "control_sequence": seq}
        for k, seq in enumerate(sequences)
    ]


def news_reference():
    records = []
    for row in news_inputs():
        labels = row["control_sequence"]
        records.append({
            "id": row["id"], "domain": "news", "input": row["input"],
            "units": [f"Reference sentence {i}." for i in range(len(labels))],
            "labels": labels, "source": "gold",
        })
    return records


class TestSchemaExport:
    def test_round_trip(self, runner, tmp_path):
        out = tmp_path / "news_schema.json"
        result = invoke_ok(runner, ["schema", "export", "--domain", "news",
                                    "--out", str(out)])
        assert "wrote 8 roles" in result.output
        assert load_schema_from_file(out) == load_schema("news")


class TestCorpusChain:
    def test_preprocess_to_sft(self, runner, tmp_path):
        clean = tmp_path / "clean.jsonl"
        rejects = tmp_path / "rejects.jsonl"
        result = invoke_ok(runner, [
            "preprocess", "--domain", "recipe",
            "--in", str(FIXTURES / "recipe_raw.jsonl"),
            "--out", str(clean), "--rejects", str(rejects),
        ])
        assert "accepted 7, rejected 5" in result.output
        assert all(r["reasons"] for r in read_jsonl(rejects))

        labeled = tmp_path / "labeled.jsonl"
        config = write_config(tmp_path, "recipe.json", {"domain": "recipe"})
        invoke_ok(runner, ["label", "--config", config,
                           "--in", str(clean), "--out", str(labeled)])
        rows = read_jsonl(labeled)
        assert all(r["source"] == "rule" for r in rows)
        assert all(len(r["labels"]) == len(r["units"]) for r in rows)

        pairs = tmp_path / "sft.jsonl"
        invoke_ok(runner, ["sft-export", "--config", config,
                           "--in", str(labeled), "--out", str(pairs)])
        assert len(read_jsonl(pairs)) == sum(len(r["units"]) for r in rows)

    def test_missing_config_is_a_clean_error(self, runner, tmp_path):
        result = runner.invoke(main, [
            "label", "--config", str(tmp_path / "nope.json"),
            "--in", str(FIXTURES / "recipe_raw.jsonl"),
            "--out", str(tmp_path / "out.jsonl"),
        ])
        assert result.exit_code != 0


class TestGenerateEvaluateReport:
    def test_full_chain(self, runner, tmp_path):
        inputs = tmp_path / "inputs.jsonl"
        write_jsonl(news_inputs(), inputs)
        reference = tmp_path / "reference.jsonl"
        write_jsonl(news_reference(), reference)
        gen_config = write_config(tmp_path, "gen.json", {"domain": "news"})
        eval_config = write_config(tmp_path, "eval.json", {
            "domain": "news", "classifier": {"kind": "echo"},
        })

        generated = tmp_path / "generated.jsonl"
        result = invoke_ok(runner, ["generate", "--config", gen_config,
                                    "--in", str(inputs), "--out", str(generated)])
        assert "generated 2, failed 0" in result.output
        outputs = read_jsonl(generated)
        assert [o["control_sequence"] for o in outputs] == \
            [r["control_sequence"] for r in news_inputs()]

        # same config and inputs must reproduce the identical file
        second = tmp_path / "generated2.jsonl"
        invoke_ok(runner, ["generate", "--config", gen_config,
                           "--in", str(inputs), "--out", str(second)])
        assert second.read_bytes() == generated.read_bytes()

        report_path = tmp_path / "report.json"
        bins_path = tmp_path / "bins.csv"
        result = invoke_ok(runner, [
            "evaluate", "--config", eval_config,
            "--reference", str(reference), "--generated", str(generated),
            "--report", str(report_path), "--bins", str(bins_path),
        ])
        assert "pos_divergence=0.000000 exact_match=1.0000" in result.output
        report = json.loads(report_path.read_text())
        assert report["metrics"]["exact_match"] == 1.0
        assert bins_path.read_text().startswith("block,role,bin_0")

        image = tmp_path / "heatmap.svg"
        invoke_ok(runner, ["report", "--heatmap", str(bins_path),
                           "--out", str(image)])
        assert image.read_text(encoding="utf-8")[:500].count("<svg") == 1

    def test_generate_failures_exit_nonzero(self, runner, tmp_path):
        inputs = tmp_path / "inputs.jsonl"
        write_jsonl([
            {"id": "ok", "input": {"headline": "H"},
             "control_sequence": ["main_event"]},
            {"id": "bad", "input": {"headline": "H"},
             "control_sequence": ["not_a_role"]},
        ], inputs)
        config = write_config(tmp_path, "gen.json", {"domain": "news"})
        failures = tmp_path / "failures.jsonl"

        result = runner.invoke(main, [
            "generate", "--config", config, "--in", str(inputs),
            "--out", str(tmp_path / "out.jsonl"), "--failures", str(failures),
        ])
        assert result.exit_code == 1
        assert "generated 1, failed 1" in result.stdout
        assert "bad:" in result.stderr
        rows = read_jsonl(failures)
        assert rows[0]["id"] == "bad" and "error" in rows[0]

    def test_evaluate_misalignment_surfaces_status(self, runner, tmp_path):
        reference = tmp_path / "reference.jsonl"
        write_jsonl(news_reference()[:1], reference)
        inputs = tmp_path / "inputs.jsonl"
        write_jsonl(news_inputs(), inputs)
        gen_config = write_config(tmp_path, "gen.json", {"domain": "news"})
        eval_config = write_config(tmp_path, "eval.json", {
            "domain": "news", "classifier": {"kind": "echo"},
        })
        generated = tmp_path / "generated.jsonl"
        invoke_ok(runner, ["generate", "--config", gen_config,
                           "--in", str(inputs), "--out", str(generated)])

        result = runner.invoke(main, [
            "evaluate", "--config", eval_config,
            "--reference", str(reference), "--generated", str(generated),
            "--report", str(tmp_path / "report.json"),
        ])
        assert result.exit_code != 0
        assert "400" in result.stderr
