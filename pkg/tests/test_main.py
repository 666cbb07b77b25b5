"""CLI tests through typer's CliRunner."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from unittest.mock import patch

import pytest
from typer.testing import CliRunner

from hintfix.catalog import load_catalog_file
from hintfix.main import app, run
from hintfix.synth import DEFAULT_CARRIERS, CorruptionModel, generate_records, write_records

runner = CliRunner()

UNREACHABLE = "http://127.0.0.1:9/complete"


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)


# ── build-index ──────────────────────────────────────────────────────────────


class TestBuildIndex:
    def test_writes_index(self, catalog_path: Path, tmp_path: Path) -> None:
        out = tmp_path / "catalog.anix"
        result = runner.invoke(app, ["build-index", str(catalog_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "Indexed 8 entities" in result.output
        assert out.read_bytes()[:4] == b"ANIX"

    def test_bad_catalog_is_data_error(self, tmp_path: Path) -> None:
        bad = tmp_path / "bad.txt"
        bad.write_bytes(b"Drake\n\xff\n")
        result = runner.invoke(app, ["build-index", str(bad), "--out", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "line 2" in result.output


# ── correct ──────────────────────────────────────────────────────────────────


class TestCorrect:
    def test_stdin_to_stdout(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app,
            ["correct", "--catalog", str(catalog_path)],
            input="play the weekend\nWhat time is it?\n",
        )
        assert result.exit_code == 0, result.output
        assert result.stdout == "play The Weeknd\nWhat time is it?\n"

    def test_file_to_file(self, catalog_path: Path, tmp_path: Path) -> None:
        source = tmp_path / "hyps.txt"
        source.write_text("play the weekend\nplay drake\n", encoding="utf-8")
        out = tmp_path / "out.txt"
        result = runner.invoke(
            app, ["correct", str(source), "--catalog", str(catalog_path), "-o", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert out.read_text(encoding="utf-8") == "play The Weeknd\nplay drake\n"

    def test_prebuilt_index(self, catalog_path: Path, tmp_path: Path) -> None:
        index = tmp_path / "catalog.anix"
        runner.invoke(app, ["build-index", str(catalog_path), "--out", str(index)])
        result = runner.invoke(
            app,
            ["correct", "--catalog", str(catalog_path), "--index", str(index)],
            input="play the weekend\n",
        )
        assert result.stdout == "play The Weeknd\n"

    def test_records(self, catalog_path: Path, tmp_path: Path) -> None:
        source = tmp_path / "records.jsonl"
        source.write_text(
            json.dumps(
                {"id": "a", "reference": "play the weeknd", "hypothesis": "play the weekend"}
            )
            + "\n",
            encoding="utf-8",
        )
        result = runner.invoke(
            app, ["correct", str(source), "--records", "--catalog", str(catalog_path)]
        )
        assert result.exit_code == 0, result.output
        record = json.loads(result.stdout)
        assert record == {
            "id": "a",
            "reference": "play the weeknd",
            "hypothesis": "play The Weeknd",
            "subset": "synthetic",
        }

    def test_explain_simple(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app,
            ["--simple", "correct", "--explain", "--catalog", str(catalog_path)],
            input="play the weekend\n",
        )
        assert result.exit_code == 0, result.output
        lines = result.stdout.splitlines()
        assert lines[0] == "play The Weeknd"
        assert lines[1] == "hypothesis\tcontext\tcorrected\tsubstitutions\terror"
        assert lines[2].startswith(
            "play the weekend\t[H] The Weeknd [A] play the weekend [P]\tplay The Weeknd\t"
        )

    def test_entity_and_query_hints(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app,
            [
                "--simple",
                "correct",
                "--explain",
                "--include-query",
                "--catalog",
                str(catalog_path),
            ],
            input="play the weekend\n",
        )
        assert "[H] the weekend :: The Weeknd" in result.stdout

    def test_missing_catalog(self) -> None:
        result = runner.invoke(app, ["correct"], input="play drake\n")
        assert result.exit_code == 1
        assert "No catalog configured" in result.output

    def test_catalog_from_config_file(self, catalog_path: Path, tmp_path: Path) -> None:
        (tmp_path / ".hintfix.env").write_text(
            f"HINTFIX_CATALOG_PATH={catalog_path}\n", encoding="utf-8"
        )
        result = runner.invoke(app, ["correct"], input="play the weekend\n")
        assert result.stdout == "play The Weeknd\n"

    def test_invalid_option_value(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app, ["correct", "--catalog", str(catalog_path), "--r-max", "0"], input="x\n"
        )
        assert result.exit_code == 1
        assert "Invalid configuration" in result.output

    def test_remote_failure_passes_through(self, catalog_path: Path) -> None:
        with patch("hintfix.transport.time.sleep"):
            result = runner.invoke(
                app,
                [
                    "correct",
                    "--catalog",
                    str(catalog_path),
                    "--corrector",
                    "remote",
                    "--endpoint",
                    UNREACHABLE,
                    "--timeout",
                    "2",
                ],
                input="play the weekend\n",
            )
        assert result.exit_code == 0, result.output
        assert result.stdout.splitlines()[-1] == "play the weekend"

    def test_remote_failure_strict(self, catalog_path: Path) -> None:
        with patch("hintfix.transport.time.sleep"):
            result = runner.invoke(
                app,
                [
                    "correct",
                    "--strict",
                    "--catalog",
                    str(catalog_path),
                    "--corrector",
                    "remote",
                    "--endpoint",
                    UNREACHABLE,
                ],
                input="play the weekend\n",
            )
        assert result.exit_code == 3


# ── retrieve ─────────────────────────────────────────────────────────────────


class TestRetrieve:
    def test_simple_output(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app,
            ["--simple", "retrieve", "play the weekend", "-k", "2", "--catalog", str(catalog_path)],
        )
        assert result.exit_code == 0, result.output
        lines = result.stdout.splitlines()
        assert lines[0] == "query\tspan\trank\tentity_id\tentity\tdistance\tkind"
        assert lines[1].startswith("the weekend\t1-3\t1\t0\tThe Weeknd\t")
        assert lines[1].endswith("\tdense")
        assert len(lines) == 3

    def test_bm25(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app,
            [
                "--simple",
                "retrieve",
                "play the weekend",
                "--retriever",
                "bm25",
                "--catalog",
                str(catalog_path),
            ],
        )
        assert result.exit_code == 0, result.output
        assert result.stdout.splitlines()[1].endswith("\tbm25")

    def test_invalid_k(self, catalog_path: Path) -> None:
        result = runner.invoke(
            app, ["retrieve", "play drake", "-k", "0", "--catalog", str(catalog_path)]
        )
        assert result.exit_code != 0


# ── synth / experiment ──────────────────────────────────────────────────────


class TestSynth:
    def test_generated_catalog(self, tmp_path: Path) -> None:
        args = [
            "synth",
            str(tmp_path / "records.jsonl"),
            "--entities",
            "50",
            "--catalog-out",
            str(tmp_path / "catalog.tsv"),
            "--records",
            "20",
            "--seed",
            "3",
        ]
        result = runner.invoke(app, args)
        assert result.exit_code == 0, result.output
        first = (tmp_path / "records.jsonl").read_bytes()
        assert len(first.splitlines()) == 20
        assert len((tmp_path / "catalog.tsv").read_text(encoding="utf-8").splitlines()) == 50

        runner.invoke(app, args)
        assert (tmp_path / "records.jsonl").read_bytes() == first

    def test_existing_catalog_and_carriers(self, catalog_path: Path, tmp_path: Path) -> None:
        carriers = tmp_path / "carriers.txt"
        carriers.write_text("play {entity} now\n", encoding="utf-8")
        out = tmp_path / "records.jsonl"
        result = runner.invoke(
            app,
            [
                "synth",
                str(out),
                "--catalog",
                str(catalog_path),
                "--carriers",
                str(carriers),
                "--records",
                "5",
                "--p-err",
                "0",
                "--subset",
                "head",
            ],
        )
        assert result.exit_code == 0, result.output
        for line in out.read_text(encoding="utf-8").splitlines():
            record = json.loads(line)
            assert record["reference"] == record["hypothesis"]
            assert record["reference"].endswith(" now")
            assert record["subset"] == "head"

    def test_homophones_from_config_file(self, catalog_path: Path, tmp_path: Path) -> None:
        lexicon = tmp_path / "homophones.tsv"
        lexicon.write_text("no tab here\n", encoding="utf-8")
        (tmp_path / ".hintfix.env").write_text(
            f"HINTFIX_HOMOPHONES_PATH={lexicon}\n", encoding="utf-8"
        )
        args = ["synth", str(tmp_path / "r.jsonl"), "--catalog", str(catalog_path)]

        result = runner.invoke(app, args)

        assert result.exit_code == 2
        assert "from<TAB>to" in result.output

    def test_homophones_flag_wins_over_config(self, catalog_path: Path, tmp_path: Path) -> None:
        (tmp_path / ".hintfix.env").write_text(
            f"HINTFIX_HOMOPHONES_PATH={tmp_path / 'missing.tsv'}\n", encoding="utf-8"
        )
        lexicon = tmp_path / "homophones.tsv"
        lexicon.write_text("weeknd\tweekend\n", encoding="utf-8")
        args = [
            "synth",
            str(tmp_path / "r.jsonl"),
            "--catalog",
            str(catalog_path),
            "--homophones",
            str(lexicon),
            "--records",
            "5",
        ]

        result = runner.invoke(app, args)

        assert result.exit_code == 0, result.output

    def test_needs_a_catalog(self, tmp_path: Path) -> None:
        result = runner.invoke(app, ["synth", str(tmp_path / "r.jsonl")])
        assert result.exit_code == 1

    def test_invalid_p_err(self, catalog_path: Path, tmp_path: Path) -> None:
        result = runner.invoke(
            app,
            ["synth", str(tmp_path / "r.jsonl"), "--catalog", str(catalog_path), "--p-err", "2"],
        )
        assert result.exit_code == 1
        assert "p_err" in result.output


class TestExperiment:
    def test_reports(self, catalog_path: Path, tmp_path: Path) -> None:
        records = generate_records(
            load_catalog_file(catalog_path), DEFAULT_CARRIERS, 12, CorruptionModel(seed=1)
        )
        records_path = tmp_path / "records.jsonl"
        write_records(records_path, records)

        args = ["--simple", "experiment", str(records_path), "--catalog", str(catalog_path)]
        first = runner.invoke(app, [*args, "--out-dir", str(tmp_path / "a")])
        assert first.exit_code == 0, first.output
        runner.invoke(app, [*args, "--out-dir", str(tmp_path / "b")])

        for name in ("report.json", "recall.tsv", "wer.tsv", "r_max.tsv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

        wer_lines = (tmp_path / "a" / "wer.tsv").read_text(encoding="utf-8").splitlines()
        assert wer_lines[0].startswith("method\tall WER\tall rel. reduction")
        assert wer_lines[1].startswith("No correction\t")
        assert wer_lines[2].startswith("No hints\t")
        assert len(wer_lines) == 1 + 2 + 3 * 3 * 2 * 2
        recall_lines = (tmp_path / "a" / "recall.tsv").read_text(encoding="utf-8").splitlines()
        assert len(recall_lines) == 1 + 3 * 3
        assert any(line.startswith("phonetic/template\t") for line in recall_lines)
        r_max_lines = (tmp_path / "a" / "r_max.tsv").read_text(encoding="utf-8").splitlines()
        assert r_max_lines[0] == "method\tall WER change"
        assert len(r_max_lines) == 1 + 3 * 3 * 2
        assert r_max_lines[1].startswith("dense/all_ngrams query=off r_max=1->5\t")

    def test_missing_records(self, catalog_path: Path, tmp_path: Path) -> None:
        result = runner.invoke(
            app, ["experiment", str(tmp_path / "none.jsonl"), "--catalog", str(catalog_path)]
        )
        assert result.exit_code == 2


# ── entry point ──────────────────────────────────────────────────────────────


class TestRun:
    def test_usage_error_exits_1(
        self, catalog_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setattr(
            sys,
            "argv",
            ["hintfix", "retrieve", "play drake", "-k", "0", "--catalog", str(catalog_path)],
        )
        with pytest.raises(SystemExit) as exc_info:
            run()
        assert exc_info.value.code == 1

    def test_unknown_option_exits_1(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(sys, "argv", ["hintfix", "correct", "--no-such-flag"])
        with pytest.raises(SystemExit) as exc_info:
            run()
        assert exc_info.value.code == 1

    def test_unknown_option_prints_usage_message(
        self, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
    ) -> None:
        monkeypatch.setattr(sys, "argv", ["hintfix", "retrieve", "x", "--no-such-flag"])
        with pytest.raises(SystemExit):
            run()
        err = capsys.readouterr().err
        assert "--no-such-flag" in err
        assert "Traceback" not in err

    def test_data_error_exit_code(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(
            sys, "argv", ["hintfix", "experiment", str(tmp_path / "none.jsonl"), "--catalog", "x"]
        )
        with pytest.raises(SystemExit) as exc_info:
            run()
        assert exc_info.value.code == 2

    def test_success_exits_0(self, catalog_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(
            sys,
            "argv",
            ["hintfix", "--simple", "retrieve", "play drake", "--catalog", str(catalog_path)],
        )
        with pytest.raises(SystemExit) as exc_info:
            run()
        assert exc_info.value.code == 0
