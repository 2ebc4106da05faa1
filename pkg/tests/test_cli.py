from __future__ import annotations

import json

import pytest

from symtime.cli import main

FACTS = "works_for(Jaroslav Pelikan, Valparaiso University, 1946, 1949)\nworks_for(Jaroslav Pelikan, Concordia Seminary, 1949, 1953)\n"


@pytest.fixture
def facts_file(tmp_path):
    path = tmp_path / "pelikan.facts"
    path.write_text(FACTS, encoding="utf-8")
    return path


@pytest.fixture
def two_items(tmp_path, fixtures):
    rows = [line for line in (fixtures / "bench20.jsonl").read_text(encoding="utf-8").splitlines() if line][:2]
    path = tmp_path / "two.jsonl"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def lines(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


class TestParse:
    def test_ok(self, facts_file, capsys):
        assert main(["parse", str(facts_file)]) == 0
        assert capsys.readouterr().out == FACTS

    def test_format(self, facts_file, capsys):
        assert main(["parse", str(facts_file), "--format", "fol"]) == 0
        assert capsys.readouterr().out.startswith("holds(works_for, Jaroslav Pelikan")

    def test_bad_line(self, tmp_path, capsys):
        path = tmp_path / "bad.facts"
        path.write_text(FACTS + "works_for(A, B, 2001)\n", encoding="utf-8")
        assert main(["parse", str(path)]) == 1
        out, err = capsys.readouterr()
        assert out == FACTS and "4 arguments" in err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["parse", str(tmp_path / "nope.facts")]) == 2


class TestQuery:
    def test_before(self, facts_file, capsys):
        code = main(["query", str(facts_file), "--kind", "before", "--subject", "Jaroslav Pelikan", "--ref", "Concordia Seminary"])
        assert code == 0 and capsys.readouterr().out == "Valparaiso University\n"

    def test_range(self, facts_file, capsys):
        assert main(["query", str(facts_file), "--from", "1947", "--to", "1948"]) == 0
        assert capsys.readouterr().out == "works_for(Jaroslav Pelikan, Valparaiso University, 1946, 1949)\n"

    def test_all_facts_for_subject(self, facts_file, capsys):
        assert main(["query", str(facts_file), "--subject", "jaroslav pelikan"]) == 0
        assert capsys.readouterr().out == FACTS

    def test_no_match(self, facts_file):
        assert main(["query", str(facts_file), "--subject", "Jessica Valenti"]) == 1

    def test_before_needs_reference(self, facts_file, capsys):
        assert main(["query", str(facts_file), "--kind", "before"]) == 1
        assert "reference" in capsys.readouterr().err

    def test_unknown_reference(self, facts_file):
        assert main(["query", str(facts_file), "--kind", "after", "--ref", "Yale"]) == 1


class TestRun:
    def test_mock_run(self, two_items, fixtures, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--out", str(out), "--num-runs", "1"])
        assert code == 0
        assert sorted(p["id"] for p in lines(out / "predictions.jsonl")) == ["easy-1", "easy-2"]
        assert len(list((out / "traces").glob("*.json"))) == 2
        report = json.loads((out / "report.json").read_text())
        assert report["runs"] == 2 and report["answers_parsed"] == 2 and report["failures"] == []
        assert "TimeQA-Easy" in capsys.readouterr().out

    def test_resume_skips_checkpointed(self, two_items, fixtures, tmp_path, capsys):
        out = tmp_path / "out"
        args = ["run", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--out", str(out), "--num-runs", "1"]
        (out).mkdir()
        (out / "checkpoint.txt").write_text("easy-1\n")
        assert main(args) == 0
        assert [p["id"] for p in lines(out / "predictions.jsonl")] == ["easy-2"]
        assert "skipped: 1" in capsys.readouterr().out
        assert main(args) == 0
        assert len(lines(out / "predictions.jsonl")) == 1
        assert main(args + ["--fresh"]) == 0
        assert len(lines(out / "predictions.jsonl")) == 2

    def test_symbolic_only_makes_no_calls(self, two_items, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        out = tmp_path / "out"
        assert main(["run", str(two_items), "--mock", str(empty), "--out", str(out), "--ablation", "symbolic_only"]) == 0
        for path in (out / "traces").glob("*.json"):
            assert json.loads(path.read_text())["calls"] == []
        assert len(lines(out / "predictions.jsonl")) == 6

    def test_unscripted_mock_is_io_failure(self, two_items, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        out = tmp_path / "out"
        assert main(["run", str(two_items), "--mock", str(empty), "--out", str(out)]) == 2
        assert lines(out / "predictions.jsonl") == []

    def test_missing_answers_exit_1(self, two_items, tmp_path):
        script = tmp_path / "noanswer.jsonl"
        script.write_text("\n".join(json.dumps({"stage": s, "response": "plain text"}) for s in
                                    ["representation", "inference", "consistency_check", "reflection", "answer"]))
        assert main(["run", str(two_items), "--mock", str(script), "--out", str(tmp_path / "o"), "--num-runs", "1"]) == 1

    def test_no_backend_is_usage_error(self, two_items, tmp_path):
        assert main(["run", str(two_items), "--out", str(tmp_path / "o")]) == 1

    def test_bad_ablation_combo(self, two_items, fixtures, tmp_path):
        args = ["run", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--out", str(tmp_path / "o"),
                "--ablation", "symbolic_only", "--ablation", "disable_symbolic"]
        assert main(args) == 1

    def test_config_file(self, two_items, fixtures, tmp_path):
        cfg = tmp_path / "symtime.ini"
        cfg.write_text("[symtime]\nnum_runs = 2\nablations = disable_reflection\n")
        out = tmp_path / "out"
        assert main(["run", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--out", str(out), "--config", str(cfg)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["runs"] == 4
        assert report["config"]["ablations"] == ["disable_reflection"] and report["config"]["max_reflections"] == 0

    def test_config_file_flag_wins(self, two_items, fixtures, tmp_path):
        cfg = tmp_path / "symtime.ini"
        cfg.write_text("[symtime]\nnum_runs = 2\n")
        out = tmp_path / "out"
        main(["run", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--out", str(out),
              "--config", str(cfg), "--num-runs", "1"])
        assert json.loads((out / "report.json").read_text())["runs"] == 2

    def test_unknown_config_key(self, two_items, fixtures, tmp_path):
        cfg = tmp_path / "symtime.ini"
        cfg.write_text("[symtime]\nnum_run = 2\n")
        assert main(["run", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--out", str(tmp_path / "o"),
                     "--config", str(cfg)]) == 1


class TestEval:
    def test_scores(self, two_items, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        preds.write_text(
            json.dumps({"id": "easy-1", "prediction": "wrong"}) + "\n"
            + json.dumps({"id": "easy-2", "prediction": json.loads(two_items.read_text().splitlines()[1])["answers"][0]}) + "\n"
        )
        assert main(["eval", str(two_items), str(preds)]) == 0
        assert capsys.readouterr().out.splitlines()[3].split("|")[1].split() == ["50.0", "50.0"]
        assert json.loads((tmp_path / "scores.json").read_text())["macro"] == {"em": 50.0, "f1": 50.0}

    def test_unknown_id(self, two_items, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        preds.write_text(json.dumps({"id": "ghost", "prediction": "x"}) + "\n")
        assert main(["eval", str(two_items), str(preds)]) == 1
        assert "ghost" in capsys.readouterr().err

    def test_missing_dataset(self, tmp_path):
        assert main(["eval", str(tmp_path / "none.jsonl"), str(tmp_path / "p.jsonl")]) == 2


class TestAblate:
    def test_five_rows(self, two_items, fixtures, tmp_path, capsys):
        out = tmp_path / "abl"
        assert main(["ablate", str(two_items), "--mock", str(fixtures / "bench20_mock.jsonl"), "--num-runs", "1", "--out", str(out)]) == 0
        rows = capsys.readouterr().out.splitlines()[3:]
        assert [r.split("|")[0].strip() for r in rows] == [
            "Symbolic only", "w/o Symbol", "w/o Consistency Check", "w/o Abductive Reflection", "Full pipeline",
        ]
        assert set(json.loads((out / "ablation.json").read_text())) == {
            "symbolic_only", "no_symbol", "no_consistency", "no_reflection", "full",
        }
        assert len(list((out / "full").glob("*.json"))) == 2


class TestHttpBackend:
    """The live code path, served by a local OpenAI-compatible stub that replays the mock script."""

    @pytest.fixture
    def server(self, fixtures):
        import http.server
        import threading

        from symtime.backends import BackendRequest, MockBackend

        mock = MockBackend.from_file(fixtures / "pelikan_mock.jsonl")
        stages = ["representation", "inference", "consistency_check", "reflection", "answer"]
        seen = []

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                seen.append((self.path, self.headers.get("Authorization"), body))
                prompt = body["messages"][1]["content"]
                # the stage is recoverable from the tag the prompt asks for
                stage = next(s for s in stages if f"<{s}></{s}>" in prompt)
                text = mock.complete(BackendRequest("", prompt, stage=stage))
                payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}]}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        yield f"http://127.0.0.1:{httpd.server_address[1]}", seen
        httpd.shutdown()
        httpd.server_close()

    def test_run_over_http(self, server, two_items, tmp_path, monkeypatch):
        url, seen = server
        monkeypatch.setenv("STUB_KEY", "sk-local")
        out = tmp_path / "out"
        dataset = tmp_path / "one.jsonl"
        dataset.write_text(two_items.read_text().splitlines()[0] + "\n")
        code = main(["run", str(dataset), "--endpoint", url, "--model", "stub", "--api-key-env", "STUB_KEY",
                     "--out", str(out), "--num-runs", "1"])
        assert code == 0
        assert lines(out / "predictions.jsonl") == [{"id": "easy-1", "run": 0, "prediction": "Valparaiso University"}]
        assert {path for path, _, _ in seen} == {"/v1/chat/completions"}
        assert {auth for _, auth, _ in seen} == {"Bearer sk-local"}
        assert all(body["model"] == "stub" and body["temperature"] == 0.1 for _, _, body in seen)
        assert len(seen) == 4
