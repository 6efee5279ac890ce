"""Tests for the command-line front end."""

import json
import math
from fractions import Fraction

import pytest

from tautrels.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def payload(out):
    """The emitted JSON payload: the first stdout line."""
    return json.loads(out.strip().splitlines()[0])


class TestRelationsGen:
    def test_genus3_codim2_single_relation_rank_one(self, capsys, tmp_path):
        out = tmp_path / "rel.json"
        code, _, _ = run(capsys, "relations", "gen", "--genus", "3",
                         "--codim", "2", "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert len(data["relations"]) == 1
        assert data["rank"] == 1
        assert data["generators"] > 0

    def test_violated_inequality_named_exit_2(self, capsys):
        code, _, err = run(capsys, "relations", "gen", "--genus", "3",
                           "--codim", "1")
        assert code == 2
        assert "3r >= g+1+|S| violated" in err

    def test_genus2_codim1_is_boundary_supported(self, capsys):
        code, out, _ = run(capsys, "relations", "gen", "--genus", "2",
                           "--codim", "1", "--construction", "fz")
        assert code == 0
        terms = payload(out)["relations"][0]["terms"]
        assert any(t["graph"]["edges"] for t in terms)

    def test_primitive_flag_clears_denominators(self, capsys):
        code, out, _ = run(capsys, "relations", "gen", "--genus", "3",
                           "--codim", "2", "--primitive")
        assert code == 0
        terms = payload(out)["relations"][0]["terms"]
        nums = [int(t["num"]) for t in terms]
        assert all(t["den"] == "1" for t in terms)
        assert math.gcd(*nums) == 1

    def test_sigma_selects_extended_construction(self, capsys):
        code, out, _ = run(capsys, "relations", "gen", "--genus", "2",
                           "--codim", "2", "--sigma", "1")
        assert code == 0
        data = payload(out)
        assert data["construction"] == "extended"
        assert data["generators"] > 0

    def test_open_sq_construction(self, capsys):
        code, out, _ = run(capsys, "relations", "gen", "--genus", "3",
                           "--codim", "2", "--construction", "open-sq",
                           "--d", "1")
        assert code == 0
        assert payload(out)["generators"] > 0


class TestVerify:
    def test_series_suite_passes(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "series", "--quick")
        assert code == 0
        assert "ok=True" in out

    def test_chain_suite_passes(self, capsys):
        code, _, _ = run(capsys, "verify", "--suite", "chain", "--genus", "3")
        assert code == 0

    def test_pushforward_suite_passes(self, capsys):
        code, _, _ = run(capsys, "verify", "--suite", "pushforward",
                         "--d", "2")
        assert code == 0

    def test_json_log_is_one_object_per_line(self, capsys):
        code, out, _ = run(capsys, "--log", "json", "verify", "--suite",
                           "chain", "--genus", "3")
        assert code == 0
        for line in out.strip().splitlines():
            assert isinstance(json.loads(line), dict)


class TestSeriesDump:
    def test_hypergeometric_head(self, capsys):
        code, out, _ = run(capsys, "series", "dump", "--name", "A",
                           "--orders", "t=10")
        assert code == 0
        data = payload(out)
        assert len(data["terms"]) == 11
        first, second = data["terms"][0], data["terms"][1]
        assert (first["num"], first["den"]) == ("1", "1")
        assert (second["num"], second["den"]) == ("5", "6")

    def test_edge_table_indexed_by_signs(self, capsys):
        code, out, _ = run(capsys, "series", "dump", "--name", "DeltaE",
                           "--orders", "t=8")
        assert code == 0
        table = payload(out)["table"]
        assert sorted(tuple(e["zeta"]) for e in table) == [
            (-1, -1), (-1, 1), (1, -1), (1, 1)
        ]
        names = [s["var"] for s in table[0]["ring"]]
        assert names == ["t", "psi1", "psi2"]

    def test_unknown_name_exit_2(self, capsys):
        code, _, err = run(capsys, "series", "dump", "--name", "nope",
                           "--orders", "t=4")
        assert code == 2
        assert "unknown series" in err


class TestRank:
    def test_duplicated_relation_has_rank_one(self, capsys, tmp_path):
        out = tmp_path / "rel.json"
        run(capsys, "relations", "gen", "--genus", "3", "--codim", "2",
            "--out", str(out))
        rel = json.loads(out.read_text())["relations"][0]
        batch = tmp_path / "two.json"
        batch.write_text(json.dumps([rel, rel]))
        code, text, _ = run(capsys, "rank", "--batch", str(batch))
        assert code == 0
        assert payload(text)["rank"] == 1

    def test_mixed_codimension_batch_rejected(self, capsys, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        run(capsys, "relations", "gen", "--genus", "3", "--codim", "2",
            "--out", str(a))
        run(capsys, "relations", "gen", "--genus", "2", "--codim", "1",
            "--out", str(b))
        batch = tmp_path / "mixed.json"
        batch.write_text(json.dumps([
            json.loads(a.read_text())["relations"][0],
            json.loads(b.read_text())["relations"][0],
        ]))
        code, _, err = run(capsys, "rank", "--batch", str(batch))
        assert code == 2
        assert "mixed-codimension" in err


class TestConfig:
    def test_unknown_key_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"cache_dirr": "x"}))
        code, _, err = run(capsys, "--config", str(cfg), "verify",
                           "--suite", "chain")
        assert code == 2
        assert "unknown config keys" in err

    def test_threads_key_accepted(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"threads": 2, "log": "json"}))
        code, out, _ = run(capsys, "--config", str(cfg), "relations", "gen",
                           "--genus", "3", "--codim", "2")
        assert code == 0
        lines = out.strip().splitlines()
        assert json.loads(lines[-1])["rank"] == 1


class TestDeterminism:
    def test_thread_count_and_cache_do_not_change_bytes(
        self, capsys, tmp_path, monkeypatch
    ):
        cache = tmp_path / "cache"
        monkeypatch.setenv("TAUTRELS_CACHE", str(cache))
        outputs = []
        for threads, tag in [(1, "a"), (4, "b"), (1, "c")]:
            out = tmp_path / f"{tag}.json"
            code, _, _ = run(capsys, "--threads", str(threads), "relations",
                             "gen", "--genus", "3", "--codim", "2",
                             "--out", str(out))
            assert code == 0
            outputs.append(out.read_bytes())
        # run b was parallel; run c reused the now-warm cache
        assert outputs[0] == outputs[1] == outputs[2]


class TestGraphsAndClasses:
    def test_graphs_list(self, capsys):
        code, out, _ = run(capsys, "graphs", "list", "--genus", "2",
                           "--max-edges", "1")
        assert code == 0
        assert any(g["edges"] for g in payload(out)["graphs"])

    def test_classes_normal_form_roundtrip(self, capsys, tmp_path):
        out = tmp_path / "rel.json"
        run(capsys, "relations", "gen", "--genus", "3", "--codim", "2",
            "--out", str(out))
        rel = json.loads(out.read_text())["relations"][0]
        infile = tmp_path / "class.json"
        infile.write_text(json.dumps(rel))
        code, text, _ = run(capsys, "classes", "normal-form", "--in",
                            str(infile))
        assert code == 0
        assert payload(text)["terms"] == rel["terms"]
