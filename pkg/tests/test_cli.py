import json
import subprocess
import sys

import pytest

from conftest import FIG1_DICTIONARY, FIG1_RECORD
from bgprel.cli import atomic_output, main
from bgprel.fusion import parse_export


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "3", "-o", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def inferred(synth_dir):
    db = synth_dir / "db.json"
    rel = synth_dir / "rels.txt"
    code = main(["infer", "--corpus", str(synth_dir / "corpus"),
                 "--dictionary", str(synth_dir / "dictionary.tsv"),
                 "--rs", str(synth_dir / "rs"), "-o", str(db), "--export", str(rel)])
    assert code == 0
    return db, rel


def test_fig1(tmp_path, capsys):
    (tmp_path / "route-views2.20100801.txt").write_text(FIG1_RECORD)
    (tmp_path / "dict.tsv").write_text(FIG1_DICTIONARY)
    assert main(["infer", "--corpus", str(tmp_path / "route-views2.20100801.txt"),
                 "--dictionary", str(tmp_path / "dict.tsv"), "-o", str(tmp_path / "db.json"),
                 "--export", "-"]) == 0
    rows = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert rows == ["4589|15412|0||COMMUNITIES", "15412|18101|-1||COMMUNITIES"]
    meta = json.loads((tmp_path / "db.json").read_text())["meta"]
    assert meta["corpus-dates"] == "2010-08-01..2010-08-01"


def test_synth_layout(synth_dir):
    assert (synth_dir / "truth.json").exists()
    assert len(list((synth_dir / "corpus").iterdir())) == 20
    assert list((synth_dir / "rs").glob("AS*.rs"))


def test_infer_and_score(synth_dir, inferred, capsys):
    db, rel = inferred
    exported = parse_export(rel.read_text())
    assert len(exported) > 500
    assert main(["score", "--db", str(db), "--truth", str(synth_dir / "truth.json")]) == 0
    out = capsys.readouterr().out
    assert "mismatch" not in out
    assert all(line.split()[-2:] == ["1.000", "1.000"] for line in out.splitlines()[1:])


def test_export_matches_infer(inferred, tmp_path):
    db, rel = inferred
    assert main(["export", "--db", str(db), "-o", str(tmp_path / "again.txt")]) == 0
    assert (tmp_path / "again.txt").read_text() == rel.read_text()


def test_stats(synth_dir, inferred, capsys):
    db, _ = inferred
    assert main(["stats", "--db", str(db), "--corpus", str(synth_dir / "corpus")]) == 0
    s = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert int(s["transit"]) + int(s["peering"]) - int(s["hybrid"]) + int(s["sibling"]) \
        == int(s["inferred_links"])
    assert int(s["links"]) >= int(s["inferred_links"])
    assert s["indirect_peering_pairs"] == "2"


def test_validate_paths(synth_dir, inferred, capsys):
    db, _ = inferred
    assert main(["validate-paths", "--db", str(db), "--corpus", str(synth_dir / "corpus")]) == 0
    out = dict(l.split("\t", 1) for l in capsys.readouterr().out.splitlines() if "\t" in l)
    assert int(out["violations"]) >= 5
    assert int(out["valid"]) > 100


def test_ingest_stats(synth_dir, capsys):
    assert main(["ingest-stats", "--corpus", str(synth_dir / "corpus")]) == 0
    s = dict(line.split("\t", 1) for line in capsys.readouterr().out.splitlines())
    assert s["files"] == "20" and s["errors"] == "0" and int(s["records"]) > 1000


def test_profile_and_fuse(synth_dir, inferred, tmp_path, capsys):
    db, _ = inferred
    lp_db = tmp_path / "lp.json"
    assert main(["profile-locprf", "--rs", str(synth_dir / "rs"), "--labels", str(db),
                 "--db", str(lp_db)]) == 0
    out = capsys.readouterr().out
    assert out.count("observer AS") == len(list((synth_dir / "rs").iterdir()))
    assert "default" in out and "near-default" in out
    fused = tmp_path / "fused.json"
    assert main(["fuse", "--communities", str(db), "--locprf", str(lp_db), "-o", str(fused)]) == 0
    doc = json.loads(fused.read_text())
    assert {l["provenance"] for l in doc["links"]} >= {"BOTH", "COMMUNITIES"}


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["infer", "--bogus"]) == 1
    assert main(["infer", "--corpus", "x"]) == 1  # no dictionary
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("bgprel: error: usage: ") for line in err)


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("1\t1:1\tREL_PEER\n1\t1:1\tREL_CUSTOMER\n")
    (tmp_path / "c.txt").write_text(FIG1_RECORD)
    out = tmp_path / "db.json"
    assert main(["infer", "--corpus", str(tmp_path / "c.txt"), "--dictionary", str(bad),
                 "-o", str(out)]) == 2
    assert not out.exists()
    assert main(["export", "--db", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "junk.json").write_text("[")
    assert main(["stats", "--db", str(tmp_path / "junk.json")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 3 and all(line.startswith("bgprel: error: data: ") for line in err)


def test_infeasible_synth(tmp_path, capsys):
    assert main(["synth", "--n-ases", "40", "-o", str(tmp_path / "s")]) == 2
    assert "bgprel: error: infeasible:" in capsys.readouterr().err
    assert not (tmp_path / "s").exists()


def test_bad_config_exit_code(tmp_path, monkeypatch):
    conf = tmp_path / "c.conf"
    conf.write_text("nope = 1\n")
    monkeypatch.setenv("BGPREL_CONFIG", str(conf))
    assert main(["ingest-stats", "--corpus", str(tmp_path)]) == 1


def test_atomic_output_keeps_old_file(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_output(target) as fh:
            fh.write("new")
            raise RuntimeError
    assert target.read_text() == "old"
    assert list(tmp_path.iterdir()) == [target]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bgprel", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("ingest-stats", "infer", "profile-locprf", "fuse", "validate-paths", "stats",
                "export", "synth", "score"):
        assert cmd in proc.stdout
