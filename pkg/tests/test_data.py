import json
import os

import jsonschema
import pytest

from hierdti.cli import load_schema
from hierdti.data import (
    DtiRecord,
    EmptyCorpus,
    ParseError,
    SplitSpec,
    TooFewRecords,
    affinity_to_label,
    kfold,
    load_corpus,
    split,
    summarize,
    write_corpus,
    write_manifest,
)


def _write(tmp_path, text, name="c.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_toy_tsv(tmp_path):
    p = _write(tmp_path, "CCO\tMKVL\t1\nc1ccccc1\tGHTR\t0\nCC(=O)O\tMKVL\t1\n")
    recs = load_corpus(p)
    assert [r.label for r in recs] == [1, 0, 1]
    assert recs[1] == DtiRecord("c1ccccc1", "GHTR", 0)


def test_header_blank_and_legacy(tmp_path):
    p = _write(tmp_path, "smiles\tsequence\tlabel\n\nCCO\tMKVL\t1.0\n")
    assert load_corpus(p) == [DtiRecord("CCO", "MKVL", 1)]
    p = _write(tmp_path, "CCO MKVL 1\nCCN  GHTR 0\n", "legacy.txt")
    assert [r.smiles for r in load_corpus(p)] == ["CCO", "CCN"]
    assert load_corpus(p, fmt="legacy")[1].label == 0


@pytest.mark.parametrize("text, line", [
    ("CCO\tMKVL\t1\nCCO\tMKVL\n", 2),
    ("CCO\tMKVL\t1\nCCO\tMKVL\t2\n", 2),
    ("CCO\tMKVL\tyes\n", 1),
    ("CCO\t\t1\n", 1),
])
def test_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises(ParseError) as err:
        load_corpus(_write(tmp_path, text))
    assert err.value.line == line and f"line {line}" in str(err.value)


def test_empty_and_bad_format(tmp_path):
    with pytest.raises(EmptyCorpus):
        load_corpus(_write(tmp_path, "\n\n"))
    with pytest.raises(ValueError):
        load_corpus(_write(tmp_path, "CCO\tM\t1\n"), fmt="csv")


def test_summary_and_duplicates(tmp_path):
    recs = [DtiRecord("CCO", "MKVL", 1), DtiRecord("CCN", "MKVL", 0), DtiRecord("CCO", "MKVL", 1)]
    s = summarize(recs)
    assert (s.targets, s.drugs, s.interactions, s.positives, s.negatives, s.duplicate_pairs) == (1, 2, 3, 2, 1, 1)
    p = tmp_path / "rt.tsv"
    write_corpus(p, recs)
    assert load_corpus(p) == recs


def test_affinity_threshold():
    assert affinity_to_label(6.0) == 1
    assert affinity_to_label(5.99) == 0
    assert affinity_to_label(9.3) == 1
    with pytest.raises(ValueError):
        affinity_to_label(float("nan"))


def _covering(s, n):
    parts = [set(s.train), set(s.val), set(s.test)]
    assert sum(len(p) for p in parts) == n
    assert set().union(*parts) == set(range(n))


def test_ratio_split():
    recs = list(range(100))
    a = split(recs, SplitSpec(seed=3))
    assert (len(a.train), len(a.val), len(a.test)) == (80, 10, 10)
    _covering(a, 100)
    assert a == split(recs, SplitSpec(seed=3))
    b = split(recs, SplitSpec(seed=4))
    assert (len(b.train), len(b.val), len(b.test)) == (80, 10, 10)
    assert b.test != a.test
    _covering(split(list(range(37)), SplitSpec(seed=1)), 37)
    with pytest.raises(TooFewRecords):
        split(list(range(9)), SplitSpec())


def test_kfold_partition():
    folds = split(list(range(53)), SplitSpec.parse("kfold:5", seed=2))
    assert len(folds) == 5
    seen = sorted(i for f in folds for i in f.test)
    assert seen == list(range(53))
    for f in folds:
        _covering(f, 53)
    assert folds == kfold(53, 5, 2)
    with pytest.raises(TooFewRecords):
        kfold(3, 5, 0)
    with pytest.raises(ValueError):
        SplitSpec("kfold", k=1)


def test_carve20_and_fixed():
    s = split(list(range(50)), SplitSpec.parse("carve20", seed=7), test=list(range(12)))
    assert (len(s.train), len(s.val)) == (40, 10)
    assert s.test == list(range(12))
    assert set(s.train).isdisjoint(s.val) and set(s.train) | set(s.val) == set(range(50))
    f = split(list(range(5)), SplitSpec.parse("fixed"), test=[0, 1], val=[0])
    assert (f.train, f.val, f.test) == ([0, 1, 2, 3, 4], [0], [0, 1])
    with pytest.raises(ValueError):
        SplitSpec.parse("holdout")


def test_manifest_schema(tmp_path):
    schema = load_schema("split_manifest")
    for spec in (SplitSpec(seed=1), SplitSpec.parse("kfold:3", seed=1)):
        p = tmp_path / "m.json"
        write_manifest(p, split(list(range(30)), spec), spec)
        jsonschema.validate(json.loads(p.read_text()), schema)


@pytest.mark.skipif(not os.environ.get("HIERDTI_HUMAN_CORPUS"), reason="Human corpus not supplied")
def test_human_corpus_statistics():
    s = summarize(load_corpus(os.environ["HIERDTI_HUMAN_CORPUS"]))
    assert (s.targets, s.drugs, s.interactions, s.positives, s.negatives) == (852, 1052, 6738, 3369, 3369)
