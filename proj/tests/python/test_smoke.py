import json
import random
from pathlib import Path

import numpy as np
import pytest

propspec = pytest.importorskip("propspec")

ROOT = Path(__file__).resolve().parents[2]
AAINDEX = ROOT / "data" / "aaindex1"


@pytest.fixture(scope="module")
def table():
    return propspec.derive_descriptors(str(AAINDEX))


def toy_set():
    rng = random.Random(5)
    seqs, labels = [], []
    for i in range(40):
        alphabet = "FILVW" if i % 2 else "DEKRH"
        seqs.append("".join(rng.choice(alphabet) for _ in range(14)))
        labels.append("hydrophobic" if i % 2 else "charged")
    return seqs, labels


def test_parse_aaindex_reads_every_record():
    records = propspec.parse_aaindex(AAINDEX.read_text())
    assert len(records) == 566
    assert set(records[0]["values"]) == set("ACDEFGHIKLMNPQRSTVWY")
    assert any(r["has_missing"] for r in records)


def test_parse_error_is_raised():
    with pytest.raises(propspec.ParseError):
        propspec.parse_aaindex("H ABC\nI    A/L R/K\n 1 2 3\n//\n")


def test_descriptor_table_has_eight_groups(table):
    assert len(table["groups"]) == 8
    assert json.loads(json.dumps(table)) == table


def test_fft_matches_numpy():
    x = np.random.default_rng(0).normal(size=64)
    ours = np.array(propspec.fft_magnitude(list(x)))
    assert np.allclose(ours, np.abs(np.fft.rfft(x)), atol=1e-10)


def test_encode_shapes(table):
    feats = propspec.encode(["ACDEFG", "KLM"], table, padded_length=16)
    assert len(feats) == sum(g.get("explained_variance") is not None for g in table["groups"])
    assert feats[0].shape == (2, 9)


def test_metrics():
    m = propspec.classification_metrics([1, 1, 0, 0], [1, 0, 0, 0])
    assert m["accuracy"] == pytest.approx(0.75)
    r = propspec.regression_metrics([1, 2, 3, 4], [1, 3, 2, 4])
    assert r["kendall_tau"] == pytest.approx(2 / 3)
    with pytest.raises(propspec.DegenerateData):
        propspec.regression_metrics([2, 2, 2], [1, 2, 3])


def test_train_predict_round_trip(table, tmp_path):
    seqs, labels = toy_set()
    result = propspec.train(seqs, labels, table, task="classification", seed=3, k_folds=3, max_models=12)
    report = result.report()
    assert report["test_metrics"]["raw"]["accuracy"] == 1.0
    ens = result.ensemble
    path = tmp_path / "bundle.json"
    ens.save(str(path))
    loaded = propspec.Ensemble.load(str(path))
    queries = ["FVLIWLFVIWLIFV", "DKERHKDRHEKDRE", "AXA"]
    before, after = ens.predict(queries), loaded.predict(queries)
    assert before == after
    assert before[0]["label"] == "hydrophobic"
    assert before[1]["label"] == "charged"
    assert "error" in before[2]


def test_train_requires_matching_lengths(table):
    with pytest.raises(propspec.InvalidArgument):
        propspec.train(["AAA"], [1.0, 2.0], table, task="regression", seed=1)
