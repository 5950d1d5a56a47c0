import math
import os
from pathlib import Path

import pytest

import ccdae

DATA = Path(os.environ.get("CCDAE_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))

THREE = (DATA / "fixtures" / "three_descriptions.json").read_text()


@pytest.fixture(scope="module")
def toy():
    return ccdae.open_backend("ngram", str(DATA / "toy_ngram.model"))


def test_self_compare_is_zero(toy):
    cfg = ccdae.CompareConfig()
    cfg.samples_per_input = 8
    cfg.max_tokens = 10
    rep = ccdae.compare("kittens chase the mouse.", "kittens chase the mouse.", toy, cfg)
    assert rep.auc == 0.0
    assert all(d == 0.0 for d in rep.curve.distance)


def test_compare_is_deterministic_and_symmetric(toy):
    cfg = ccdae.CompareConfig()
    cfg.samples_per_input = 8
    cfg.seed = 5
    a, b = "kittens chase the mouse.", "traders buy tech shares."
    r1 = ccdae.compare(a, b, toy, cfg)
    r2 = ccdae.compare(a, b, toy, cfg)
    r3 = ccdae.compare(b, a, toy, cfg)
    assert r1.auc == r2.auc == r3.auc
    assert r1.auc > 0.0
    assert r1.curve.to_csv().startswith("capacity,delta_2_to_1,delta_1_to_2,distance\n")
    assert '"auc"' in r1.to_json()


def test_table_backend_logprobs():
    be = ccdae.table_backend(THREE)
    assert be.cond_logprob("left", "red") == pytest.approx(math.log(0.7))
    assert be.code_logprob("round") == pytest.approx(-0.9)
    with pytest.raises(ccdae.BackendError):
        be.cond_logprob("left", "blue")


def test_invalid_input_maps_to_value_error(toy):
    cfg = ccdae.CompareConfig()
    cfg.samples_per_input = 0
    with pytest.raises(ValueError):
        ccdae.compare("a", "b", toy, cfg)
    with pytest.raises(ValueError):
        ccdae.open_backend("table", "/nonexistent/fixture.json")


def test_spearman_tie_case():
    assert ccdae.spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(math.sqrt(0.9), abs=1e-12)
    with pytest.raises(ccdae.UndefinedCorrelation):
        ccdae.spearman([1, 1, 1], [1, 2, 3])


def test_oracle_gibbs_and_discrete_problem():
    t = ccdae.oracle.Table(["a", "b"], [math.log(2), math.log(2)], [[0.0, 10.0], [10.0, 0.0]])
    w = ccdae.oracle.exact_gibbs(t, 0, 1.0)
    assert sum(w) == pytest.approx(1.0, abs=1e-12)
    assert w[0] > w[1]
    assert ccdae.oracle.solve_discrete_description(t, 1, 1.0) == 1
    with pytest.raises(ccdae.NoFeasibleDescription):
        ccdae.oracle.solve_discrete_description(t, 0, 0.1)
    curve = ccdae.oracle.exact_distance_curve(t)
    assert curve.auc > 0.0


def test_ncd_and_entropy():
    assert ccdae.bernoulli_entropy(0.5) == pytest.approx(math.log(2))
    rnd = os.urandom(1 << 14)
    assert ccdae.ncd(rnd, os.urandom(1 << 14)) > 0.9
    # Inside deflate's 32 KiB window the second copy is almost free.
    block = os.urandom(1 << 13)
    assert ccdae.ncd(block, block) < 0.15
    pts = ccdae.noise_experiment("disk", 0.1, [64 * 64, 128 * 128])
    assert [p["dimension"] for p in pts] == [4096, 16384]


def test_train_and_sample():
    be = ccdae.train_ngram("abababababab", order=2, alpha=0.001)
    samples = be.sample("a", count=5, max_tokens=4, seed=1)
    assert len(samples) == 5
    assert all(s.startswith("b") for s in samples)


def test_toy_benchmarks(toy):
    res = ccdae.bench_pairs(DATA / "sts_toy.tsv", toy)
    assert res["rho_x100"] >= 80.0
    assert len(res["scores"]) == 40
    assert ccdae.bench_choice(DATA / "choice_toy.tsv", toy) == 1.0
