import math
import warnings

import numpy as np
import pytest
from sklearn.base import clone

from refinement_acting.core import DomainError, MethodInstance, Task
from refinement_acting.domains.builder import DomainBuilder
from refinement_acting.interp import Action
from refinement_acting.learn import (ContextEncoder, EncodingError, Hyper, IntervalMap, LearnedHeuristic, LhRecord,
                                     LmRecord, MethodPolicy, Mlp, MLPClassifier, TrainingDiverged, fit_intervals,
                                     forward, generate_data, load_model, load_records, loss_and_grad, save_records,
                                     split_indices)
from refinement_acting.learn.synthetic import label_rule, separable_domain, separable_records
from refinement_acting.planner import PlannerConfig
from refinement_acting.sim import Rng


@pytest.fixture(scope="module")
def tiny():
    b = DomainBuilder("tiny")
    b.var("a", ("x", "y", "z"))
    b.var("b", (False, True))
    b.action("go", cost=1.0)
    b.task("t")
    b.task("u")
    b.method("m1", "t", (), [Action("go")])
    b.method("m2", "u", (), [Action("go")])
    return b.build()


def _state(d, a="y", b=True):
    return d.space.state({("a", ()): a, ("b", ()): b})


# -- encoding -----------------------------------------------------------------

def test_encoding_layout(tiny):
    enc = ContextEncoder(tiny)
    assert enc.width == 2 * 3 + 2
    x = enc.encode(_state(tiny), Task("u"))
    assert x.tolist() == [0, 1, 0, 0, 1, 0, 0, 1]
    assert np.array_equal(x, enc.encode(_state(tiny), Task("u")))
    lh = ContextEncoder(tiny, with_method=True)
    assert lh.width == 2 * 3 + 2 + 2
    assert lh.encode(_state(tiny), Task("t"), "m2")[-2:].tolist() == [0, 1]


def test_encoding_roundtrip(tiny):
    enc = ContextEncoder(tiny, with_method=True)
    for a in ("x", "y", "z"):
        for b in (False, True):
            x = enc.encode(_state(tiny, a, b), Task("t"), MethodInstance("m1"))
            assert enc.decode(x) == ((a, b), "t", "m1")


def test_encoding_errors(tiny):
    enc = ContextEncoder(tiny)
    bad = _state(tiny)
    from refinement_acting.core import State

    with pytest.raises(EncodingError, match="outside"):
        enc.encode(State(tiny.space, ("w", True)), Task("t"))
    with pytest.raises(EncodingError, match="unknown task"):
        enc.encode(bad, Task("nope"))
    with pytest.raises(EncodingError):
        ContextEncoder(tiny, with_method=True).encode(bad, Task("t"))
    with pytest.raises(EncodingError):
        enc.decode(np.zeros(enc.width))


def test_encoding_every_block_one_hot(domains):
    d = domains("fetch")
    enc = ContextEncoder(d)
    p = d.generator(Rng(0, "gen/0"), 0)
    x = enc.encode(p.state, p.tasks[0][0])
    blocks = x[:enc.state_width].reshape(enc.n_vars, enc.block)
    assert (blocks.sum(axis=1) == 1).all() and x[enc.state_width:].sum() == 1
    assert enc.width == len(d.space) * d.space.max_range + len(d.tasks)


# -- intervals ----------------------------------------------------------------

def test_intervals_equal_frequency():
    imap = fit_intervals(range(1, 9), 4)
    assert [imap.interval(u) for u in range(1, 9)] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert not any(imap.empty)


def test_intervals_single_and_ties():
    one = fit_intervals([3.0, 1.0, 2.0], 1)
    assert one.k == 1 and {one.interval(u) for u in (1, 2, 3)} == {0}
    tie = fit_intervals([0.5] * 6, 3)
    assert {tie.interval(0.5) for _ in range(3)} == {2}
    assert tie.empty == (True, True, False)


def test_interval_errors():
    with pytest.raises(ValueError):
        fit_intervals([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        fit_intervals([1.0], 0)
    with pytest.raises(ValueError):
        fit_intervals([1.0, math.inf], 1)


def test_decode_is_within_half_width():
    rng = np.random.default_rng(0)
    us = rng.exponential(size=200)
    imap = fit_intervals(us, 10)
    for u in us:
        j = imap.interval(u)
        lo, hi = imap.edges[j], imap.edges[j + 1]
        assert lo <= u <= hi and abs(imap.decode(j) - u) <= (hi - lo) / 2 + 1e-12
    counts = np.bincount([imap.interval(u) for u in us], minlength=10)
    assert (np.abs(counts - 20) <= 1).all()


def test_interval_map_roundtrip():
    imap = fit_intervals([0.1, 0.2, 0.4, 0.8], 2)
    assert IntervalMap.from_dict(imap.to_dict()) == imap


# -- network -------------------------------------------------------------------

def test_zero_weights_give_uniform_loss():
    net = Mlp.zeros(5, 4, 7)
    X = np.random.default_rng(0).normal(size=(3, 5))
    loss, _ = loss_and_grad(net, X, [0, 3, 6])
    assert loss == pytest.approx(math.log(7), abs=1e-12)


def test_relu_zeroes_negative_units():
    net = Mlp(np.array([[1.0, -1.0]]), np.zeros(2), np.eye(2), np.zeros(2))
    assert forward(net, np.array([[2.0]])).tolist() == [[2.0, 0.0]]
    assert forward(net, np.array([[-3.0]])).tolist() == [[0.0, 3.0]]


def _numeric_grad(net, X, y, eps=1e-6):
    out = []
    for p in net.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = loss_and_grad(net, X, y)[0]
            p[idx] = old - eps
            down = loss_and_grad(net, X, y)[0]
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        out.append(g)
    return out


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    net = Mlp.init(4, 5, 3, rng)
    X = rng.normal(size=(6, 4))
    y = rng.integers(3, size=6)
    _, grads = loss_and_grad(net, X, y)
    for a, n in zip(grads, _numeric_grad(net, X, y)):
        assert np.abs(a - n).max() <= 1e-4 * max(1.0, np.abs(n).max())


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(Mlp.zeros(3, 2, 2), np.zeros((1, 4)))


def test_classifier_sklearn_contract():
    clf = MLPClassifier(hidden=8, epochs=3)
    assert clone(clf).get_params() == clf.get_params()
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        clf.predict(np.zeros((1, 2)))
    X = np.eye(4)
    clf.fit(X, [0, 1, 2, 3])
    assert clf.predict_proba(X).shape == (4, 4) and np.allclose(clf.predict_proba(X).sum(axis=1), 1)
    assert len(clf.history_["train_loss"]) == 3


def test_single_record_is_memorised():
    clf = MLPClassifier(hidden=8, lr=0.1, epochs=300, n_outputs=3).fit(np.array([[1.0, 0.0]]), [2])
    assert clf.history_["train_loss"][-1] < 1e-2 and clf.predict([[1.0, 0.0]])[0] == 2


def test_learning_rate_range_warning():
    X, y = np.eye(2), [0, 1]
    with pytest.warns(UserWarning, match="learning rate"):
        MLPClassifier(hidden=4, lr=0.5, epochs=1).fit(X, y)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        MLPClassifier(hidden=4, lr=1e-3, epochs=1).fit(X, y)
        MLPClassifier(hidden=4, lr=1e-1, epochs=1).fit(X, y)


def test_divergence_aborts():
    X = np.full((4, 2), 1e3)
    with pytest.warns(UserWarning), pytest.raises(TrainingDiverged, match="epoch"):
        MLPClassifier(hidden=4, lr=1e6, epochs=50).fit(X, [0, 1, 0, 1])


def test_label_range_checked():
    with pytest.raises(ValueError):
        MLPClassifier(n_outputs=2, epochs=1).fit(np.eye(3), [0, 1, 2])


def test_split_is_disjoint_and_seeded():
    tr, va = split_indices(50, 3)
    assert len(va) == 10 and not set(tr) & set(va) and set(tr) | set(va) == set(range(50))
    assert (split_indices(50, 3)[1] == va).all()
    assert len(split_indices(1, 0)[1]) == 0


# -- models ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def sep():
    return separable_domain()


def test_policy_learns_generating_rule(sep):
    pol = MethodPolicy.fit(sep, separable_records(sep, 400, "lm", seed=0), Hyper(epochs=100))
    assert pol.metrics["val_acc"] >= 0.9
    test = separable_records(sep, 200, "lm", seed=99)
    hits = sum(pol.predict_method(r.state, r.task) == f"m{label_rule(r.state.values)}" for r in test)
    assert hits / len(test) >= 0.9


def test_heuristic_learns_intervals(sep):
    h = LearnedHeuristic.fit(sep, separable_records(sep, 400, "lh", seed=0), Hyper(epochs=100, k=8))
    assert h.metrics["val_acc"] >= 3 / 8
    lo, hi = h.intervals.edges[0], h.intervals.edges[-1]
    for r in separable_records(sep, 50, "lh", seed=5):
        assert lo <= h(r.task, MethodInstance(r.method), r.state) <= hi
        assert h(r.task, None, r.state) >= h(r.task, r.method, r.state)


def _one_hot_net(n_in, n_out, idx):
    net = Mlp.zeros(n_in, 1, n_out)
    net.b2[idx] = 5.0
    return net


def test_predict_decodes_argmax(tiny):
    enc = ContextEncoder(tiny)
    pol = MethodPolicy(tiny, _one_hot_net(enc.width, 2, 1), enc)
    assert pol.predict_method(_state(tiny), Task("t")) == "m2"
    lh_enc = ContextEncoder(tiny, with_method=True)
    imap = IntervalMap((0.0, 0.2, 0.4, 1.0), (False, False, False))
    h = LearnedHeuristic(tiny, _one_hot_net(lh_enc.width, 3, 1), lh_enc, imap)
    assert h(Task("t"), MethodInstance("m1"), _state(tiny)) == pytest.approx(0.3)
    const = LearnedHeuristic(tiny, Mlp.init(lh_enc.width, 2, 1, np.random.default_rng(0)), lh_enc,
                             IntervalMap((0.1, 0.9), (False,)))
    assert {const(Task("t"), "m1", _state(tiny, a)) for a in "xyz"} == {0.5}


def test_ties_go_to_lowest_index(tiny):
    enc = ContextEncoder(tiny)
    assert MethodPolicy(tiny, Mlp.zeros(enc.width, 2, 2), enc).predict_method(_state(tiny), Task("u")) == "m1"


def test_model_files_roundtrip(sep, tmp_path):
    recs = separable_records(sep, 60, "lh", seed=0)
    h = LearnedHeuristic.fit(sep, recs, Hyper(epochs=5, hidden=8, k=4))
    h.save(tmp_path / "a.json")
    LearnedHeuristic.fit(sep, recs, Hyper(epochs=5, hidden=8, k=4)).save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    back = load_model(tmp_path / "a.json", sep)
    assert isinstance(back, LearnedHeuristic) and back.intervals == h.intervals
    r = recs[0]
    assert back(r.task, r.method, r.state) == h(r.task, r.method, r.state)
    with pytest.raises(DomainError, match="different declarations"):
        load_model(tmp_path / "a.json", separable_domain(4, 5))


def test_records_roundtrip(domains, tmp_path):
    d = domains("micro-nested")
    recs = generate_data(d, 3, "lm2", PlannerConfig(n_ro=20), Rng(0))
    recs += generate_data(d, 3, "lh", PlannerConfig(n_ro=20), Rng(0))
    save_records(recs, tmp_path / "r.jsonl")
    assert load_records(tmp_path / "r.jsonl", d) == recs
    (tmp_path / "bad.jsonl").write_text('{"kind": "lm"}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        load_records(tmp_path / "bad.jsonl", d)


# -- data generation --------------------------------------------------------------

def test_lm1_filter_on_fixtures(domains):
    cfg = PlannerConfig(n_ro=20)
    fail = domains("micro-always-fail")
    assert generate_data(fail, 5, "lm1", cfg, Rng(0)) == []
    assert len(generate_data(fail, 5, "lm2", cfg, Rng(0))) == 5
    det = domains("micro-deterministic")
    assert generate_data(det, 5, "lm1", cfg, Rng(0)) == generate_data(det, 5, "lm2", cfg, Rng(0))


def test_records_reference_templates(domains):
    d = domains("fetch")
    recs = generate_data(d, 5, "lm2", PlannerConfig(n_ro=10), Rng(1))
    lh = generate_data(d, 5, "lh", PlannerConfig(n_ro=10), Rng(1))
    assert recs and all(isinstance(r, LmRecord) and d.template(r.method).task == r.task.name for r in recs)
    assert lh and all(isinstance(r, LhRecord) and r.u >= 0 for r in lh)
    with pytest.raises(ValueError):
        generate_data(d, 1, "lm3")
    with pytest.raises(DomainError):
        generate_data(domains("courier"), 1, "lm2")
