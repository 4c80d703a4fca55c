import collections
import math

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from odesign import models
from odesign.errors import CapHitWarning, SignCollapseWarning
from odesign.exact import thermal_diagonal
from odesign.expansion import Configuration, enumerate_closed, weight
from odesign.pmr import PmrHamiltonian
from odesign.sampler import (
    KINDS,
    Proposer,
    SamplerParams,
    estimate_diagonal_observable,
    identity_words,
    run,
    run_chain,
)

CHAIN3 = {(0, 1): 1.0, (1, 2): 1.0}


def scripted(values):
    it = iter(values)
    return lambda: next(it)


def test_params_validation():
    for bad in ({"n_samples": 0}, {"q_cap": 1}, {"thinning": 0}, {"seed": -1}, {"n_chains": 0}):
        with pytest.raises(ValueError):
            SamplerParams(beta=1.0, **bad)


def test_identity_words_of_qutrit():
    words = identity_words(models.qutrit(0.3, 1.0), max_len=3)
    assert set(words) == {(0, 1), (1, 0), (0, 0, 0), (1, 1, 1)}


def test_insert_from_empty_sequence():
    h = models.perm_cycle(0.5)
    prop = Proposer(h, 1.0, 30, max_word_len=2)
    st = prop.state(Configuration(0, ()))
    # kind index 0 = insert, shortest length, first word, position 0
    p = prop.propose(st, scripted([0.0, 0.0, 0.0, 0.0]))
    cand = p.candidate
    assert cand.config.q == 2
    j, k = cand.config.sequence
    assert h.inverse_index(j) == k
    assert cand.path.states[0] == cand.path.states[2] == 0


def test_remove_on_empty_sequence_rejected():
    prop = Proposer(models.perm_cycle(0.5), 1.0, 30)
    st = prop.state(Configuration(0, ()))
    assert prop.propose(st, scripted([0.3, 0.0, 0.0])) is None


def test_swap_keeping_closure():
    h = models.qutrit(0.2, 1.0)
    prop = Proposer(h, 1.0, 30)
    st = prop.state(Configuration(0, (0, 1)))
    p = prop.propose(st, scripted([0.5, 0.0]))
    assert p.kind == "swap" and p.candidate.config.sequence == (1, 0)


def test_cached_weight_matches_recomputation():
    h = models.qutrit(0.9, 1.0)
    prop = Proposer(h, 1.3, 30)
    for c in enumerate_closed(h, 6):
        st = prop.state(c)
        w = weight(h, c, 1.3)
        assert st.sign == w.sign
        if w.sign:
            assert st.log_abs_weight == pytest.approx(w.log_magnitude, rel=1e-12)


def test_stoquastic_model_has_unit_sign():
    h = models.tfim(models.LatticeParams(3, CHAIN3, gamma=-1.0))
    r = run(h, SamplerParams(beta=1.0, n_samples=20_000, seed=4))
    assert r.sign.mean == 1.0 and r.sign.std_error == 0.0


def test_ergodic_reaches_cubic_sequences():
    h = models.qutrit(math.pi / 4, 1.0)
    p = SamplerParams(beta=1.0, n_samples=100_000, n_chains=1, seed=2, q_cap=3)
    seen = collections.Counter()
    run_chain(h, p, 0, p.n_samples, on_visit=lambda c: seen.__setitem__(c.sequence, seen[c.sequence] + 1))
    assert seen[(0, 0, 0)] > 0 and seen[(1, 1, 1)] > 0


def _batch_z(counts, expected, n):
    batches = counts.shape[0]
    freq = counts.sum(axis=0) / n
    sigma = (counts / (n / batches)).std(axis=0, ddof=1) / math.sqrt(batches)
    return np.abs(freq - expected) / sigma


def test_visit_frequencies_match_enumeration():
    # Errors by batch means over 100 consecutive batches.  Configurations
    # expected fewer than 500 times are compared per (q, n1) class, because
    # their visits come in a few long clumps.
    h = models.qutrit(math.pi / 4, 1.0)
    beta, cap, n, batches = 1.0, 8, 1_000_000, 100
    configs = list(enumerate_closed(h, cap))
    index = {c: i for i, c in enumerate(configs)}
    w = np.array([abs(weight(h, c, beta).real_weight) for c in configs])
    expected = w / w.sum()
    counts = np.zeros((batches, len(configs)))
    step = [0]

    def visit(c):
        counts[step[0] * batches // n, index[c]] += 1
        step[0] += 1

    p = SamplerParams(beta=beta, n_samples=n, n_chains=1, seed=8, q_cap=cap)
    run_chain(h, p, 0, n, on_visit=visit)
    assert np.all(counts[:, expected == 0] == 0)
    common = expected * n >= 500
    assert common.sum() > 30
    assert np.all(_batch_z(counts[:, common], expected[common], n) < 4)
    classes = sorted({(c.q, c.sequence.count(0)) for c, r in zip(configs, ~common & (expected > 0)) if r})
    member = np.array([[(c.q, c.sequence.count(0)) == k and not common[i] for i, c in enumerate(configs)] for k in classes])
    assert np.all(_batch_z(counts @ member.T, member @ expected, n) < 4)


def _mid(i, n):
    return (i + 0.5) / n


def _choice_paths(prop, q, n_states):
    """(probability, uniform draws) for every discrete proposal from order q."""
    k = len(KINDS)
    nl = len(prop.lengths)
    for ki, kind in enumerate(KINDS):
        uk = _mid(ki, k)
        if kind == "insert":
            for li, ln in enumerate(prop.lengths):
                group = prop.by_length[ln]
                for wi in range(len(group)):
                    for pos in range(q + 1):
                        yield 1 / (k * nl * len(group) * (q + 1)), [uk, _mid(li, nl), _mid(wi, len(group)), _mid(pos, q + 1)]
        elif kind == "remove":
            for li, ln in enumerate(prop.lengths):
                if q < ln:
                    yield 1 / (k * nl), [uk, _mid(li, nl)]
                    continue
                for pos in range(q - ln + 1):
                    yield 1 / (k * nl * (q - ln + 1)), [uk, _mid(li, nl), _mid(pos, q - ln + 1)]
        elif kind == "swap":
            if q < 2:
                yield 1 / k, [uk]
            else:
                for pos in range(q - 1):
                    yield 1 / (k * (q - 1)), [uk, _mid(pos, q - 1)]
        elif kind == "rotate":
            if q < 1:
                yield 1 / k, [uk]
            else:
                yield 1 / (2 * k), [uk, 0.25]
                yield 1 / (2 * k), [uk, 0.75]
        elif q != 0:
            yield 1 / k, [uk]
        else:
            for z in range(n_states):
                yield 1 / (k * n_states), [uk, _mid(z, n_states)]


def transition_matrix(h, beta, cap):
    """Exact one-step kernel over non-zero configurations, built from the proposer itself."""
    prop = Proposer(h, beta, cap)
    states = [c for c in enumerate_closed(h, cap) if weight(h, c, beta).sign != 0]
    idx = {c: i for i, c in enumerate(states)}
    kern = np.zeros((len(states), len(states)))
    for i, c in enumerate(states):
        st = prop.state(c)
        for p, draws in _choice_paths(prop, c.q, h.dim):
            it = iter(draws)
            res = prop.propose(st, lambda: next(it))
            if res is None or res.candidate is None:
                kern[i, i] += p
                continue
            acc = min(1.0, math.exp(res.log_ratio))
            kern[i, idx[res.candidate.config]] += p * acc
            kern[i, i] += p * (1 - acc)
    target = np.array([abs(weight(h, c, beta).real_weight) for c in states])
    return kern, target / target.sum()


@pytest.mark.parametrize(
    "h, cap",
    [(models.qutrit(math.pi / 4, 1.0), 6), (models.qutrit(math.pi / 2, 1.0), 9), (models.perm_cycle(0.5), 4)],
    ids=["qutrit-pi/4", "qutrit-pi/2", "permcycle"],
)
def test_kernel_is_reversible_and_irreducible(h, cap):
    kern, target = transition_matrix(h, 1.0, cap)
    assert np.allclose(kern.sum(axis=1), 1.0, atol=1e-12)
    flow = target[:, None] * kern
    assert np.max(np.abs(flow - flow.T)) <= 1e-9 * target.max()
    n_comp, _ = connected_components(kern > 0, directed=True, connection="strong")
    assert n_comp == 1


def test_detailed_balance_and_cache_audits():
    for h in (models.qutrit(math.pi / 4, 1.0), models.perm_cycle(0.5)):
        r = run(h, SamplerParams(beta=1.0, n_samples=5_000, seed=3), audit_every=1)
        assert r.audits > 100


def test_seed_determinism():
    h = models.perm_cycle(0.5)
    p = SamplerParams(beta=1.0, n_samples=20_000, seed=123)
    streams = []
    for _ in range(2):
        rows = []
        run(h, p, on_sample=lambda *row: rows.append(row))
        streams.append(rows)
    assert streams[0] == streams[1]
    a, b = run(h, p), run(h, p)
    assert a.sign == b.sign and a.chain_signs == b.chain_signs
    c = run(h, SamplerParams(beta=1.0, n_samples=20_000, seed=124))
    assert c.chain_signs != a.chain_signs


def test_worker_pool_gives_same_result():
    h = models.perm_cycle(0.5)
    p = SamplerParams(beta=1.0, n_samples=8_000, seed=5)
    assert run(h, p, workers=2).chain_signs == run(h, p, workers=1).chain_signs


@pytest.mark.filterwarnings("ignore::odesign.errors.CapHitWarning")
def test_sign_collapse_warning():
    h = models.perm_cycle(0.5)
    with pytest.warns(SignCollapseWarning):
        r = run(h, SamplerParams(beta=6.0, n_samples=20_000, seed=1))
    assert any("collapse" in w for w in r.warnings)


def test_cap_hit_warning():
    h = models.perm_cycle(0.5)
    with pytest.warns(CapHitWarning):
        r = run(h, SamplerParams(beta=3.0, n_samples=5_000, seed=1, q_cap=2))
    assert r.cap_hits > 0


def test_relative_error_grows_with_beta():
    h = models.perm_cycle(0.5)
    rel = []
    for beta in (1.0, 2.0, 3.0):
        est = run(h, SamplerParams(beta=beta, n_samples=100_000, seed=6)).sign
        rel.append(est.std_error / abs(est.mean))
    assert rel[0] < rel[1] < rel[2]


def test_observable_identity_is_exactly_one():
    h = models.perm_cycle(0.5)
    est = estimate_diagonal_observable(h, SamplerParams(beta=1.0, n_samples=10_000, seed=2), np.ones(4))
    assert est.mean == pytest.approx(1.0, abs=1e-15)


def test_observable_classical_average():
    e = np.array([0.0, 0.5, 1.0, -0.3])
    h = PmrHamiltonian(e)
    beta = 1.2
    boltz = np.exp(-beta * e)
    target = float(e @ boltz / boltz.sum())
    est = estimate_diagonal_observable(h, SamplerParams(beta=beta, n_samples=50_000, seed=3), e)
    assert abs(est.mean - target) < 3 * est.std_error + 1e-12


def test_observable_excited_population():
    h = models.qutrit(math.pi, 1.0)
    proj = np.array([0.0, 1.0, 0.0])
    target = thermal_diagonal(h, 1.0)[1]
    est = estimate_diagonal_observable(h, SamplerParams(beta=1.0, n_samples=100_000, seed=5), proj)
    assert abs(est.mean - target) < 3 * est.std_error


def test_observable_rejects_complex():
    with pytest.raises(ValueError):
        estimate_diagonal_observable(models.perm_cycle(0.1), SamplerParams(beta=1.0, n_samples=10), np.ones(4) * 1j)
