"""Metropolis sampling of closed configurations with probability proportional to |W|.

Move set (kind chosen uniformly from five):

insert   put an identity word (a short term sequence whose permutations
         multiply to the identity) at a uniformly chosen position;
remove   pick a word length and a position, and delete the block if it is an
         identity word from the catalogue;
swap     exchange two adjacent terms, rejected if the path no longer closes;
rotate   move the first term to the end (or the last to the front), which
         changes the start state;
jump     from an empty sequence, move to a uniformly chosen basis state.

Insert picks a word length, then a word of that length, then a position;
remove picks a length and a position.  The pair is matched by (position,
word) labels, so its proposal ratio only involves q, the word length and the
number of catalogue words of that length.  The other moves are symmetric.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .divided_differences import DividedDifferenceTable, _signed_log_cached, _snap
from .errors import CapHitWarning, SignCollapseWarning
from .expansion import Configuration, PathTrace, real_sign, weight
from .pmr import PmrHamiltonian

KINDS = ("insert", "remove", "swap", "rotate", "jump")
REVERSE_KIND = {"insert": "remove", "remove": "insert", "swap": "swap", "rotate": "rotate", "jump": "jump"}
CAP_WARN_FRACTION = 1e-4
_CATALOGUE_BUDGET = 20_000
MAX_WORD_LEN = 8


@dataclass(frozen=True)
class SamplerParams:
    beta: float
    n_samples: int = 100_000
    n_chains: int = 8
    burn_in: int = 2_000
    thinning: int = 1
    seed: int = 0
    q_cap: int = 30
    max_word_len: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.q_cap < 2:
            raise ValueError("q_cap must be >= 2")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ChainState:
    config: Configuration
    path: PathTrace
    dd_table: DividedDifferenceTable
    log_abs_weight: float
    sign: int


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_effective: float


@dataclass
class SamplerResult:
    sign: Estimate
    observables: dict[str, Estimate]
    cap_hits: int
    steps: int
    accepted: int
    chain_signs: list[float]
    warnings: list[str] = field(default_factory=list)
    audits: int = 0

    @property
    def cap_fraction(self) -> float:
        return self.cap_hits / self.steps if self.steps else 0.0


@dataclass(frozen=True)
class Proposal:
    kind: str
    candidate: ChainState | None
    log_ratio: float
    forward_prob: float
    reverse_prob: float
    cap_hit: bool = False


def identity_words(h: PmrHamiltonian, max_len: int | None = None) -> list[tuple[int, ...]]:
    """Term sequences of length 2..max_len whose permutations compose to the identity.

    Long words let the chain step over configurations whose weight vanishes
    (e.g. a phase making Re(product) zero), which shorter moves cannot cross.
    """
    m = h.n_terms
    if m == 0:
        return []
    if max_len is None:
        max_len = 2
        while max_len < MAX_WORD_LEN and m ** (max_len + 1) <= _CATALOGUE_BUDGET:
            max_len += 1
    perms = [t.perm for t in h.terms]
    ident = np.arange(h.dim)
    words = []
    for length in range(2, max_len + 1):
        for word in itertools.product(range(m), repeat=length):
            state = ident
            for j in word:
                state = perms[j][state]
            if np.array_equal(state, ident):
                words.append(word)
    return words


class Proposer:
    """Builds candidate states for one Hamiltonian at fixed beta and q_cap."""

    def __init__(self, h: PmrHamiltonian, beta: float, q_cap: int, max_word_len: int | None = None):
        self.h = h
        self.beta = float(beta)
        self.q_cap = q_cap
        self.nxt = [[int(x) for x in t.perm] for t in h.terms]
        self.amp = [[complex(t.diag[int(x)]) for x in t.perm] for t in h.terms]
        self.energy = [float(e) for e in h.d0]
        self.words = identity_words(h, max_word_len)
        self.word_set = set(self.words)
        self.lengths = sorted({len(w) for w in self.words})
        self.by_length = {n: [w for w in self.words if len(w) == n] for n in self.lengths}

    def state(self, config: Configuration) -> ChainState | None:
        """Evaluate ``config``; None when it does not close."""
        z = config.z0
        states = [z]
        amp = 1 + 0j
        nxt, amps = self.nxt, self.amp
        for j in config.sequence:
            z = nxt[j][z]
            amp *= amps[j][z]
            states.append(z)
        if z != config.z0:
            return None
        energies = tuple(self.energy[s] for s in states)
        dd_sign, dd_log = _signed_log_cached(tuple(_snap(energies)), self.beta)
        table = DividedDifferenceTable(
            energies,
            self.beta,
            max(energies),
            dd_sign * math.exp(dd_log) if dd_sign else 0.0,
            dd_log,
            dd_sign,
        )
        a_sign = real_sign(amp)
        if a_sign == 0 or dd_sign == 0:
            log_w, sign = -math.inf, 0
        else:
            log_w, sign = math.log(abs(amp.real)) + dd_log, a_sign * dd_sign
        return ChainState(config, PathTrace(tuple(states), energies, amp), table, log_w, sign)

    def kind_probability(self, kind: str, q: int, length: int = 0) -> float:
        """Probability of proposing one specific labelled move of ``kind`` from order q."""
        base = 1.0 / len(KINDS)
        if kind == "insert":
            return base / (len(self.lengths) * len(self.by_length[length]) * (q + 1))
        if kind == "remove":
            return base / (len(self.lengths) * (q - length + 1))
        if kind == "swap":
            return base / (q - 1)
        if kind == "rotate":
            return base / 2
        if kind == "jump":
            return base / self.h.dim
        raise ValueError(kind)

    def propose(self, state: ChainState, u: Callable[[], float]) -> Proposal | None:
        """Draw one move.  ``u`` supplies uniform deviates.  None = auto-reject."""
        cfg = state.config
        seq = cfg.sequence
        q = len(seq)
        kind = KINDS[min(int(u() * len(KINDS)), len(KINDS) - 1)]
        if kind == "insert":
            if not self.lengths:
                return None
            length = self.lengths[min(int(u() * len(self.lengths)), len(self.lengths) - 1)]
            group = self.by_length[length]
            word = group[min(int(u() * len(group)), len(group) - 1)]
            pos = min(int(u() * (q + 1)), q)
            if q + length > self.q_cap:
                return Proposal(kind, None, 0.0, 0.0, 0.0, cap_hit=True)
            new = Configuration(cfg.z0, seq[:pos] + word + seq[pos:])
            fwd = self.kind_probability("insert", q, length)
            rev = self.kind_probability("remove", q + length, length)
        elif kind == "remove":
            if not self.lengths:
                return None
            length = self.lengths[min(int(u() * len(self.lengths)), len(self.lengths) - 1)]
            if q < length:
                return None
            pos = min(int(u() * (q - length + 1)), q - length)
            if seq[pos : pos + length] not in self.word_set:
                return None
            new = Configuration(cfg.z0, seq[:pos] + seq[pos + length :])
            fwd = self.kind_probability("remove", q, length)
            rev = self.kind_probability("insert", q - length, length)
        elif kind == "swap":
            if q < 2:
                return None
            pos = min(int(u() * (q - 1)), q - 2)
            if seq[pos] == seq[pos + 1]:
                return None
            new = Configuration(cfg.z0, seq[:pos] + (seq[pos + 1], seq[pos]) + seq[pos + 2 :])
            fwd = rev = self.kind_probability("swap", q)
        elif kind == "rotate":
            if q < 1:
                return None
            states = state.path.states
            if u() < 0.5:
                new = Configuration(states[1], seq[1:] + seq[:1])
            else:
                new = Configuration(states[q - 1], seq[-1:] + seq[:-1])
            fwd = rev = self.kind_probability("rotate", q)
        else:
            if q != 0:
                return None
            z = min(int(u() * self.h.dim), self.h.dim - 1)
            if z == cfg.z0:
                return None
            new = Configuration(z, ())
            fwd = rev = self.kind_probability("jump", q)
        cand = self.state(new)
        if cand is None or cand.sign == 0:
            return Proposal(kind, None, -math.inf, fwd, rev)
        log_ratio = cand.log_abs_weight - state.log_abs_weight + math.log(rev / fwd)
        return Proposal(kind, cand, log_ratio, fwd, rev)


def propose_moves(state: ChainState, h: PmrHamiltonian, rng: np.random.Generator, beta: float, q_cap: int = 30):
    """One proposal from ``state`` using ``rng``; convenience wrapper over :class:`Proposer`."""
    return Proposer(h, beta, q_cap).propose(state, rng.random)


class _Uniforms:
    """Buffered uniform deviates; the draw order is fixed, so streams are reproducible."""

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self.rng = rng
        self.block = block
        self.buf = rng.random(block)
        self.i = 0

    def __call__(self) -> float:
        if self.i == self.block:
            self.buf = self.rng.random(self.block)
            self.i = 0
        x = self.buf[self.i]
        self.i += 1
        return float(x)


def _initial_state(prop: Proposer) -> ChainState:
    z0 = int(np.argmin(prop.h.d0))
    return prop.state(Configuration(z0, ()))


def _audit_balance(prop: Proposer, old: ChainState, p: Proposal, acc_fwd: float) -> None:
    new = p.candidate
    pf = math.exp(old.log_abs_weight) * p.forward_prob
    pr = math.exp(new.log_abs_weight) * p.reverse_prob
    acc_rev = min(1.0, pf / pr)
    lhs, rhs = pf * acc_fwd, pr * acc_rev
    if abs(lhs - rhs) > 1e-9 * max(abs(lhs), abs(rhs)):
        raise AssertionError(f"detailed balance violated for {p.kind}: {lhs!r} vs {rhs!r}")


def _audit_cache(prop: Proposer, st: ChainState) -> None:
    ref = weight(prop.h, st.config, prop.beta)
    if ref.sign != st.sign or abs(ref.log_magnitude - st.log_abs_weight) > 1e-9 * max(1.0, abs(ref.log_magnitude)):
        raise AssertionError(f"cached weight of {st.config} drifted from recomputation")


def run_chain(
    h: PmrHamiltonian,
    params: SamplerParams,
    chain: int,
    n_samples: int,
    observables: Sequence[np.ndarray] = (),
    audit_every: int = 0,
    on_sample: Callable[[int, int, int, int, float], None] | None = None,
    on_visit: Callable[[Configuration], None] | None = None,
) -> dict:
    """Run one chain; returns raw accumulators."""
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_chains)
    u = _Uniforms(np.random.Generator(np.random.PCG64(seeds[chain])))
    prop = Proposer(h, params.beta, params.q_cap, params.max_word_len)
    st = _initial_state(prop)
    obs = [np.asarray(a, dtype=float) for a in observables]
    sign_sum = 0.0
    obs_sums = [0.0] * len(obs)
    cap_hits = accepted = steps = audits = 0
    total_steps = params.burn_in + n_samples * params.thinning
    for step in range(total_steps):
        p = prop.propose(st, u)
        steps += 1
        if p is not None and p.cap_hit:
            cap_hits += 1
        elif p is not None and p.candidate is not None:
            acc = 1.0 if p.log_ratio >= 0 else math.exp(p.log_ratio)
            if u() < acc:
                if audit_every and step % audit_every == 0:
                    _audit_balance(prop, st, p, acc)
                    _audit_cache(prop, p.candidate)
                    audits += 1
                st = p.candidate
                accepted += 1
        if step >= params.burn_in and (step - params.burn_in + 1) % params.thinning == 0:
            s = st.sign
            sign_sum += s
            z0 = st.config.z0
            for k, a in enumerate(obs):
                obs_sums[k] += a[z0] * s
            if on_sample is not None:
                on_sample(chain, step, st.config.q, s, st.log_abs_weight)
            if on_visit is not None:
                on_visit(st.config)
    return {
        "n": n_samples,
        "sign_sum": sign_sum,
        "obs_sums": obs_sums,
        "cap_hits": cap_hits,
        "accepted": accepted,
        "steps": steps,
        "audits": audits,
    }


def _jackknife_ratio(num: np.ndarray, den: np.ndarray) -> Estimate:
    c = len(num)
    total = num.sum() / den.sum()
    if c < 2:
        return Estimate(float(total), 0.0, float(c))
    loo = (num.sum() - num) / (den.sum() - den)
    se = math.sqrt((c - 1) / c * np.sum((loo - loo.mean()) ** 2))
    return Estimate(float(total), se, float(c))


def run(
    h: PmrHamiltonian,
    params: SamplerParams,
    observables: Mapping[str, np.ndarray] | None = None,
    audit_every: int = 0,
    workers: int = 1,
    on_sample: Callable[[int, int, int, int, float], None] | None = None,
) -> SamplerResult:
    """Sample |W|, estimate <sgn> and sign-reweighted diagonal observables.

    Samples are split evenly over ``n_chains`` chains with seeds spawned from
    ``params.seed``; errors come from the spread of per-chain results.  Output
    does not depend on ``workers``.
    """
    observables = dict(observables or {})
    arrays = list(observables.values())
    per_chain = [params.n_samples // params.n_chains] * params.n_chains
    for i in range(params.n_samples % params.n_chains):
        per_chain[i] += 1
    per_chain = [max(n, 1) for n in per_chain]
    jobs = [(h, params, c, per_chain[c], arrays, audit_every) for c in range(params.n_chains)]
    if workers > 1 and on_sample is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_run_job, jobs))
    else:
        raw = [run_chain(*job, on_sample=on_sample) for job in jobs]

    n = np.array([r["n"] for r in raw], dtype=float)
    s = np.array([r["sign_sum"] for r in raw])
    chain_means = s / n
    mean = float(s.sum() / n.sum())
    c = params.n_chains
    se = float(np.std(chain_means, ddof=1) / math.sqrt(c)) if c > 1 else 0.0
    var_single = max(1.0 - mean * mean, 0.0)
    n_eff = var_single / se**2 if se > 0 else float(n.sum())
    sign_est = Estimate(mean, se, n_eff)

    obs_est = {}
    for k, name in enumerate(observables):
        num = np.array([r["obs_sums"][k] for r in raw])
        obs_est[name] = _jackknife_ratio(num, s)

    result = SamplerResult(
        sign=sign_est,
        observables=obs_est,
        cap_hits=sum(r["cap_hits"] for r in raw),
        steps=sum(r["steps"] for r in raw),
        accepted=sum(r["accepted"] for r in raw),
        chain_signs=[float(x) for x in chain_means],
        audits=sum(r["audits"] for r in raw),
    )
    if se > 0 and abs(mean) <= 2 * se:
        msg = f"sign collapse: <sgn> = {mean:.3g} +/- {se:.2g}"
        result.warnings.append(msg)
        warnings.warn(msg, SignCollapseWarning, stacklevel=2)
    if result.cap_fraction > CAP_WARN_FRACTION:
        msg = f"order cap {params.q_cap} hit in {result.cap_fraction:.2e} of moves"
        result.warnings.append(msg)
        warnings.warn(msg, CapHitWarning, stacklevel=2)
    return result


def _run_job(job):
    return run_chain(*job)


def estimate_diagonal_observable(h: PmrHamiltonian, params: SamplerParams, a) -> Estimate:
    """Tr[A e^{-beta H}] / Z for a real diagonal A, by sign reweighting."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        if np.any(np.abs(a.imag) > 0):
            raise ValueError("observable must be real")
        a = a.real
    if a.shape != (h.dim,):
        raise ValueError(f"observable needs {h.dim} entries")
    return run(h, params, {"A": a}).observables["A"]
