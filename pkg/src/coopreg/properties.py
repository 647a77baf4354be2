"""Randomized property suites over generated switching networks.

Each suite draws deterministic trials (trial rng = base seed + trial index)
from a scenario family with verified joint connectivity: a spanning tree
rooted at the leader is split across 2-3 modes, every follower gets a direct
leader link with probability 0.5, extra edges appear with probability 0.3,
and the periodic schedule cycles all modes with dwell 1 or 2.  The family is
deliberately compact (period <= 6) so that error decay is fast enough for
tight final-value assertions.

Suites:
  consensus   -- averaging over the full node set collapses the spread of
                 random initial vectors to a common value
  lemma2      -- products of follower blocks contract geometrically
  lemma3      -- the same products Kronecker-coupled with a leader matrix of
                 spectral radius <= 1 still contract
  lemma4      -- a geometrically vanishing input does not destroy geometric
                 convergence of a stable switched system
  kron        -- direct products of (Lambda kron S) factors agree with the
                 factored form (product of Lambdas) kron S^t
  equivalence -- bank simulation minus the leader trajectory equals the
                 compact error-form simulation, both observer modes
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observers import (
    ErrorState,
    LeaderModel,
    ObserverBank,
    error_form_step,
    fit_decay,
    observer_step,
    perturbed_convergence_check,
    spectral_radius,
)
from .topology import (
    SwitchingSignal,
    SwitchingTopology,
    WeightedDigraph,
    consensus_step,
    is_jointly_connected,
    transition_product,
)


@dataclass(frozen=True)
class TrialResult:
    index: int
    passed: bool
    detail: str


def random_topology(
    rng: np.random.Generator,
    n_followers: int | None = None,
) -> SwitchingTopology:
    """Draw a jointly connected switching topology from the trial family."""
    n = int(rng.integers(2, 7)) if n_followers is None else n_followers
    n_modes = int(rng.integers(2, 4))
    dwell = int(rng.integers(1, 3))
    mats = [np.zeros((n + 1, n + 1)) for _ in range(n_modes)]
    for i in range(1, n + 1):
        parent = int(rng.integers(0, i))
        mats[int(rng.integers(0, n_modes))][i, parent] = rng.uniform(0.5, 1.5)
    for i in range(1, n + 1):
        if rng.random() < 0.5:
            mats[int(rng.integers(0, n_modes))][i, 0] = rng.uniform(0.5, 1.5)
    for i in range(1, n + 1):
        for j in range(n + 1):
            if i != j and rng.random() < 0.3:
                mats[int(rng.integers(0, n_modes))][i, j] = rng.uniform(0.5, 1.5)
    signal = SwitchingSignal.periodic([(m + 1, dwell) for m in range(n_modes)])
    return SwitchingTopology(
        graphs=tuple(WeightedDigraph(np.where(w > 0, w, 0.0)) for w in mats),
        signal=signal,
    )


def disconnected_topology(n_followers: int = 4, isolated: int = 3) -> SwitchingTopology:
    """A two-mode schedule in which one follower never has an in-edge."""
    edges_a = [(0, i) for i in range(1, n_followers + 1) if i != isolated]
    edges_b = [(1, i) for i in range(2, n_followers + 1) if i != isolated]
    return SwitchingTopology(
        graphs=(
            WeightedDigraph.from_edges(n_followers + 1, edges_a),
            WeightedDigraph.from_edges(n_followers + 1, edges_b),
        ),
        signal=SwitchingSignal.periodic([(1, 1), (2, 1)]),
    )


def random_leader(
    rng: np.random.Generator,
    q: int | None = None,
    rho: float | None = None,
) -> LeaderModel:
    """Random leader with spectral radius scaled to ``rho``.

    By default rho is 1 with probability 0.3, otherwise uniform in
    [0.7, 1.0].  A Gaussian draw is almost surely diagonalizable, so powers
    of the scaled matrix stay bounded when rho <= 1.
    """
    q = int(rng.integers(2, 5)) if q is None else q
    if rho is None:
        rho = 1.0 if rng.random() < 0.3 else float(rng.uniform(0.7, 1.0))
    while True:
        m = rng.normal(size=(q, q))
        r = spectral_radius(m)
        if r > 1e-6:
            break
    return LeaderModel(S=m * (rho / r), v0=rng.normal(size=q))


def connectivity_window(topo: SwitchingTopology) -> int:
    """The family's guaranteed window: one full period minus one."""
    return topo.signal.period - 1


def simulate_observer_norms(
    topo: SwitchingTopology,
    leader: LeaderModel,
    bank: ObserverBank,
    horizon: int,
) -> dict[str, np.ndarray]:
    """Run an observer bank against the leader and record error norms."""
    v = leader.v0.copy()
    eta_norm = np.empty(horizon + 1)
    s_norm = np.empty(horizon + 1) if bank.mode == "adaptive" else None
    for t in range(horizon + 1):
        eta_norm[t] = np.linalg.norm(bank.eta - v[None, :])
        if s_norm is not None:
            s_norm[t] = np.linalg.norm(bank.s_est - leader.S[None, :, :])
        if t == horizon:
            break
        bank = observer_step(leader, v, bank, topo.adjacency_at(t))
        v = leader.advance(v)
    out = {"eta_tilde": eta_norm}
    if s_norm is not None:
        out["s_tilde"] = s_norm
    return out


def bank_vs_error_form(
    topo: SwitchingTopology,
    leader: LeaderModel,
    bank: ObserverBank,
    horizon: int,
) -> float:
    """Max abs deviation between the two error routes over a whole run."""
    v = leader.v0.copy()
    err = ErrorState.from_bank(bank, v, leader)
    dev = 0.0
    for t in range(horizon):
        adj = topo.adjacency_at(t)
        bank = observer_step(leader, v, bank, adj)
        err = error_form_step(err, adj, leader, v)
        v = leader.advance(v)
        direct = ErrorState.from_bank(bank, v, leader)
        dev = max(dev, float(np.max(np.abs(direct.eta_tilde - err.eta_tilde))))
        if err.s_tilde is not None:
            dev = max(dev, float(np.max(np.abs(direct.s_tilde - err.s_tilde))))
    return dev


def consensus_trial(seed: int, horizon_factor: int = 60, n_vectors: int = 100) -> TrialResult:
    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    window = connectivity_window(topo)
    if not is_jointly_connected(topo, window):
        return TrialResult(seed, False, "generated topology failed connectivity")
    x = rng.normal(size=(topo.node_count, n_vectors))
    horizon = horizon_factor * topo.n_followers * (window + 1)
    for t in range(horizon):
        x = consensus_step(topo.adjacency_at(t), x)
    spread = float(np.max(x.max(axis=0) - x.min(axis=0)))
    return TrialResult(
        seed, spread < 1e-9,
        f"spread {spread:.3e} after {horizon} steps ({n_vectors} initial vectors)",
    )


def lemma2_trial(seed: int, horizon: int = 240) -> TrialResult:
    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    norms = np.array(
        [np.linalg.norm(transition_product(topo, 0, k), 2) for k in range(horizon + 1)]
    )
    fit = fit_decay(norms)
    passed = fit.decaying
    return TrialResult(
        seed, passed,
        f"follower-block product rate {fit.rate:.4f} residual {fit.residual:.3f}",
    )


def lemma3_trial(seed: int, horizon: int = 240) -> TrialResult:
    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    leader = random_leader(rng)
    z = rng.normal(size=topo.n_followers * leader.q)
    err = ErrorState(eta_tilde=z)
    norms = np.empty(horizon + 1)
    norms[0] = np.linalg.norm(z)
    for t in range(horizon):
        err = error_form_step(err, topo.adjacency_at(t), leader, np.zeros(leader.q))
        norms[t + 1] = np.linalg.norm(err.eta_tilde)
    fit = fit_decay(norms)
    return TrialResult(
        seed, fit.decaying,
        f"coupled product rate {fit.rate:.4f} (rho(S) = {leader.rho:.3f})",
    )


def lemma4_trial(seed: int, horizon: int = 300) -> TrialResult:
    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    leader = random_leader(rng)
    dim = topo.n_followers * leader.q
    d0 = rng.normal(size=dim)
    c_seq = lambda t: np.kron(topo.adjacency_at(t).lambda_block, leader.S)
    d_seq = lambda t: (0.9**t) * d0
    fit = perturbed_convergence_check(c_seq, d_seq, rng.normal(size=dim), horizon)
    return TrialResult(
        seed, fit.decaying,
        f"perturbed system rate {fit.rate:.4f} residual {fit.residual:.3f}",
    )


def kron_trial(seed: int, horizon: int = 40, tol: float = 1e-9) -> TrialResult:
    from .observers import kron_factorization_check

    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    leader = random_leader(rng)
    dev = kron_factorization_check(topo, leader, horizon)
    return TrialResult(seed, dev < tol, f"max factorization deviation {dev:.3e}")


def equivalence_trial(seed: int, horizon: int = 100, tol: float = 1e-10) -> TrialResult:
    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    leader = random_leader(rng)
    n, q = topo.n_followers, leader.q
    dist = ObserverBank(mode="distributed", eta=rng.normal(size=(n, q)))
    adap = ObserverBank(
        mode="adaptive",
        eta=rng.normal(size=(n, q)),
        s_est=leader.S[None, :, :] + rng.uniform(-0.3, 0.3, size=(n, q, q)),
    )
    dev = max(
        bank_vs_error_form(topo, leader, dist, horizon),
        bank_vs_error_form(topo, leader, adap, horizon),
    )
    return TrialResult(seed, dev < tol, f"max route deviation {dev:.3e}")


SUITES = {
    "consensus": consensus_trial,
    "lemma2": lemma2_trial,
    "lemma3": lemma3_trial,
    "lemma4": lemma4_trial,
    "kron": kron_trial,
    "equivalence": equivalence_trial,
}


def run_suite(name: str, trials: int, seed: int = 0) -> list[TrialResult]:
    """Run ``trials`` deterministic trials of the named suite."""
    if name not in SUITES:
        known = ", ".join(sorted(SUITES))
        raise KeyError(f"unknown suite {name!r} (known: {known})")
    trial = SUITES[name]
    results = []
    for k in range(trials):
        outcome = trial(seed + k)
        results.append(TrialResult(k, outcome.passed, outcome.detail))
    return results
