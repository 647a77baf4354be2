"""Closed-loop scenario orchestration.

A Scenario bundles the leader, the switching topology, per-follower plants
with gain directives, and observer settings.  Running it advances, per tick
and strictly in this order, (1) the observer bank, (2) the control inputs,
(3) the plants and the leader, with every right-hand side evaluated on
time-t values and the time-t graph, so the semantics are synchronous.

Runs are deterministic: identical scenarios produce identical trajectory
logs, and the CSV export is byte-stable.  A magnitude guard aborts a run as
soon as any state exceeds 1e12 in absolute value; a non-contracting leader
grows at most polynomially, so only genuine divergence trips it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .observers import (
    DecayFit,
    LeaderModel,
    ObserverBank,
    fit_decay,
    observer_step,
    spectral_radius,
)
from .regulation import (
    ControllerGains,
    GainSynthesisError,
    PlantModel,
    RegulatorUnsolvableError,
    build_controller,
    control_input,
    plant_step,
    solve_regulator_equations,
    synthesize_stabilizing_gain,
)
from .topology import DimensionError, SwitchingTopology, is_jointly_connected, _readonly

OVERFLOW_LIMIT = 1e12


class OverflowAbort(RuntimeError):
    """A simulated magnitude exceeded the overflow guard."""

    def __init__(self, t: int, magnitude: float):
        super().__init__(
            f"state magnitude {magnitude:.3e} exceeded {OVERFLOW_LIMIT:.0e} "
            f"at time step {t}"
        )
        self.t = t
        self.magnitude = magnitude


@dataclass(frozen=True)
class GainDirective:
    """Per-follower gain choice: a user-supplied K_x or Riccati synthesis."""

    method: str = "riccati"
    K_x: np.ndarray | None = None
    Q: np.ndarray | None = None
    R: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in ("user", "riccati"):
            raise ValueError(f"unknown gain method {self.method!r}")
        if (self.method == "user") != (self.K_x is not None):
            raise ValueError("user method requires K_x; riccati must not set it")


@dataclass(frozen=True)
class AssumptionChecks:
    """Which validation checks to run and their parameters."""

    connectivity: bool = True
    connectivity_window: int = 0
    connectivity_horizon: int | None = None
    leader_spectral: bool = True
    stabilizability: bool = True
    regulator: bool = True


@dataclass(frozen=True)
class Thresholds:
    """Convergence pass criteria: final value and fitted rate bounds."""

    final: float = 1e-6
    rate: float = 0.999


@dataclass(frozen=True, eq=False)
class FollowerSpec:
    plant: PlantModel
    x0: np.ndarray
    gain: GainDirective = field(default_factory=GainDirective)

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape[0] != self.plant.n:
            raise DimensionError(
                f"initial state has dim {x0.shape[0]}, plant expects {self.plant.n}"
            )
        object.__setattr__(self, "x0", _readonly(x0))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Complete description of one closed-loop simulation."""

    name: str
    leader: LeaderModel
    topology: SwitchingTopology
    followers: tuple[FollowerSpec, ...]
    observer_mode: str = "distributed"
    eta0: tuple[np.ndarray, ...] | None = None
    s0: tuple[np.ndarray, ...] | None = None
    horizon: int = 100
    checks: AssumptionChecks = field(default_factory=AssumptionChecks)
    thresholds: Thresholds = field(default_factory=Thresholds)
    regulator_tol: float = 1e-9

    def __post_init__(self):
        if self.observer_mode not in ("distributed", "adaptive"):
            raise ValueError(f"unknown observer mode {self.observer_mode!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        followers = tuple(self.followers)
        if len(followers) != self.topology.n_followers:
            raise DimensionError(
                f"{len(followers)} followers for a topology with "
                f"{self.topology.n_followers} follower nodes"
            )
        if not followers:
            raise ValueError("scenario needs at least one follower")
        q = self.leader.q
        for k, f in enumerate(followers):
            if f.plant.q != q:
                raise DimensionError(
                    f"follower {k + 1} couples to leader dim {f.plant.q}, "
                    f"leader has q={q}"
                )
        object.__setattr__(self, "followers", followers)
        if self.eta0 is not None:
            eta0 = tuple(_readonly(np.asarray(e, dtype=float).reshape(-1)) for e in self.eta0)
            if len(eta0) != len(followers) or any(e.shape[0] != q for e in eta0):
                raise DimensionError("eta0 must hold one q-vector per follower")
            object.__setattr__(self, "eta0", eta0)
        if self.s0 is not None:
            if self.observer_mode != "adaptive":
                raise ValueError("s0 only applies to the adaptive observer")
            s0 = tuple(_readonly(np.asarray(s, dtype=float)) for s in self.s0)
            if len(s0) != len(followers) or any(s.shape != (q, q) for s in s0):
                raise DimensionError("s0 must hold one q x q matrix per follower")
            object.__setattr__(self, "s0", s0)

    @property
    def n_followers(self) -> int:
        return len(self.followers)

    def initial_bank(self) -> ObserverBank:
        q = self.leader.q
        n = self.n_followers
        eta = np.vstack(self.eta0) if self.eta0 is not None else np.zeros((n, q))
        if self.observer_mode == "adaptive":
            s = (np.stack(self.s0) if self.s0 is not None
                 else np.zeros((n, q, q)))
            return ObserverBank(mode="adaptive", eta=eta, s_est=s)
        return ObserverBank(mode="distributed", eta=eta)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __bool__(self) -> bool:
        return self.passed


def synthesize_gains(scenario: Scenario) -> list[ControllerGains]:
    """Solve the regulator equations and certify a gain for every follower."""
    out = []
    for k, f in enumerate(scenario.followers, start=1):
        solution = solve_regulator_equations(
            f.plant, scenario.leader.S, tol=scenario.regulator_tol
        )
        K_x, _ = synthesize_stabilizing_gain(
            f.plant.A, f.plant.B, K=f.gain.K_x, Q=f.gain.Q, R=f.gain.R,
            label=f"follower {k}",
        )
        out.append(build_controller(f.plant, scenario.leader.S, K_x, solution=solution))
    return out


def validate_scenario(scenario: Scenario) -> list[CheckResult]:
    """Run the requested assumption checks; reports, never raises.

    Checks, in order: joint connectivity of the switching topology,
    leader spectral radius <= 1, per-follower stabilizability (gain
    certification), and regulator-equation solvability.
    """
    checks = scenario.checks
    results: list[CheckResult] = []
    if checks.connectivity:
        res = is_jointly_connected(
            scenario.topology, checks.connectivity_window, checks.connectivity_horizon
        )
        if res.connected:
            detail = (
                f"every follower reachable from the leader in all union windows "
                f"of length {checks.connectivity_window + 1} "
                f"(verified up to horizon {res.checked_up_to})"
            )
        else:
            t, node = res.witness
            detail = f"node {node} unreachable in the union window starting at t={t}"
        results.append(CheckResult("jointly_connected", res.connected, detail))
    if checks.leader_spectral:
        rho = scenario.leader.rho
        results.append(
            CheckResult(
                "leader_spectral_radius",
                scenario.leader.rho_le_one,
                f"rho(S) = {rho:.6g}",
            )
        )
    if checks.stabilizability:
        for k, f in enumerate(scenario.followers, start=1):
            try:
                _, radius = synthesize_stabilizing_gain(
                    f.plant.A, f.plant.B, K=f.gain.K_x, Q=f.gain.Q, R=f.gain.R,
                    label=f"follower {k}",
                )
                results.append(
                    CheckResult(
                        f"stabilizable_follower_{k}", True,
                        f"closed-loop spectral radius {radius:.6g}",
                    )
                )
            except GainSynthesisError as exc:
                results.append(CheckResult(f"stabilizable_follower_{k}", False, str(exc)))
    if checks.regulator:
        for k, f in enumerate(scenario.followers, start=1):
            try:
                sol = solve_regulator_equations(
                    f.plant, scenario.leader.S, tol=scenario.regulator_tol
                )
                results.append(
                    CheckResult(
                        f"regulator_solvable_follower_{k}", True,
                        f"residual {sol.residual:.3e}",
                    )
                )
            except RegulatorUnsolvableError as exc:
                results.append(
                    CheckResult(f"regulator_solvable_follower_{k}", False, str(exc))
                )
    return results


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """Time-indexed record of one run; horizon + 1 records.

    Per-follower series are lists indexed by follower (dims may differ);
    the derived norm series stack all followers.
    """

    scenario_name: str
    observer_mode: str
    t: np.ndarray                      # (T+1,)
    sigma: np.ndarray                  # (T+1,) active mode per step
    v: np.ndarray                      # (T+1, q)
    x: list[np.ndarray]                # per follower (T+1, n_i)
    eta: np.ndarray                    # (T+1, N, q)
    s_est: np.ndarray | None           # (T+1, N, q, q) in adaptive mode
    u: list[np.ndarray]                # per follower (T+1, m_i)
    e: list[np.ndarray]                # per follower (T+1, p_i)
    eta_tilde_norm: np.ndarray         # (T+1,)
    s_tilde_norm: np.ndarray | None    # (T+1,)
    e_norms: np.ndarray                # (T+1, N)

    @property
    def horizon(self) -> int:
        return self.t.shape[0] - 1

    @property
    def n_followers(self) -> int:
        return self.eta.shape[1]


def run(scenario: Scenario, gains: Sequence[ControllerGains] | None = None) -> TrajectoryLog:
    """Simulate the closed loop and log every series.

    Validation is the caller's concern (see validate_scenario); this
    function only refuses to continue when states overflow or when gain
    synthesis itself fails.
    """
    if gains is None:
        gains = synthesize_gains(scenario)
    leader = scenario.leader
    n = scenario.n_followers
    q = leader.q
    horizon = scenario.horizon
    bank = scenario.initial_bank()
    v = leader.v0.copy()
    x = [f.x0.copy() for f in scenario.followers]

    t_arr = np.arange(horizon + 1)
    sigma = np.empty(horizon + 1, dtype=int)
    v_log = np.empty((horizon + 1, q))
    x_log = [np.empty((horizon + 1, f.plant.n)) for f in scenario.followers]
    eta_log = np.empty((horizon + 1, n, q))
    s_log = (np.empty((horizon + 1, n, q, q))
             if scenario.observer_mode == "adaptive" else None)
    u_log = [np.empty((horizon + 1, f.plant.m)) for f in scenario.followers]
    e_log = [np.empty((horizon + 1, f.plant.p)) for f in scenario.followers]
    eta_tilde = np.empty(horizon + 1)
    s_tilde = np.empty(horizon + 1) if s_log is not None else None
    e_norms = np.empty((horizon + 1, n))

    for t in range(horizon + 1):
        adj = scenario.topology.adjacency_at(t)
        sigma[t] = scenario.topology.mode_at(t)
        v_log[t] = v
        eta_log[t] = bank.eta
        if s_log is not None:
            s_log[t] = bank.s_est
            s_tilde[t] = np.linalg.norm(bank.s_est - leader.S[None, :, :])
        eta_tilde[t] = np.linalg.norm(bank.eta - v[None, :])
        for i, (f, g) in enumerate(zip(scenario.followers, gains)):
            u_i = control_input(g, x[i], bank.eta[i])
            x_next, e_i = plant_step(f.plant, x[i], u_i, v)
            x_log[i][t] = x[i]
            u_log[i][t] = u_i
            e_log[i][t] = e_i
            e_norms[t, i] = np.linalg.norm(e_i)
            if t < horizon:
                x[i] = x_next
        magnitude = max(
            float(np.max(np.abs(v))),
            float(np.max(np.abs(bank.eta))),
            max(float(np.max(np.abs(xl[t]))) for xl in x_log),
            float(np.max(np.abs(bank.s_est))) if bank.s_est is not None else 0.0,
        )
        # the comparison is inverted so that NaN states also abort
        if not magnitude <= OVERFLOW_LIMIT:
            raise OverflowAbort(t, magnitude)
        if t < horizon:
            bank = observer_step(leader, v, bank, adj)
            v = leader.advance(v)

    return TrajectoryLog(
        scenario_name=scenario.name,
        observer_mode=scenario.observer_mode,
        t=t_arr,
        sigma=sigma,
        v=v_log,
        x=x_log,
        eta=eta_log,
        s_est=s_log,
        u=u_log,
        e=e_log,
        eta_tilde_norm=eta_tilde,
        s_tilde_norm=s_tilde,
        e_norms=e_norms,
    )


@dataclass(frozen=True)
class SeriesReport:
    """Convergence verdict for one error series."""

    name: str
    final: float
    fit: DecayFit
    converged: bool
    note: str


@dataclass(frozen=True)
class ConvergenceReport:
    series: tuple[SeriesReport, ...]
    thresholds: Thresholds
    checks: tuple[CheckResult, ...] = ()

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.series)


def _judge(name: str, values: np.ndarray, thresholds: Thresholds) -> SeriesReport:
    # fp noise in an error series scales with the magnitudes it was computed
    # from, so lift the fitting floor accordingly for large-amplitude runs
    floor = max(1e-13, 1e-12 * float(np.max(values, initial=0.0)))
    fit = fit_decay(values, floor=floor)
    final = float(values[-1])
    if fit.floored:
        return SeriesReport(name, final, fit, True, "converged (floor)")
    if math.isnan(fit.rate):
        converged = final < thresholds.final
        return SeriesReport(name, final, fit, converged, "insufficient samples for a rate fit")
    converged = fit.rate < thresholds.rate and final < thresholds.final
    note = "converged" if converged else "not converged"
    return SeriesReport(name, final, fit, converged, note)


def analyze(
    log: TrajectoryLog,
    thresholds: Thresholds = Thresholds(),
    checks: Sequence[CheckResult] = (),
) -> ConvergenceReport:
    """Fit geometric rates on every error series and compare with thresholds."""
    series = [_judge("eta_tilde_norm", log.eta_tilde_norm, thresholds)]
    if log.s_tilde_norm is not None:
        series.append(_judge("s_tilde_norm", log.s_tilde_norm, thresholds))
    for i in range(log.n_followers):
        series.append(_judge(f"e_norm_{i + 1}", log.e_norms[:, i], thresholds))
    return ConvergenceReport(
        series=tuple(series), thresholds=thresholds, checks=tuple(checks)
    )


def csv_columns(log: TrajectoryLog) -> list[str]:
    """Stable column order of the trajectory CSV.

    t and sigma first; then the leader components v_0_*; then per follower
    i = 1..N its x_i_*, eta_i_*, s_i_* (adaptive only, row-major), u_i_*,
    e_i_*; finally the derived norms eta_tilde_norm, s_tilde_norm (adaptive
    only) and e_norm_i.
    """
    q = log.v.shape[1]
    cols = ["t", "sigma"] + [f"v_0_{c}" for c in range(q)]
    for i in range(log.n_followers):
        k = i + 1
        cols += [f"x_{k}_{c}" for c in range(log.x[i].shape[1])]
        cols += [f"eta_{k}_{c}" for c in range(q)]
        if log.s_est is not None:
            cols += [f"s_{k}_{c}" for c in range(q * q)]
        cols += [f"u_{k}_{c}" for c in range(log.u[i].shape[1])]
        cols += [f"e_{k}_{c}" for c in range(log.e[i].shape[1])]
    cols.append("eta_tilde_norm")
    if log.s_tilde_norm is not None:
        cols.append("s_tilde_norm")
    cols += [f"e_norm_{i + 1}" for i in range(log.n_followers)]
    return cols


def write_trajectory_csv(log: TrajectoryLog, fh: IO[str]) -> None:
    """Write the log as CSV with full round-trip float formatting."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(csv_columns(log))
    for t in range(log.horizon + 1):
        row: list[str] = [str(int(log.t[t])), str(int(log.sigma[t]))]
        row += [repr(float(val)) for val in log.v[t]]
        for i in range(log.n_followers):
            row += [repr(float(val)) for val in log.x[i][t]]
            row += [repr(float(val)) for val in log.eta[t, i]]
            if log.s_est is not None:
                row += [repr(float(val)) for val in log.s_est[t, i].reshape(-1)]
            row += [repr(float(val)) for val in log.u[i][t]]
            row += [repr(float(val)) for val in log.e[i][t]]
        row.append(repr(float(log.eta_tilde_norm[t])))
        if log.s_tilde_norm is not None:
            row.append(repr(float(log.s_tilde_norm[t])))
        row += [repr(float(log.e_norms[t, i])) for i in range(log.n_followers)]
        writer.writerow(row)


def _fit_json(fit: DecayFit) -> dict:
    def clean(x: float) -> float | None:
        return None if math.isnan(x) else x

    return {
        "rate": clean(fit.rate),
        "prefactor": clean(fit.prefactor),
        "residual": clean(fit.residual),
        "n_samples": fit.n_samples,
        "floored": fit.floored,
    }


def report_to_dict(report: ConvergenceReport, scenario_name: str = "",
                   observer_mode: str = "", horizon: int | None = None) -> dict:
    return {
        "scenario": scenario_name,
        "observer_mode": observer_mode,
        "horizon": horizon,
        "thresholds": {"final": report.thresholds.final, "rate": report.thresholds.rate},
        "checks": [
            {"name": c.name, "passed": c.passed, "detail": c.detail}
            for c in report.checks
        ],
        "series": [
            {"name": s.name, "final": s.final, "converged": s.converged,
             "note": s.note, **_fit_json(s.fit)}
            for s in report.series
        ],
        "converged": report.converged,
    }


def write_report_json(report_dict: dict, fh: IO[str]) -> None:
    json.dump(report_dict, fh, indent=2, sort_keys=False)
    fh.write("\n")
