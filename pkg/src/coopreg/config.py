"""Scenario configs: a single human-writable JSON document.

Sections: leader, graphs, signal, followers, gains, observer, run.  Numeric
matrices are nested arrays.  Loading is strict: unknown keys, ragged
matrices, and inconsistent dimensions are rejected with the offending key
path, and a loaded scenario serializes back to an equivalent document
(floats survive the round trip exactly).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .observers import LeaderModel
from .regulation import PlantModel
from .simkit import (
    AssumptionChecks,
    FollowerSpec,
    GainDirective,
    Scenario,
    Thresholds,
)
from .topology import SwitchingSignal, SwitchingTopology, WeightedDigraph

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """A config document failed schema validation; message names the key."""


def _require_keys(obj: Any, required: set[str], optional: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}: unknown key {key!r}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}: missing required key {key!r}")


def _matrix(obj: Any, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ConfigError(f"{path}: expected a matrix as a list of rows")
    width = len(obj[0])
    for k, row in enumerate(obj):
        if len(row) != width:
            raise ConfigError(
                f"{path}: ragged matrix, row {k} has {len(row)} entries, expected {width}"
            )
        for c, val in enumerate(row):
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{path}[{k}][{c}]: expected a number")
    return np.array(obj, dtype=float)


def _vector(obj: Any, path: str) -> np.ndarray:
    if not isinstance(obj, list) or any(
        not isinstance(v, (int, float)) or isinstance(v, bool) for v in obj
    ):
        raise ConfigError(f"{path}: expected a flat list of numbers")
    return np.array(obj, dtype=float)


def _positive_int(obj: Any, path: str, minimum: int = 1) -> int:
    if not isinstance(obj, int) or isinstance(obj, bool) or obj < minimum:
        raise ConfigError(f"{path}: expected an integer >= {minimum}")
    return obj


def _number(obj: Any, path: str) -> float:
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        raise ConfigError(f"{path}: expected a number")
    return float(obj)


def _parse_signal(obj: Any) -> SwitchingSignal:
    _require_keys(obj, set(), {"period", "segments", "table", "tail_mode"}, "signal")
    if ("segments" in obj) == ("table" in obj):
        raise ConfigError("signal: exactly one of 'segments' or 'table' is required")
    try:
        if "segments" in obj:
            segs = obj["segments"]
            if not isinstance(segs, list) or not all(
                isinstance(s, list) and len(s) == 2 for s in segs
            ):
                raise ConfigError("signal.segments: expected a list of [mode, length] pairs")
            sig = SwitchingSignal.periodic([(int(m), int(l)) for m, l in segs])
            if "period" in obj and obj["period"] != sig.period:
                raise ConfigError(
                    f"signal.period: {obj['period']} does not match the segment "
                    f"lengths (sum {sig.period})"
                )
            return sig
        table = obj["table"]
        if not isinstance(table, list):
            raise ConfigError("signal.table: expected a list of mode indices")
        tail = _positive_int(obj.get("tail_mode"), "signal.tail_mode")
        return SwitchingSignal.from_table([int(m) for m in table], tail)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"signal: {exc}") from exc


def _parse_gain(obj: Any, path: str) -> GainDirective:
    _require_keys(obj, {"method"}, {"K_x", "Q", "R"}, path)
    method = obj["method"]
    if method == "user":
        if "K_x" not in obj:
            raise ConfigError(f"{path}: user gain requires 'K_x'")
        return GainDirective(method="user", K_x=_matrix(obj["K_x"], f"{path}.K_x"))
    if method == "riccati":
        q = _matrix(obj["Q"], f"{path}.Q") if "Q" in obj else None
        r = _matrix(obj["R"], f"{path}.R") if "R" in obj else None
        return GainDirective(method="riccati", Q=q, R=r)
    raise ConfigError(f"{path}.method: expected 'user' or 'riccati', got {method!r}")


def config_to_scenario(doc: dict, name: str = "scenario") -> Scenario:
    """Validate a config document and build the Scenario it describes."""
    _require_keys(
        doc,
        {"version", "leader", "graphs", "signal", "followers", "gains", "observer", "run"},
        {"name"},
        "config",
    )
    if doc["version"] != CONFIG_VERSION:
        raise ConfigError(f"version: expected {CONFIG_VERSION}, got {doc['version']!r}")
    name = doc.get("name", name)

    _require_keys(doc["leader"], {"S", "v0"}, set(), "leader")
    leader = LeaderModel(
        S=_matrix(doc["leader"]["S"], "leader.S"),
        v0=_vector(doc["leader"]["v0"], "leader.v0"),
    )

    if not isinstance(doc["graphs"], list) or not doc["graphs"]:
        raise ConfigError("graphs: expected a nonempty list of weight matrices")
    try:
        graphs = tuple(
            WeightedDigraph(_matrix(g, f"graphs[{k}]"))
            for k, g in enumerate(doc["graphs"])
        )
        topology = SwitchingTopology(graphs=graphs, signal=_parse_signal(doc["signal"]))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"graphs/signal: {exc}") from exc

    if not isinstance(doc["followers"], list):
        raise ConfigError("followers: expected a list")
    if not isinstance(doc["gains"], list):
        raise ConfigError("gains: expected a list")
    if len(doc["gains"]) != len(doc["followers"]):
        raise ConfigError(
            f"gains: {len(doc['gains'])} entries for {len(doc['followers'])} followers"
        )
    followers = []
    for k, (fobj, gobj) in enumerate(zip(doc["followers"], doc["gains"])):
        fpath = f"followers[{k}]"
        _require_keys(fobj, {"A", "B", "C", "D", "E", "F", "x0"}, set(), fpath)
        try:
            plant = PlantModel(
                **{key: _matrix(fobj[key], f"{fpath}.{key}") for key in "ABCDEF"}
            )
            followers.append(
                FollowerSpec(
                    plant=plant,
                    x0=_vector(fobj["x0"], f"{fpath}.x0"),
                    gain=_parse_gain(gobj, f"gains[{k}]"),
                )
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{fpath}: {exc}") from exc

    _require_keys(doc["observer"], {"mode"}, {"eta0", "s0"}, "observer")
    mode = doc["observer"]["mode"]
    if mode not in ("distributed", "adaptive"):
        raise ConfigError(f"observer.mode: expected 'distributed' or 'adaptive', got {mode!r}")
    eta0 = None
    if "eta0" in doc["observer"]:
        eta0 = tuple(
            _vector(e, f"observer.eta0[{k}]") for k, e in enumerate(doc["observer"]["eta0"])
        )
    s0 = None
    if "s0" in doc["observer"]:
        s0 = tuple(
            _matrix(s, f"observer.s0[{k}]") for k, s in enumerate(doc["observer"]["s0"])
        )
    if mode == "adaptive" and s0 is None:
        s0 = tuple(np.zeros((leader.q, leader.q)) for _ in followers)

    run_obj = doc["run"]
    _require_keys(run_obj, {"horizon"}, {"checks", "thresholds", "regulator_tol"}, "run")
    horizon = _positive_int(run_obj["horizon"], "run.horizon", minimum=0)
    checks = AssumptionChecks()
    if "checks" in run_obj:
        cobj = run_obj["checks"]
        _require_keys(
            cobj, set(),
            {"connectivity", "connectivity_window", "connectivity_horizon",
             "leader_spectral", "stabilizability", "regulator"},
            "run.checks",
        )
        checks = AssumptionChecks(
            connectivity=bool(cobj.get("connectivity", True)),
            connectivity_window=_positive_int(
                cobj.get("connectivity_window", 0), "run.checks.connectivity_window", 0
            ),
            connectivity_horizon=(
                _positive_int(cobj["connectivity_horizon"], "run.checks.connectivity_horizon", 0)
                if "connectivity_horizon" in cobj else None
            ),
            leader_spectral=bool(cobj.get("leader_spectral", True)),
            stabilizability=bool(cobj.get("stabilizability", True)),
            regulator=bool(cobj.get("regulator", True)),
        )
    thresholds = Thresholds()
    if "thresholds" in run_obj:
        tobj = run_obj["thresholds"]
        _require_keys(tobj, set(), {"final", "rate"}, "run.thresholds")
        thresholds = Thresholds(
            final=_number(tobj.get("final", 1e-6), "run.thresholds.final"),
            rate=_number(tobj.get("rate", 0.999), "run.thresholds.rate"),
        )
    regulator_tol = _number(run_obj.get("regulator_tol", 1e-9), "run.regulator_tol")

    try:
        return Scenario(
            name=name,
            leader=leader,
            topology=topology,
            followers=tuple(followers),
            observer_mode=mode,
            eta0=eta0,
            s0=s0,
            horizon=horizon,
            checks=checks,
            thresholds=thresholds,
            regulator_tol=regulator_tol,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def scenario_to_config(scenario: Scenario) -> dict:
    """Serialize a Scenario back into a config document."""
    sig = scenario.topology.signal
    if sig.is_periodic:
        signal: dict = {"period": sig.period, "segments": [[m, l] for m, l in sig.segments]}
    else:
        signal = {"table": list(sig.table), "tail_mode": sig.tail_mode}
    gains = []
    for f in scenario.followers:
        if f.gain.method == "user":
            gains.append({"method": "user", "K_x": f.gain.K_x.tolist()})
        else:
            entry: dict = {"method": "riccati"}
            if f.gain.Q is not None:
                entry["Q"] = np.asarray(f.gain.Q).tolist()
            if f.gain.R is not None:
                entry["R"] = np.asarray(f.gain.R).tolist()
            gains.append(entry)
    observer: dict = {"mode": scenario.observer_mode}
    if scenario.eta0 is not None:
        observer["eta0"] = [e.tolist() for e in scenario.eta0]
    if scenario.s0 is not None:
        observer["s0"] = [s.tolist() for s in scenario.s0]
    checks = scenario.checks
    doc = {
        "version": CONFIG_VERSION,
        "name": scenario.name,
        "leader": {"S": scenario.leader.S.tolist(), "v0": scenario.leader.v0.tolist()},
        "graphs": [g.weights.tolist() for g in scenario.topology.graphs],
        "signal": signal,
        "followers": [
            {
                **{key: getattr(f.plant, key).tolist() for key in "ABCDEF"},
                "x0": f.x0.tolist(),
            }
            for f in scenario.followers
        ],
        "gains": gains,
        "observer": observer,
        "run": {
            "horizon": scenario.horizon,
            "checks": {
                "connectivity": checks.connectivity,
                "connectivity_window": checks.connectivity_window,
                **(
                    {"connectivity_horizon": checks.connectivity_horizon}
                    if checks.connectivity_horizon is not None else {}
                ),
                "leader_spectral": checks.leader_spectral,
                "stabilizability": checks.stabilizability,
                "regulator": checks.regulator,
            },
            "thresholds": {
                "final": scenario.thresholds.final,
                "rate": scenario.thresholds.rate,
            },
            "regulator_tol": scenario.regulator_tol,
        },
    }
    return doc


def load_config(path: str | Path) -> Scenario:
    """Load and validate a scenario config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_to_scenario(doc, name=path.stem)


def save_config(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(scenario_to_config(scenario), indent=2) + "\n", encoding="utf-8"
    )
