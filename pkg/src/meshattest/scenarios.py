"""Canned experiment definitions and scenario-config files.

Each ``run_*`` function reproduces one of the reference experiment families:
heartbeat propagation runtime across static tree topologies, attestation
runtime with and without device identification, robustness and leader
election under random-waypoint mobility, and the capture-security suite.
All of them are thin layers over :class:`ScenarioConfig` + :class:`Simulation`
and return plain row tuples ready for CSV export.

Scenario files are JSON documents mirroring :class:`ScenarioConfig`; see
``load_config`` for the accepted fields.
"""

from __future__ import annotations

import json
from statistics import mean, median

import numpy as np

from . import wire
from .netsim.adversary import TakeOffline, action_from_dict
from .netsim.config import AttestationPlan, ConfigError, ScenarioConfig
from .netsim.sim import run_scenario

# Published dynamic setup: heartbeat and leader-election phases of 2.5 minutes
# each, catching physical attacks that need more than 10 minutes offline.
DYNAMIC_AREA = (1000.0, 1000.0)
DYNAMIC_RANGE = 50.0
DYNAMIC_SPEED = (5.0, 15.0)
DYNAMIC_DELTA_HB = 150.0
DYNAMIC_DELTA_LE = 150.0
DYNAMIC_DELTA = DYNAMIC_DELTA_HB + DYNAMIC_DELTA_LE
DYNAMIC_T_ATTACK = 600.0
POLL_INTERVAL = 10.0


# ---------------------------------------------------------------------------
# static heartbeat runtime (tree topologies)

def heartbeat_static_config(n: int, arity: int, *, crypto: str = "null",
                            delta: float = 60.0) -> ScenarioConfig:
    """Two heartbeat periods: the first includes all key exchanges."""
    return ScenarioConfig(
        n=n, topology={"kind": "tree", "arity": arity},
        delta=delta, periods=2, crypto=crypto,
        name=f"hb-static-{arity}ary-n{n}",
        debug=False, per_device_period_bytes=(n <= 20000),
    )


def run_heartbeat_sweep(arities, n_list, seed: int = 0,
                        crypto: str = "null") -> list[tuple]:
    """Rows of (arity, n, first_period_s, steady_period_s)."""
    rows = []
    for arity in arities:
        for n in n_list:
            m = run_scenario(heartbeat_static_config(n, arity, crypto=crypto), seed)
            rows.append((arity, n, m.completion(2), m.completion(3)))
    return rows


# ---------------------------------------------------------------------------
# static attestation runtime

def attestation_static_config(n: int, arity: int, *, informative: bool,
                              mode: str = "tree", software: bool = True,
                              crypto: str = "null", s: int = 128) -> ScenarioConfig:
    # one long period so the whole attestation runs under a single heartbeat
    delta = 600.0
    return ScenarioConfig(
        n=n, topology={"kind": "tree", "arity": arity},
        delta=delta, t_attack=2 * delta, periods=2, crypto=crypto,
        attestation=AttestationPlan(
            at_time=2 * delta + 50.0, entry=1, mode=mode,
            informative=informative, software=software, s=s),
        name=f"att-{arity}ary-n{n}-{'info' if informative else 'bool'}",
        debug=False, per_device_period_bytes=(n <= 20000),
    )


def run_attestation_sweep(arities, n_list, informative_values=(False, True),
                          seed: int = 0, crypto: str = "null") -> list[tuple]:
    """Rows of (arity, n, informative, completion_s)."""
    rows = []
    for arity in arities:
        for n in n_list:
            for informative in informative_values:
                cfg = attestation_static_config(n, arity, informative=informative,
                                                crypto=crypto)
                m = run_scenario(cfg, seed)
                rec = next(iter(m.attestations.values()))
                runtime = None if rec.res_time is None else rec.res_time - rec.issue_time
                rows.append((arity, n, informative, runtime))
    return rows


# ---------------------------------------------------------------------------
# heartbeat message-complexity law

def run_message_count_sweep(arities, n_list, seed: int = 0) -> list[tuple]:
    """Rows of (arity, n, heartbeat_msgs_in_steady_period)."""
    rows = []
    for arity in arities:
        for n in n_list:
            m = run_scenario(heartbeat_static_config(n, arity), seed)
            rows.append((arity, n, m.heartbeat_msgs_in_period(3)))
    return rows


def loglog_slope(ns, counts) -> float:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# dynamic-network scenarios (random waypoint mobility)

def dynamic_config(n: int, *, periods: int | None = None,
                   stop_time: float | None = None,
                   attestation: AttestationPlan | None = None,
                   adversary: list | None = None,
                   delta_le: float = DYNAMIC_DELTA_LE,
                   agreement_sample: float | None = None,
                   crypto: str = "real",
                   name: str = "dynamic") -> ScenarioConfig:
    delta_hb = DYNAMIC_DELTA_HB
    delta = delta_hb + delta_le
    t_attack = max(DYNAMIC_T_ATTACK, 2 * delta)
    return ScenarioConfig(
        n=n,
        topology={"kind": "mobile", "area": list(DYNAMIC_AREA),
                  "range": DYNAMIC_RANGE, "speed": list(DYNAMIC_SPEED)},
        delta=delta, delta_hb=delta_hb, t_attack=t_attack,
        periods=periods, stop_time=stop_time,
        le_enabled=True, poll_interval=POLL_INTERVAL,
        attestation=attestation, adversary=adversary or [],
        agreement_sample=agreement_sample, crypto=crypto, name=name,
        debug=False,
    )


def run_dynamic_robustness(n: int, horizon_s: float, seeds) -> list[tuple]:
    """Time to the first false positive per seed: rows of (seed, first_fp_s, periods_clean)."""
    rows = []
    for seed in seeds:
        cfg = dynamic_config(n, stop_time=horizon_s, name=f"dyn-robust-n{n}")
        m = run_scenario(cfg, seed)
        clean = sum(1 for rec in m.periods if rec.false_positives == 0)
        rows.append((seed, m.first_fp_time, clean))
    return rows


def run_dynamic_heartbeat_bytes(n: int, periods: int, seeds) -> list[tuple]:
    """Average per-device heartbeat-phase traffic per steady period.

    Rows of (seed, mean_bytes_per_device_period); the first two periods are
    excluded as key-exchange warm-up.
    """
    rows = []
    for seed in seeds:
        cfg = dynamic_config(n, periods=periods, name=f"dyn-bytes-n{n}")
        m = run_scenario(cfg, seed)
        per_period = []
        for period in range(4, periods + 1):
            snap = m.period_device_bytes.get(period)
            if snap is None:
                continue
            per_period.append(float(snap[1:, wire.PHASE_HB].sum()) / n)
        rows.append((seed, mean(per_period)))
    return rows


def run_leader_outage(n: int, delta_le: float, seeds) -> list[tuple]:
    """Leader crash before its third emission; measure time to full agreement.

    Rows of (seed, agreement_s or None): seconds after the election phase
    opened until every live device believes in the same (new) leader.
    """
    rows = []
    for seed in seeds:
        delta = DYNAMIC_DELTA_HB + delta_le
        cfg = dynamic_config(
            n, periods=3, delta_le=delta_le, agreement_sample=1.0,
            adversary=[TakeOffline(3 * delta - 1.0, 1, 10 * delta)],
            name=f"leader-outage-n{n}")
        m = run_scenario(cfg, seed)
        le_start = 3 * cfg.delta + cfg.timecfg().delta_hb
        agreement = None
        for time, frac, leader in m.le_samples:
            if time >= le_start and leader != 1 and frac >= 1.0:
                agreement = time - le_start
                break
        rows.append((seed, agreement))
    return rows


def run_dynamic_attestation(n: int, seeds, s: int = 128) -> list[tuple]:
    """Greedy OR-aggregation under mobility: rows of (seed, completion_s)."""
    rows = []
    for seed in seeds:
        issue_at = 3 * DYNAMIC_DELTA + 10.0
        cfg = dynamic_config(
            n, periods=8,
            attestation=AttestationPlan(at_time=issue_at, entry=1,
                                        mode="dynamic", informative=True, s=s,
                                        freshness=DYNAMIC_T_ATTACK),
            name=f"dyn-att-n{n}")
        m = run_scenario(cfg, seed)
        rec = next(iter(m.attestations.values()))
        done = None if rec.complete_time is None else rec.complete_time - rec.issue_time
        rows.append((seed, done))
    return rows


def summarize(values) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"count": 0}
    return {"count": len(vals), "mean": mean(vals), "median": median(vals),
            "min": min(vals), "max": max(vals)}


# ---------------------------------------------------------------------------
# scenario files

_TOP_LEVEL_KEYS = {
    "name", "n", "topology", "delta", "delta_hb", "t_attack", "periods",
    "stop_time", "le_enabled", "poll_interval", "crypto", "attestation",
    "adversary", "base_latency", "throughput", "allow_insecure_delta",
    "agreement_sample", "fw_size", "record_trace",
}

_ATT_KEYS = {"at_time", "entry", "mode", "informative", "software", "s",
             "freshness", "child_timeout", "collect_margin"}


def config_from_dict(data: dict) -> ScenarioConfig:
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "n" not in data:
        raise ConfigError("config is missing required field 'n'")
    if "topology" not in data:
        raise ConfigError("config is missing required field 'topology'")
    kwargs = dict(data)
    att = kwargs.pop("attestation", None)
    if att is not None:
        bad = set(att) - _ATT_KEYS
        if bad:
            raise ConfigError(f"unknown attestation fields: {sorted(bad)}")
        if "at_time" not in att:
            raise ConfigError("attestation plan is missing required field 'at_time'")
        kwargs["attestation"] = AttestationPlan(**att)
    actions = kwargs.pop("adversary", None)
    if actions is not None:
        kwargs["adversary"] = [action_from_dict(a) for a in actions]
    topo = kwargs["topology"]
    if isinstance(topo.get("edges"), list):
        topo["edges"] = [tuple(e) for e in topo["edges"]]
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return config_from_dict(data)


def run_from_config(cfg: ScenarioConfig, seeds) -> list[tuple]:
    """Run one config over several seeds; returns concatenated metric rows."""
    rows: list[tuple] = []
    for seed in seeds:
        metrics = run_scenario(cfg, seed)
        rows.extend(metrics.to_rows(cfg.name, seed))
    return rows
