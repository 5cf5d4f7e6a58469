"""Scenario configuration: everything a run needs besides the seed."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..tee import TimeConfig


class ConfigError(ValueError):
    """A scenario config violates a protocol or simulator invariant."""


@dataclass(slots=True)
class AttestationPlan:
    """One scheduled attestation: when, through which device, in which mode."""

    at_time: float
    entry: int = 1
    mode: str = "tree"            # "tree" | "dynamic"
    informative: bool = True
    software: bool = False
    s: int = 128
    freshness: float | None = None      # default: one period
    child_timeout: float | None = None  # default: derived from depth estimate
    collect_margin: float = 5.0         # operator pulls this long before deadline


@dataclass(slots=True)
class ScenarioConfig:
    """Full description of a simulation run; (config, seed) fixes the trace."""

    n: int
    topology: dict = field(default_factory=lambda: {"kind": "tree", "arity": 2})
    delta: float = 60.0
    delta_hb: float | None = None       # default: whole period (no LE sub-phase)
    t_attack: float | None = None       # default: 2 * delta
    periods: int | None = 3
    stop_time: float | None = None
    le_enabled: bool = False
    poll_interval: float | None = None  # dynamic-mode re-announcement tick
    attestation: AttestationPlan | None = None
    adversary: list = field(default_factory=list)
    base_latency: float | None = None   # default: calibrated, see DelayModel
    throughput: float = 35_000.0        # application-layer bits/s
    crypto: str = "real"
    name: str = "scenario"
    allow_insecure_delta: bool = False
    fw_size: int = 30720
    mobility_tick: float = 0.1
    ke_retry_after: float = 10.0
    agreement_sample: float | None = None  # sample LE agreement every X seconds
    record_trace: bool = False
    debug: bool | None = None           # default: on for n <= 2000
    per_device_period_bytes: bool | None = None  # default: on for n <= 20000

    def timecfg(self) -> TimeConfig:
        return TimeConfig(
            delta=self.delta,
            delta_hb=self.delta if self.delta_hb is None else self.delta_hb,
            t_attack=2 * self.delta if self.t_attack is None else self.t_attack,
        )

    def end_time(self) -> float:
        if self.stop_time is not None:
            return self.stop_time
        if self.periods is None:
            raise ConfigError("either periods or stop_time must be set")
        # enrollment covers period 1; emissions run from the second period on
        return (1 + self.periods) * self.delta

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        try:
            self.timecfg().validate(allow_insecure=self.allow_insecure_delta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        kind = self.topology.get("kind")
        if kind == "tree":
            if int(self.topology.get("arity", 0)) < 1:
                raise ConfigError("tree topology needs arity >= 1")
        elif kind == "graph":
            edges = self.topology.get("edges")
            if not edges:
                raise ConfigError("graph topology needs an edge list")
            for a, b in edges:
                if not (1 <= a <= self.n and 1 <= b <= self.n) or a == b:
                    raise ConfigError(f"edge ({a},{b}) references an invalid device")
        elif kind == "grid":
            if int(self.topology.get("cols", 0)) < 1:
                raise ConfigError("grid topology needs cols >= 1")
        elif kind == "mobile":
            area = self.topology.get("area")
            if not area or len(area) != 2:
                raise ConfigError("mobile topology needs area [width, height]")
            if self.topology.get("range", 0) <= 0:
                raise ConfigError("mobile topology needs a positive range")
            lo, hi = self.topology.get("speed", (0, 0))
            if not 0 < lo <= hi:
                raise ConfigError("mobile topology needs speed [min, max] with 0 < min <= max")
        else:
            raise ConfigError(f"unknown topology kind {self.topology.get('kind')!r}")
        if self.crypto not in ("real", "null"):
            raise ConfigError(f"unknown crypto backend {self.crypto!r}")
        if self.attestation is not None:
            a = self.attestation
            if not 1 <= a.entry <= self.n:
                raise ConfigError(f"attestation entry device {a.entry} out of range")
            if a.mode not in ("tree", "dynamic"):
                raise ConfigError(f"unknown attestation mode {a.mode!r}")
            if a.at_time >= self.end_time():
                raise ConfigError("attestation scheduled after the end of the run")
        for action in self.adversary:
            action.validate(self)

    @property
    def debug_on(self) -> bool:
        return self.n <= 2000 if self.debug is None else self.debug

    @property
    def per_device_periods_on(self) -> bool:
        if self.per_device_period_bytes is None:
            return self.n <= 20000
        return self.per_device_period_bytes
