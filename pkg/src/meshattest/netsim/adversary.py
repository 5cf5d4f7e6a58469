"""Adversary schedule and the oracle's interaction surface.

Physical capture is modelled faithfully to the threat assumptions: a device
must be offline for at least ``t_attack`` before it can be physically
compromised, and from that moment the oracle can read the device's protocol
state (which is at least one period stale by then).  A Dolev-Yao network
adversary can also drop links, inject or replay recorded messages, and flip
ciphertext bits; scripted attack strategies in ``security.py`` build on these
hooks.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ConfigError


@dataclass(frozen=True, slots=True)
class TakeOffline:
    time: float
    device: int
    duration: float

    def validate(self, cfg) -> None:
        if not 1 <= self.device <= cfg.n:
            raise ConfigError(f"take_offline references unknown device {self.device}")
        if self.duration <= 0:
            raise ConfigError("take_offline duration must be positive")


@dataclass(frozen=True, slots=True)
class PhysicalCompromise:
    time: float
    device: int

    def validate(self, cfg) -> None:
        if not 1 <= self.device <= cfg.n:
            raise ConfigError(f"physical_compromise references unknown device {self.device}")
        needed = cfg.timecfg().t_attack
        for action in cfg.adversary:
            if (isinstance(action, TakeOffline) and action.device == self.device
                    and action.time <= self.time - needed + 1e-9
                    and action.time + action.duration >= self.time - 1e-9):
                return
        raise ConfigError(
            f"physical_compromise of device {self.device} needs a prior offline "
            f"window of at least t_attack={needed}s"
        )


@dataclass(frozen=True, slots=True)
class CompromiseSoftware:
    time: float
    device: int

    def validate(self, cfg) -> None:
        if not 1 <= self.device <= cfg.n:
            raise ConfigError(f"compromise_software references unknown device {self.device}")


@dataclass(frozen=True, slots=True)
class DropLink:
    time: float
    a: int
    b: int
    until: float

    def validate(self, cfg) -> None:
        if self.until <= self.time:
            raise ConfigError("drop_link interval is empty")


@dataclass(frozen=True, slots=True)
class Callback:
    """Programmatic hook for scripted strategies; not expressible in JSON configs."""

    time: float
    fn: object

    def validate(self, cfg) -> None:
        if not callable(self.fn):
            raise ConfigError("callback action needs a callable")


_JSON_ACTIONS = {
    "take_offline": lambda d: TakeOffline(d["time"], d["device"], d["duration"]),
    "physical_compromise": lambda d: PhysicalCompromise(d["time"], d["device"]),
    "compromise_software": lambda d: CompromiseSoftware(d["time"], d["device"]),
    "drop_link": lambda d: DropLink(d["time"], d["a"], d["b"], d["until"]),
}


def action_from_dict(data: dict):
    kind = data.get("action")
    if kind not in _JSON_ACTIONS:
        raise ConfigError(f"unknown adversary action {kind!r}")
    try:
        return _JSON_ACTIONS[kind](data)
    except KeyError as exc:
        raise ConfigError(f"adversary action {kind!r} is missing field {exc}") from exc
