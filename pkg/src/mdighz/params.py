"""Physical and protocol parameters, shared math helpers, config parsing.

All parameter containers are frozen dataclasses; invariants are checked at
construction time so downstream code never needs to re-validate.  Units:
distances in km, fiber loss in dB/km, everything else dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "ConfigError",
    "NumericsError",
    "ChannelModel",
    "DetectorModel",
    "SystemParams",
    "SourceSpec",
    "DecoyPlan",
    "PhasePlan",
    "SweepGrid",
    "ExperimentConfig",
    "overall_efficiency",
    "transmission_efficiency",
    "binary_entropy",
    "parse_config",
    "serialize_config",
]

# Slack for probabilities that undershoot/overshoot [0, 1] by pure rounding.
ENTROPY_DOMAIN_SLACK = 1e-15


class ConfigError(ValueError):
    """Invalid configuration document or parameter bundle."""

    def __init__(self, message, key=None, line=None):
        loc = ""
        if key is not None:
            loc += f" (key {key!r}"
            loc += f", line {line})" if line is not None else ")"
        elif line is not None:
            loc += f" (line {line})"
        super().__init__(message + loc)
        self.message = message
        self.key = key
        self.line = line


class NumericsError(RuntimeError):
    """A numerical tolerance contract was violated (quadrature, truncation,
    internal consistency)."""


@dataclass(frozen=True)
class ChannelModel:
    """Symmetric fiber channel: each user sits `length_km` from the middle node."""

    beta: float  # fiber loss coefficient, dB/km
    length_km: float
    symmetric: bool = True

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("channel loss coefficient must be >= 0", key="channel.beta")
        if self.length_km < 0:
            raise ConfigError("distance must be >= 0", key="channel.L")
        if not self.symmetric:
            raise ConfigError(
                "asymmetric user-node distances are not supported", key="channel.symmetric"
            )


@dataclass(frozen=True)
class DetectorModel:
    """Threshold single-photon detector: efficiency + dark-count probability per gate."""

    eta_d: float
    p_d: float

    def __post_init__(self):
        if not 0.0 <= self.eta_d <= 1.0:
            raise ConfigError("detector efficiency must be in [0, 1]", key="detector.eta_d")
        if not 0.0 <= self.p_d < 1.0:
            raise ConfigError("dark-count probability must be in [0, 1)", key="detector.p_d")


@dataclass(frozen=True)
class SystemParams:
    channel: ChannelModel
    detector: DetectorModel
    e_d: float  # overall misalignment-error probability
    f: float  # error-correction efficiency

    def __post_init__(self):
        if not 0.0 <= self.e_d <= 0.5:
            raise ConfigError("misalignment error must be in [0, 0.5]", key="system.e_d")
        if self.f < 1.0:
            raise ConfigError("error-correction efficiency must be >= 1", key="system.f")

    def at_distance(self, length_km: float) -> "SystemParams":
        return replace(self, channel=replace(self.channel, length_km=length_km))


SOURCE_KINDS = ("wcs", "heralded", "wcs_qnd")


@dataclass(frozen=True)
class SourceSpec:
    """Light source for all three users.

    kind "wcs": phase-randomized weak coherent pulses of intensity mu/nu/omega.
    kind "heralded": triggered down-conversion pair source with mean pair
    number mu/nu/omega and a trigger detector.
    kind "wcs_qnd": weak coherent pulses filtered by a nondestructive
    photon-number check (<= 1 photon per arm) at the middle node.
    """

    kind: str
    mu: float
    nu: float
    omega: float
    trigger: DetectorModel | None = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ConfigError(
                f"unknown source kind {self.kind!r}; expected one of {SOURCE_KINDS}",
                key="source.kind",
            )
        for name, value in (("mu", self.mu), ("nu", self.nu), ("omega", self.omega)):
            if value < 0:
                raise ConfigError("intensities must be >= 0", key=f"source.{name}")
        if self.kind == "heralded" and self.trigger is None:
            raise ConfigError("heralded source needs a trigger detector", key="source.kind")

    @property
    def intensities(self) -> tuple[float, float, float]:
        return (self.mu, self.nu, self.omega)


@dataclass(frozen=True)
class DecoyPlan:
    """Two-decoy plan: signal mu2 > decoy mu1 > 0, plus an implicit vacuum level."""

    mu2: float
    mu1: float

    def __post_init__(self):
        if self.mu1 <= 0:
            raise ConfigError("decoy intensity mu1 must be > 0", key="decoy.mu1")
        if self.mu2 <= self.mu1:
            raise ConfigError("mu2 must exceed mu1", key="decoy.mu2")


@dataclass(frozen=True)
class PhasePlan:
    """Phase post-selection: the random overall phase is split into K regions."""

    k: int

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("phase region count K must be an integer >= 1", key="phase.K")


@dataclass(frozen=True)
class SweepGrid:
    """Distance grid (km) for rate/Mermin curves; empty grids are allowed."""

    l_min: float = 0.0
    l_max: float = 250.0
    l_step: float = 1.0

    def __post_init__(self):
        if self.l_step <= 0:
            raise ConfigError("sweep step must be > 0", key="sweep.L_step")
        if self.l_min < 0:
            raise ConfigError("sweep start must be >= 0", key="sweep.L_min")

    def distances(self) -> list[float]:
        out = []
        n = 0
        while True:
            length = self.l_min + n * self.l_step
            if length > self.l_max + 1e-9:
                break
            out.append(round(length, 9))
            n += 1
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated parameter bundle for one protocol run."""

    system: SystemParams
    source: SourceSpec
    decoy: DecoyPlan
    sweep: SweepGrid
    phase: PhasePlan | None = None

    @property
    def method(self) -> str:
        """Protocol method implied by the source: pps | heralded | qnd."""
        return {"wcs": "pps", "heralded": "heralded", "wcs_qnd": "qnd"}[self.source.kind]


def overall_efficiency(channel: ChannelModel, detector: DetectorModel) -> float:
    """Per-user efficiency from source output to a detector click candidate:
    eta = eta_d * 10^(-beta*L/10)."""
    return detector.eta_d * transmission_efficiency(channel)


def transmission_efficiency(channel: ChannelModel) -> float:
    """Fiber-only transmission 10^(-beta*L/10)."""
    return 10.0 ** (-channel.beta * channel.length_km / 10.0)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy H(x) = -x log2 x - (1-x) log2 (1-x), in bits.

    Arguments within ENTROPY_DOMAIN_SLACK outside [0, 1] are clamped (bound
    estimates can undershoot 0 by rounding); anything further out is an error.
    """
    if x < -ENTROPY_DOMAIN_SLACK or x > 1.0 + ENTROPY_DOMAIN_SLACK:
        raise ValueError(f"entropy argument {x!r} outside [0, 1]")
    x = min(1.0, max(0.0, x))
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


# ---------------------------------------------------------------------------
# Config document:  lines of "section.key = value", "#" comments.
# ---------------------------------------------------------------------------

_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False}

# key -> (type tag, required-ness handled separately)
_KNOWN_KEYS = {
    "channel.beta": float,
    "channel.L": float,
    "channel.symmetric": bool,
    "detector.eta_d": float,
    "detector.p_d": float,
    "system.e_d": float,
    "system.f": float,
    "source.kind": str,
    "source.mu": float,
    "source.nu": float,
    "source.omega": float,
    "source.trigger_eta_d": float,
    "source.trigger_p_d": float,
    "decoy.mu2": float,
    "decoy.mu1": float,
    "phase.K": int,
    "sweep.L_min": float,
    "sweep.L_max": float,
    "sweep.L_step": float,
}

_REQUIRED_KEYS = (
    "channel.beta",
    "detector.eta_d",
    "detector.p_d",
    "system.e_d",
    "system.f",
    "source.kind",
    "source.mu",
    "decoy.mu1",
)


def _parse_value(key: str, raw: str, line_no: int):
    kind = _KNOWN_KEYS[key]
    raw = raw.strip()
    try:
        if kind is bool:
            word = raw.lower()
            if word not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[word]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}", key=key, line=line_no) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document into an ExperimentConfig.

    Unknown keys, duplicate keys, missing required keys, and invariant
    violations are all reported with the offending key (and line number
    where one exists).
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw_line!r}", line=line_no)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError("unknown key", key=key, line=line_no)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=line_no)
        values[key] = _parse_value(key, raw_value, line_no)
        lines[key] = line_no

    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError("missing required key", key=key)

    def get(key, default=None):
        return values.get(key, default)

    def wrap(builder):
        # Re-raise invariant violations with the line the offending key sits on.
        try:
            return builder()
        except ConfigError as exc:
            if exc.key is not None and exc.line is None and exc.key in lines:
                raise ConfigError(exc.message, key=exc.key, line=lines[exc.key]) from None
            raise

    channel = wrap(lambda: ChannelModel(
        beta=get("channel.beta"),
        length_km=get("channel.L", 0.0),
        symmetric=get("channel.symmetric", True),
    ))
    detector = wrap(lambda: DetectorModel(
        eta_d=get("detector.eta_d"), p_d=get("detector.p_d")
    ))
    system = wrap(lambda: SystemParams(
        channel=channel, detector=detector, e_d=get("system.e_d"), f=get("system.f")
    ))

    kind = get("source.kind")
    trigger = None
    if kind == "heralded":
        # The trigger detector defaults to the main detector model (assumption,
        # flagged in the docs); override via source.trigger_*.
        trigger = wrap(lambda: DetectorModel(
            eta_d=get("source.trigger_eta_d", detector.eta_d),
            p_d=get("source.trigger_p_d", detector.p_d),
        ))
    elif "source.trigger_eta_d" in values or "source.trigger_p_d" in values:
        raise ConfigError("trigger keys only apply to heralded sources",
                          key="source.trigger_eta_d")
    mu = get("source.mu")
    source = wrap(lambda: SourceSpec(
        kind=kind, mu=mu, nu=get("source.nu", mu), omega=get("source.omega", mu),
        trigger=trigger,
    ))

    decoy = wrap(lambda: DecoyPlan(
        mu2=get("decoy.mu2", source.mu), mu1=get("decoy.mu1")
    ))

    # phase.K is only required once a phase-post-selection QSS run is asked for;
    # plain QCC configs omit the section.
    phase = None
    if "phase.K" in values:
        phase = wrap(lambda: PhasePlan(k=get("phase.K")))

    sweep = wrap(lambda: SweepGrid(
        l_min=get("sweep.L_min", 0.0),
        l_max=get("sweep.L_max", 250.0),
        l_step=get("sweep.L_step", 1.0),
    ))

    return ExperimentConfig(system=system, source=source, decoy=decoy,
                            sweep=sweep, phase=phase)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Emit the canonical config document; parse(serialize(cfg)) == cfg."""
    sysp = cfg.system
    src = cfg.source
    out = [
        f"channel.beta = {sysp.channel.beta!r}",
        f"channel.L = {sysp.channel.length_km!r}",
        f"channel.symmetric = {'true' if sysp.channel.symmetric else 'false'}",
        f"detector.eta_d = {sysp.detector.eta_d!r}",
        f"detector.p_d = {sysp.detector.p_d!r}",
        f"system.e_d = {sysp.e_d!r}",
        f"system.f = {sysp.f!r}",
        f"source.kind = {src.kind}",
        f"source.mu = {src.mu!r}",
        f"source.nu = {src.nu!r}",
        f"source.omega = {src.omega!r}",
    ]
    if src.trigger is not None:
        out.append(f"source.trigger_eta_d = {src.trigger.eta_d!r}")
        out.append(f"source.trigger_p_d = {src.trigger.p_d!r}")
    out.append(f"decoy.mu2 = {cfg.decoy.mu2!r}")
    out.append(f"decoy.mu1 = {cfg.decoy.mu1!r}")
    if cfg.phase is not None:
        out.append(f"phase.K = {cfg.phase.k}")
    out.append(f"sweep.L_min = {cfg.sweep.l_min!r}")
    out.append(f"sweep.L_max = {cfg.sweep.l_max!r}")
    out.append(f"sweep.L_step = {cfg.sweep.l_step!r}")
    return "\n".join(out) + "\n"
