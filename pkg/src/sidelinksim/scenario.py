"""Scenario files: schema, strict validation, loading.

A scenario is a YAML mapping with sections for the channel, the
resource pool, sync parameters, UEs, traffic flows, unicast links,
attacks and defense toggles. Unknown keys anywhere are errors; all
problems are collected and reported together with their paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .adversary import ATTACK_REGISTRY, AttackKind, AttackerCapability, AttackPlan
from .defense import (
    AnomalyCheckConfig,
    DefenseConfig,
    IncidentLogConfig,
    PolicyEnforcerConfig,
    PrivacyConfig,
    ReplayGuardConfig,
    SignedSsbConfig,
)
from .pc5 import PolicyLevel, SecurityPolicy
from .radio import ChannelModel
from .resources import ResourcePool
from .sync import SyncConfig

MAX_SEED = (1 << 64) - 1
ATTACKER_ID_BASE = 9000
UE_ROLES = ("legit", "gnode_b", "gnss_visible")


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class UeSpec:
    id: int
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    role: str = "legit"
    network_sync_ref: bool = False
    tx_power_dbm: float = 23.0
    policy: SecurityPolicy = field(default_factory=SecurityPolicy)


@dataclass(frozen=True)
class TrafficFlow:
    src: int
    dst: int | str  # ue id or "broadcast"
    period_slots: int
    size_bytes: int = 300
    start_slot: int = 0
    rri_ms: int = 100
    harq: bool = True
    priority: int = 3


@dataclass(frozen=True)
class LinkSpec:
    initiator: int
    responder: int
    start_slot: int = 0


@dataclass(frozen=True)
class AttackSpec:
    plan: AttackPlan
    capability: AttackerCapability


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_slots: int
    channel: ChannelModel
    pool: ResourcePool
    sync: SyncConfig
    ues: tuple[UeSpec, ...]
    traffic: tuple[TrafficFlow, ...] = ()
    links: tuple[LinkSpec, ...] = ()
    attacks: tuple[AttackSpec, ...] = ()
    defenses: DefenseConfig = field(default_factory=DefenseConfig)


# ---------------------------------------------------------------------------
# validation machinery


class _Errors:
    def __init__(self):
        self.items: list[str] = []

    def add(self, path: str, msg: str):
        self.items.append(f"{path}: {msg}")

    def raise_if_any(self):
        if self.items:
            raise ScenarioError(self.items)


def _mapping(raw, path: str, errs: _Errors) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        errs.add(path, f"expected a mapping, got {type(raw).__name__}")
        return {}
    return raw


def _check_keys(raw: dict, allowed: set[str], path: str, errs: _Errors):
    for key in raw:
        if key not in allowed:
            errs.add(f"{path}.{key}", "unknown key")


def _pair(raw, path: str, errs: _Errors, default=(0.0, 0.0)) -> tuple[float, float]:
    if raw is None:
        return default
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        errs.add(path, "expected a pair [x, y]")
        return default
    try:
        return float(raw[0]), float(raw[1])
    except (TypeError, ValueError):
        errs.add(path, "pair entries must be numbers")
        return default


def _build(cls, kwargs: dict, path: str, errs: _Errors, fallback):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errs.add(path, str(exc))
        return fallback


# ---------------------------------------------------------------------------
# section parsers


_CHANNEL_KEYS = {
    "reference_loss_db", "path_loss_exponent", "noise_floor_dbm",
    "shadowing_sigma_db", "capture_threshold_db", "tb_error_rate",
}

_POOL_KEYS = {
    "num_subchannels", "slots_per_selection_window", "period_list_ms",
    "sl_max_num_per_reserve", "sensing_window_slots",
    "rsrp_exclusion_threshold_dbm", "slot_duration_ms", "min_candidate_ratio",
    "threshold_step_db", "dmrs_patterns", "additional_mcs_tables",
    "psfch_period", "num_reserved_bits",
}

_SYNC_KEYS = {
    "min_hyst_db", "diff_hyst_db", "tx_thresh_ooc_dbm",
    "selection_rsrp_threshold_dbm", "ssb_period_slots",
}

_POLICY_KEYS = {"ciphering", "integrity", "allow_null_cipher", "auth_mandatory"}

_UE_KEYS = {
    "id", "position", "velocity", "role", "network_sync_ref",
    "tx_power_dbm", "policy",
}

_TRAFFIC_KEYS = {
    "src", "dst", "period_slots", "size_bytes", "start_slot",
    "rri_ms", "harq", "priority",
}

_LINK_KEYS = {"initiator", "responder", "start_slot"}

_ATTACK_KEYS = {"kind", "window", "capability", "params"}

_CAPABILITY_KEYS = {
    "tx_power_dbm", "timing_precision_slots", "knows_pool_config",
    "knows_harq_params", "has_key", "position",
}

_DEFENSE_SECTIONS = {
    "signed_ssb": (SignedSsbConfig, {"enabled", "tag_bits"}),
    "harq_anomaly_check": (
        AnomalyCheckConfig,
        {"enabled", "power_tolerance_db", "strict_window", "min_samples"},
    ),
    "replay_guard": (ReplayGuardConfig, {"enabled", "timestamp_skew_slots"}),
    "policy_enforcer": (PolicyEnforcerConfig, {"enabled"}),
    "privacy_randomizer": (PrivacyConfig, {"enabled", "timer_ms", "mode"}),
    "incident_log": (IncidentLogConfig, {"enabled"}),
}

_TOP_KEYS = {
    "name", "seed", "duration_slots", "channel", "pool", "sync",
    "ues", "traffic", "links", "attacks", "defenses",
}


def _parse_policy(raw, path: str, errs: _Errors) -> SecurityPolicy:
    raw = _mapping(raw, path, errs)
    _check_keys(raw, _POLICY_KEYS, path, errs)
    kwargs = {}
    for axis in ("ciphering", "integrity"):
        if axis in raw:
            try:
                kwargs[axis] = PolicyLevel(raw[axis])
            except ValueError:
                errs.add(f"{path}.{axis}",
                         f"must be one of {[l.value for l in PolicyLevel]}")
    if "allow_null_cipher" in raw:
        kwargs["allow_null_cipher"] = bool(raw["allow_null_cipher"])
    if "auth_mandatory" in raw:
        kwargs["auth_mandatory"] = bool(raw["auth_mandatory"])
    return SecurityPolicy(**kwargs)


def _parse_ue(raw, path: str, errs: _Errors) -> UeSpec | None:
    raw = _mapping(raw, path, errs)
    _check_keys(raw, _UE_KEYS, path, errs)
    if "id" not in raw or not isinstance(raw["id"], int):
        errs.add(f"{path}.id", "required integer")
        return None
    ue_id = raw["id"]
    if not 0 <= ue_id < ATTACKER_ID_BASE:
        errs.add(f"{path}.id", f"must lie in [0, {ATTACKER_ID_BASE})")
    role = raw.get("role", "legit")
    if role not in UE_ROLES:
        errs.add(f"{path}.role", f"must be one of {UE_ROLES}")
        role = "legit"
    return UeSpec(
        id=ue_id,
        position=_pair(raw.get("position"), f"{path}.position", errs),
        velocity=_pair(raw.get("velocity"), f"{path}.velocity", errs),
        role=role,
        network_sync_ref=bool(raw.get("network_sync_ref", False)),
        tx_power_dbm=float(raw.get("tx_power_dbm", 23.0)),
        policy=_parse_policy(raw.get("policy"), f"{path}.policy", errs),
    )


def _parse_traffic(raw, path: str, errs: _Errors, ue_ids: set[int],
                   pool: ResourcePool) -> TrafficFlow | None:
    raw = _mapping(raw, path, errs)
    _check_keys(raw, _TRAFFIC_KEYS, path, errs)
    for required in ("src", "dst", "period_slots"):
        if required not in raw:
            errs.add(f"{path}.{required}", "required")
            return None
    src, dst = raw["src"], raw["dst"]
    if src not in ue_ids:
        errs.add(f"{path}.src", f"unknown UE id {src}")
    if dst != "broadcast" and dst not in ue_ids:
        errs.add(f"{path}.dst", f"unknown UE id {dst}")
    if src == dst:
        errs.add(f"{path}.dst", "flow source and destination must differ")
    flow = TrafficFlow(
        src=src,
        dst=dst,
        period_slots=int(raw["period_slots"]),
        size_bytes=int(raw.get("size_bytes", 300)),
        start_slot=int(raw.get("start_slot", 0)),
        rri_ms=int(raw.get("rri_ms", 100)),
        harq=bool(raw.get("harq", True)),
        priority=int(raw.get("priority", 3)),
    )
    if flow.period_slots < 1:
        errs.add(f"{path}.period_slots", "must be positive")
    if flow.rri_ms not in pool.period_list_ms:
        errs.add(f"{path}.rri_ms",
                 f"{flow.rri_ms} not in pool period list {pool.period_list_ms}")
    if not 0 <= flow.priority <= 7:
        errs.add(f"{path}.priority", "must lie in [0, 7]")
    if flow.dst == "broadcast" and flow.harq:
        errs.add(f"{path}.harq", "broadcast flows cannot request feedback")
    return flow


def _parse_attack(raw, path: str, errs: _Errors) -> AttackSpec | None:
    raw = _mapping(raw, path, errs)
    _check_keys(raw, _ATTACK_KEYS, path, errs)
    if "kind" not in raw:
        errs.add(f"{path}.kind", "required")
        return None
    try:
        kind = AttackKind(raw["kind"])
    except ValueError:
        errs.add(f"{path}.kind",
                 f"unknown attack {raw['kind']!r}; see list-attacks")
        return None
    window_raw = raw.get("window")
    if (not isinstance(window_raw, (list, tuple)) or len(window_raw) != 2
            or not all(isinstance(v, int) for v in window_raw)):
        errs.add(f"{path}.window", "required pair of integer slots [start, end)")
        return None
    cap_raw = _mapping(raw.get("capability"), f"{path}.capability", errs)
    _check_keys(cap_raw, _CAPABILITY_KEYS, f"{path}.capability", errs)
    cap_kwargs = dict(cap_raw)
    if "position" in cap_kwargs:
        cap_kwargs["position"] = _pair(
            cap_kwargs["position"], f"{path}.capability.position", errs
        )
    capability = _build(AttackerCapability, cap_kwargs, f"{path}.capability",
                        errs, AttackerCapability())
    params = _mapping(raw.get("params"), f"{path}.params", errs)
    _, param_spec = ATTACK_REGISTRY[kind]
    for key in params:
        if key not in param_spec:
            errs.add(f"{path}.params.{key}",
                     f"unknown parameter for {kind.value}")
    plan = _build(AttackPlan, {
        "kind": kind, "window": tuple(window_raw), "params": dict(params),
    }, f"{path}.window", errs, None)
    if plan is None:
        return None
    return AttackSpec(plan=plan, capability=capability)


def _parse_defenses(raw, path: str, errs: _Errors) -> DefenseConfig:
    raw = _mapping(raw, path, errs)
    _check_keys(raw, set(_DEFENSE_SECTIONS), path, errs)
    kwargs = {}
    for section, (cls, allowed) in _DEFENSE_SECTIONS.items():
        if section not in raw:
            continue
        sub = _mapping(raw[section], f"{path}.{section}", errs)
        _check_keys(sub, allowed, f"{path}.{section}", errs)
        built = _build(cls, dict(sub), f"{path}.{section}", errs, cls())
        kwargs[section] = built
    return DefenseConfig(**kwargs)


# ---------------------------------------------------------------------------
# top level


def parse_scenario(raw: dict, default_name: str = "scenario") -> Scenario:
    errs = _Errors()
    raw = _mapping(raw, "scenario", errs)
    _check_keys(raw, _TOP_KEYS, "scenario", errs)

    name = str(raw.get("name", default_name))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        errs.add("scenario.seed", "must be an integer in [0, 2^64)")
        seed = 0
    duration = raw.get("duration_slots")
    if not isinstance(duration, int) or duration <= 0:
        errs.add("scenario.duration_slots", "required positive integer")
        duration = 1

    channel_raw = _mapping(raw.get("channel"), "scenario.channel", errs)
    _check_keys(channel_raw, _CHANNEL_KEYS, "scenario.channel", errs)
    channel = _build(ChannelModel, dict(channel_raw), "scenario.channel",
                     errs, ChannelModel())

    pool_raw = _mapping(raw.get("pool"), "scenario.pool", errs)
    _check_keys(pool_raw, _POOL_KEYS, "scenario.pool", errs)
    # grid shape defaults so partial (or absent) pool sections stay valid
    pool_kwargs = {
        "num_subchannels": 4,
        "slots_per_selection_window": 10,
        "period_list_ms": (100, 1000),
        **pool_raw,
    }
    pool_kwargs["period_list_ms"] = tuple(pool_kwargs["period_list_ms"])
    if "dmrs_patterns" in pool_kwargs:
        pool_kwargs["dmrs_patterns"] = tuple(pool_kwargs["dmrs_patterns"])
    pool = _build(ResourcePool, pool_kwargs, "scenario.pool", errs,
                  ResourcePool(4, 10, (100, 1000)))

    sync_raw = _mapping(raw.get("sync"), "scenario.sync", errs)
    _check_keys(sync_raw, _SYNC_KEYS, "scenario.sync", errs)
    sync = _build(SyncConfig, dict(sync_raw), "scenario.sync", errs, SyncConfig())

    ues: list[UeSpec] = []
    seen_ids: set[int] = set()
    raw_ues = raw.get("ues")
    if not isinstance(raw_ues, list) or not raw_ues:
        errs.add("scenario.ues", "at least one UE is required")
        raw_ues = []
    for i, entry in enumerate(raw_ues):
        ue = _parse_ue(entry, f"scenario.ues[{i}]", errs)
        if ue is None:
            continue
        if ue.id in seen_ids:
            errs.add(f"scenario.ues[{i}].id", f"duplicate UE id {ue.id}")
            continue
        seen_ids.add(ue.id)
        ues.append(ue)

    traffic: list[TrafficFlow] = []
    for i, entry in enumerate(raw.get("traffic") or []):
        flow = _parse_traffic(entry, f"scenario.traffic[{i}]", errs, seen_ids, pool)
        if flow is not None:
            traffic.append(flow)

    links: list[LinkSpec] = []
    for i, entry in enumerate(raw.get("links") or []):
        entry = _mapping(entry, f"scenario.links[{i}]", errs)
        _check_keys(entry, _LINK_KEYS, f"scenario.links[{i}]", errs)
        ok = True
        for side in ("initiator", "responder"):
            if entry.get(side) not in seen_ids:
                errs.add(f"scenario.links[{i}].{side}",
                         f"unknown UE id {entry.get(side)}")
                ok = False
        if ok and entry["initiator"] == entry["responder"]:
            errs.add(f"scenario.links[{i}]", "link endpoints must differ")
            ok = False
        if ok:
            links.append(LinkSpec(entry["initiator"], entry["responder"],
                                  int(entry.get("start_slot", 0))))

    attacks: list[AttackSpec] = []
    for i, entry in enumerate(raw.get("attacks") or []):
        spec = _parse_attack(entry, f"scenario.attacks[{i}]", errs)
        if spec is not None:
            attacks.append(spec)

    defenses = _parse_defenses(raw.get("defenses"), "scenario.defenses", errs)

    errs.raise_if_any()
    return Scenario(
        name=name,
        seed=seed,
        duration_slots=duration,
        channel=channel,
        pool=pool,
        sync=sync,
        ues=tuple(ues),
        traffic=tuple(traffic),
        links=tuple(links),
        attacks=tuple(attacks),
        defenses=defenses,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError([f"{path}: {exc}"]) from exc
    return parse_scenario(raw, default_name=path.stem)
