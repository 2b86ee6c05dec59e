"""PC5 unicast link state machine, security negotiation and key schedule.

The handshake grammar: Establishment Request, optional authentication
round trip, Security Mode Command/Complete, Establishment Accept.
Reject kinds abort a pending link in any pre-established phase; that is
deliberate, it is the surface the forged-reject attack needs.

Key schedule (PRF = HMAC-SHA256 throughout):

    k_nrp      = PRF(k_long_term, "knrp" | knrp_id)     knrp_id: 32-bit
    k_nrp_sess = PRF(k_nrp, nonce_initiator | nonce_responder)
    nrpek      = PRF(k_nrp_sess, "nrpek" | cipher_alg)[:16]
    nrpik      = PRF(k_nrp_sess, "nrpik" | integ_alg)[:16]

The 16-bit session id takes its high byte from the initiator's nonce
and its low byte from the responder's. Protected PDUs carry a 32-bit
truncated MAC over header plus wire payload and a monotonically
increasing counter; the receiver rejects any counter at or below its
high-water mark.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum

from .frames import (
    Pc5Message,
    Pc5MessageKind as K,
    PROTECTION,
    SecurityPhase,
)

TAG_BYTES = 4
NONCE_BYTES = 16
PC5_TIMEOUT_SLOTS = 64
KEEPALIVE_MAX_MISSES = 2
CIPHER_ALG = "xor-hmac-stream"
INTEG_ALG = "hmac-sha256-32"
NULL_ALG = "null"


def prf(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()


# ---------------------------------------------------------------------------
# policy negotiation


class PolicyLevel(Enum):
    REQUIRED = "REQUIRED"
    PREFERRED = "PREFERRED"
    NOT_NEEDED = "NOT_NEEDED"


@dataclass(frozen=True)
class SecurityPolicy:
    ciphering: PolicyLevel = PolicyLevel.REQUIRED
    integrity: PolicyLevel = PolicyLevel.REQUIRED
    allow_null_cipher: bool = False
    auth_mandatory: bool = False


class Outcome(Enum):
    PROTECTED = "protected"
    UNPROTECTED = "unprotected"
    MISMATCH = "mismatch"


@dataclass(frozen=True)
class Negotiation:
    outcome: Outcome
    cipher_on: bool = False
    integrity_on: bool = False

    @property
    def cipher_alg(self) -> str:
        return CIPHER_ALG if self.cipher_on else NULL_ALG

    @property
    def integrity_alg(self) -> str:
        return INTEG_ALG if self.integrity_on else NULL_ALG


def _axis(a: PolicyLevel, b: PolicyLevel, null_ok: bool) -> bool | None:
    """One protection axis; None marks an irreconcilable pair."""
    pair = {a, b}
    if PolicyLevel.REQUIRED in pair and PolicyLevel.NOT_NEEDED in pair:
        return None
    if PolicyLevel.REQUIRED in pair:
        return True
    if a == b == PolicyLevel.PREFERRED:
        return not null_ok
    return False  # NOT_NEEDED with NOT_NEEDED or PREFERRED


def negotiate_policy(a: SecurityPolicy, b: SecurityPolicy) -> Negotiation:
    both_null_ok = a.allow_null_cipher and b.allow_null_cipher
    cipher = _axis(a.ciphering, b.ciphering, both_null_ok)
    integ = _axis(a.integrity, b.integrity, False)
    if cipher is None or integ is None:
        return Negotiation(Outcome.MISMATCH)
    if cipher or integ:
        return Negotiation(Outcome.PROTECTED, cipher, integ)
    return Negotiation(Outcome.UNPROTECTED)


# ---------------------------------------------------------------------------
# key hierarchy


@dataclass
class KeyHierarchy:
    k_long_term: bytes
    knrp_id: int | None = None
    k_nrp: bytes | None = None
    k_nrp_sess: bytes | None = None
    k_nrp_sess_id: int | None = None
    nrpek: bytes | None = None
    nrpik: bytes | None = None

    def with_knrp(self, knrp_id: int) -> "KeyHierarchy":
        k_nrp = prf(self.k_long_term, b"knrp|" + knrp_id.to_bytes(4, "big"))
        return replace(self, knrp_id=knrp_id, k_nrp=k_nrp)


def derive_session(kh: KeyHierarchy, nonce_initiator: bytes, nonce_responder: bytes,
                   cipher_alg: str, integ_alg: str) -> KeyHierarchy:
    """Session keys from the nonce exchange; new nonces refresh everything."""
    if kh.k_nrp is None:
        raise ValueError("no link key established yet")
    sess = prf(kh.k_nrp, b"sess|" + nonce_initiator + nonce_responder)
    return replace(
        kh,
        k_nrp_sess=sess,
        k_nrp_sess_id=(nonce_initiator[0] << 8) | nonce_responder[0],
        nrpek=prf(sess, b"nrpek|" + cipher_alg.encode())[:16],
        nrpik=prf(sess, b"nrpik|" + integ_alg.encode())[:16],
    )


# ---------------------------------------------------------------------------
# PDU protection


@dataclass
class LinkSecurityContext:
    keys: KeyHierarchy
    cipher_on: bool
    integrity_on: bool
    tx_count: int = 0
    rx_high_water: int = -1


class UnprotectError(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _keystream(key: bytes, header: bytes, length: int) -> bytes:
    out = bytearray()
    block = 0
    while len(out) < length:
        out.extend(prf(key, header + b"|ks|" + block.to_bytes(4, "big")))
        block += 1
    return bytes(out[:length])


def _wants(kind: K, ctx: LinkSecurityContext | None) -> tuple[bool, bool]:
    """(cipher, integrity) actually applied for this kind on this link."""
    prof = PROTECTION[kind]
    if ctx is None:
        return False, False
    return prof.ciphered and ctx.cipher_on, prof.integrity and ctx.integrity_on


def protect_pdu(ctx: LinkSecurityContext | None, msg: Pc5Message) -> Pc5Message:
    """Apply the link's protection to an outbound PDU."""
    cipher, integ = _wants(msg.kind, ctx)
    if not cipher and not integ:
        return msg
    assert ctx is not None
    out = replace(msg, counter=ctx.tx_count)
    ctx.tx_count += 1
    if cipher:
        clear = out.body_bytes()
        ks = _keystream(ctx.keys.nrpek, out.header_bytes(), len(clear))
        out = replace(out, body={}, cipher_blob=bytes(
            c ^ k for c, k in zip(clear, ks)
        ).hex())
    if integ:
        out = replace(out, auth_tag=prf(ctx.keys.nrpik, out.mac_input())[:TAG_BYTES].hex())
    return out


def unprotect_pdu(ctx: LinkSecurityContext | None, msg: Pc5Message) -> dict:
    """Verify and strip protection; returns the clear body fields.

    Raises UnprotectError("bad_tag" | "replay" | "missing_tag") and
    advances the replay high-water mark only after the tag verifies.
    """
    cipher, integ = _wants(msg.kind, ctx)
    if not cipher and not integ:
        return dict(msg.body)
    assert ctx is not None
    if integ:
        if msg.auth_tag is None:
            raise UnprotectError("missing_tag")
        expected = prf(ctx.keys.nrpik, msg.mac_input())[:TAG_BYTES].hex()
        if not hmac.compare_digest(expected, msg.auth_tag):
            raise UnprotectError("bad_tag")
        if msg.counter <= ctx.rx_high_water:
            raise UnprotectError("replay")
        ctx.rx_high_water = msg.counter
    if cipher:
        if msg.cipher_blob is None:
            raise UnprotectError("bad_tag")
        blob = bytes.fromhex(msg.cipher_blob)
        ks = _keystream(ctx.keys.nrpek, msg.header_bytes(), len(blob))
        clear = bytes(c ^ k for c, k in zip(blob, ks))
        try:
            return dict(json.loads(clear.decode()))
        except (ValueError, UnicodeDecodeError) as exc:
            raise UnprotectError("bad_tag") from exc
    return dict(msg.body)


# ---------------------------------------------------------------------------
# identifier privacy


L2_SPACE = 1 << 24
BROADCAST_L2 = L2_SPACE - 1


@dataclass
class L2Identity:
    current: int
    history: list[tuple[int, int, int]] = field(default_factory=list)  # (id, from, to)
    born_slot: int = 0


def refresh_identifier(identity: L2Identity, rng: random.Random, mode: str,
                       slot: int, live_ids: set[int]) -> int:
    """Roll the layer-2 id; returns the new value.

    weak mode is the predictable id+1 scheme kept for the tracking
    experiment; secure mode redraws on any clash with this UE's own
    history or an id currently live in the run.
    """
    used = {h[0] for h in identity.history} | {identity.current}
    if mode == "weak":
        new = (identity.current + 1) % L2_SPACE
    elif mode == "secure":
        while True:
            new = rng.getrandbits(24)
            if new != BROADCAST_L2 and new not in used and new not in live_ids:
                break
    else:
        raise ValueError(f"unknown randomization mode {mode!r}")
    identity.history.append((identity.current, identity.born_slot, slot))
    identity.current = new
    identity.born_slot = slot
    return new


# ---------------------------------------------------------------------------
# link state machine


class LinkPhase(Enum):
    IDLE = "idle"
    REQUEST_SENT = "request_sent"
    AUTHENTICATING = "authenticating"
    SECURITY_MODE = "security_mode"
    ESTABLISHED = "established"
    RELEASED = "released"


PRE_ESTABLISHED = (
    LinkPhase.REQUEST_SENT,
    LinkPhase.AUTHENTICATING,
    LinkPhase.SECURITY_MODE,
)


@dataclass
class LinkState:
    peer_l2: int
    is_initiator: bool
    phase: LinkPhase = LinkPhase.IDLE
    started_slot: int = 0
    established_slot: int | None = None
    negotiation: Negotiation | None = None
    ctx: LinkSecurityContext | None = None
    keys: KeyHierarchy | None = None
    nonce_i: str | None = None  # initiator nonce (hex)
    nonce_r: str | None = None  # responder nonce (hex)
    challenge: str | None = None
    peer_policy_body: dict | None = None
    keepalive_next: int | None = None
    keepalive_misses: int = 0
    rekey_nonce: str | None = None

    def binding_nonce(self) -> str | None:
        """Nonce a legitimate response to our pending step must echo."""
        if self.phase == LinkPhase.REQUEST_SENT:
            return self.nonce_i
        if self.phase == LinkPhase.AUTHENTICATING:
            return self.nonce_i if self.is_initiator else self.challenge
        if self.phase == LinkPhase.SECURITY_MODE:
            return self.nonce_i if self.is_initiator else self.nonce_r
        return None


@dataclass
class SecurityEvent:
    slot: int
    kind: str
    peer_l2: int
    detail: dict = field(default_factory=dict)


@dataclass
class Pc5Burst:
    """PC5 signalling rides the data channel off the sensing grid."""

    CHANNEL = "PSSCH"

    message: Pc5Message


def _policy_body(policy: SecurityPolicy) -> dict:
    return {
        "cipher": policy.ciphering.value,
        "integ": policy.integrity.value,
        "allow_null": int(policy.allow_null_cipher),
        "auth_req": int(policy.auth_mandatory),
    }


def _policy_from_body(body: dict) -> SecurityPolicy:
    return SecurityPolicy(
        ciphering=PolicyLevel(body["cipher"]),
        integrity=PolicyLevel(body["integ"]),
        allow_null_cipher=bool(body["allow_null"]),
        auth_mandatory=bool(body["auth_req"]),
    )


class Pc5Endpoint:
    """One UE's PC5 signalling side: links, keys, timers."""

    def __init__(
        self,
        ue_id: int,
        l2_id: int,
        k_long_term: bytes,
        policy: SecurityPolicy,
        rng: random.Random,
        keepalive_period_slots: int = 2000,
        timeout_slots: int = PC5_TIMEOUT_SLOTS,
    ):
        self.ue_id = ue_id
        self.l2_id = l2_id
        self.k_long_term = k_long_term
        self.policy = policy
        self.rng = rng
        self.keepalive_period_slots = keepalive_period_slots
        self.timeout_slots = timeout_slots
        self.links: dict[int, LinkState] = {}
        self._seq = 0
        self.pending_peak = 0

    # -- helpers ---------------------------------------------------------

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _nonce(self) -> str:
        return self.rng.randbytes(NONCE_BYTES).hex()

    def _msg(self, kind: K, dst: int, body: dict, link: LinkState | None) -> Pc5Message:
        msg = Pc5Message(kind, self.l2_id, dst, self._next_seq(), body)
        ctx = link.ctx if link else None
        return protect_pdu(ctx, msg)

    def _note_pending(self):
        pending = sum(1 for l in self.links.values() if l.phase in PRE_ESTABLISHED)
        self.pending_peak = max(self.pending_peak, pending)

    def established_peers(self) -> list[int]:
        return [p for p, l in self.links.items() if l.phase == LinkPhase.ESTABLISHED]

    # -- initiator side --------------------------------------------------

    def initiate(self, peer_l2: int, slot: int) -> list[Pc5Message]:
        link = LinkState(peer_l2, True, LinkPhase.REQUEST_SENT, started_slot=slot)
        link.nonce_i = self._nonce()
        link.keys = KeyHierarchy(self.k_long_term).with_knrp(self.rng.getrandbits(32))
        self.links[peer_l2] = link
        self._note_pending()
        body = {
            "nonce": link.nonce_i,
            "ts": slot,
            "knrp_id": link.keys.knrp_id,
            **_policy_body(self.policy),
        }
        return [self._msg(K.ESTABLISHMENT_REQUEST, peer_l2, body, None)]

    def release(self, peer_l2: int, slot: int, cause: str = "normal") -> list[Pc5Message]:
        link = self.links.get(peer_l2)
        if link is None or link.phase != LinkPhase.ESTABLISHED:
            return []
        return [self._msg(K.RELEASE_REQUEST, peer_l2, {"cause": cause}, link)]

    def rekey(self, peer_l2: int, slot: int) -> list[Pc5Message]:
        link = self.links.get(peer_l2)
        if link is None or link.phase != LinkPhase.ESTABLISHED:
            return []
        link.rekey_nonce = self._nonce()
        return [self._msg(K.REKEYING_REQUEST, peer_l2, {"nonce": link.rekey_nonce}, link)]

    def begin_identifier_update(self, new_l2: int, new_knrp_id: int) -> list[Pc5Message]:
        """Messages announcing an id change on every established link.

        Sent under the old source id; the caller switches self.l2_id
        after putting these on air.
        """
        out = []
        for peer, link in self.links.items():
            if link.phase == LinkPhase.ESTABLISHED and link.ctx is not None:
                body = {"new_l2": new_l2, "new_knrp_id": new_knrp_id}
                out.append(self._msg(K.IDENTIFIER_UPDATE_REQUEST, peer, body, link))
                link.keys = link.keys.with_knrp(new_knrp_id)
        return out

    # -- timers ----------------------------------------------------------

    def tick(self, slot: int) -> tuple[list[Pc5Message], list[SecurityEvent]]:
        out: list[Pc5Message] = []
        events: list[SecurityEvent] = []
        for peer, link in list(self.links.items()):
            if link.phase in PRE_ESTABLISHED and slot - link.started_slot >= self.timeout_slots:
                events.append(SecurityEvent(slot, "link_failure", peer, {"cause": "timeout"}))
                del self.links[peer]
                continue
            if link.phase != LinkPhase.ESTABLISHED or not link.is_initiator:
                continue
            if link.keepalive_next is None:
                link.keepalive_next = link.established_slot + self.keepalive_period_slots
            if slot >= link.keepalive_next:
                if link.keepalive_misses >= KEEPALIVE_MAX_MISSES:
                    events.append(
                        SecurityEvent(slot, "link_failure", peer, {"cause": "keepalive"})
                    )
                    link.phase = LinkPhase.RELEASED
                    continue
                out.append(self._msg(K.KEEPALIVE_REQUEST, peer, {"n": link.keepalive_misses}, link))
                link.keepalive_misses += 1
                link.keepalive_next += self.keepalive_period_slots
        return out, events

    # -- receive path ----------------------------------------------------

    def handle(self, msg: Pc5Message, slot: int, guard=None) -> tuple[list[Pc5Message], list[SecurityEvent]]:
        """Process one addressed PDU; returns (outbound, security events)."""
        link = self.links.get(msg.src_l2)
        handler = {
            K.ESTABLISHMENT_REQUEST: self._on_request,
            K.AUTHENTICATION_REQUEST: self._on_auth_request,
            K.AUTHENTICATION_RESPONSE: self._on_auth_response,
            K.SECURITY_MODE_COMMAND: self._on_smc,
            K.SECURITY_MODE_COMPLETE: self._on_sm_complete,
            K.ESTABLISHMENT_ACCEPT: self._on_accept,
            K.ESTABLISHMENT_REJECT: self._on_abort_kind,
            K.AUTHENTICATION_REJECT: self._on_abort_kind,
            K.AUTHENTICATION_FAILURE: self._on_abort_kind,
            K.SECURITY_MODE_REJECT: self._on_abort_kind,
            K.KEEPALIVE_REQUEST: self._on_keepalive_request,
            K.KEEPALIVE_RESPONSE: self._on_keepalive_response,
            K.RELEASE_REQUEST: self._on_release_request,
            K.RELEASE_ACCEPT: self._on_release_accept,
            K.REKEYING_REQUEST: self._on_rekey_request,
            K.REKEYING_RESPONSE: self._on_rekey_response,
            K.IDENTIFIER_UPDATE_REQUEST: self._on_id_update_request,
            K.IDENTIFIER_UPDATE_ACCEPT: self._on_id_update_accept,
            K.IDENTIFIER_UPDATE_ACK: self._on_noop,
            K.MODIFICATION_REQUEST: self._on_modification_request,
            K.MODIFICATION_ACCEPT: self._on_noop,
            K.MODIFICATION_REJECT: self._on_noop,
            K.IDENTIFIER_UPDATE_REJECT: self._on_noop,
        }.get(msg.kind)
        if handler is None:
            return [], [SecurityEvent(slot, "unknown_kind", msg.src_l2, {"kind": int(msg.kind)})]
        return handler(link, msg, slot, guard)

    def _protected_body(self, link: LinkState | None, msg: Pc5Message, slot: int):
        """Unprotect an established-phase PDU or explain why not."""
        if link is None or link.phase != LinkPhase.ESTABLISHED:
            return None, [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                        {"kind": int(msg.kind)})]
        try:
            return unprotect_pdu(link.ctx, msg), []
        except UnprotectError as err:
            kind = "replay" if err.reason == "replay" else "discard_bad_tag"
            return None, [SecurityEvent(slot, kind, msg.src_l2,
                                        {"kind": int(msg.kind), "reason": err.reason})]

    # -- establishment ---------------------------------------------------

    def _on_request(self, link, msg, slot, guard):
        events: list[SecurityEvent] = []
        if guard is not None:
            verdict = guard.check_request(msg, slot, live=link is not None and link.phase == LinkPhase.ESTABLISHED)
            if verdict is not None:
                return [], [SecurityEvent(slot, "replay_reject", msg.src_l2, {"reason": verdict})]
        if link is not None and link.phase == LinkPhase.ESTABLISHED:
            # replayed or duplicate establishment against a live link:
            # answered statelessly, never touching the standing context
            events.append(SecurityEvent(slot, "duplicate_session", msg.src_l2, {}))
            reply = self._stateless_smc(msg, slot)
            return reply, events
        peer_policy = _policy_from_body(msg.body)
        negotiation = negotiate_policy(self.policy, peer_policy)
        if negotiation.outcome == Outcome.MISMATCH:
            events.append(SecurityEvent(slot, "policy_mismatch", msg.src_l2, {}))
            body = {"cause": "policy_mismatch", "echo_nonce": msg.body["nonce"], "ts": slot}
            return [self._msg(K.ESTABLISHMENT_REJECT, msg.src_l2, body, None)], events
        new = LinkState(msg.src_l2, False, started_slot=slot)
        new.nonce_i = msg.body["nonce"]
        new.negotiation = negotiation
        new.keys = KeyHierarchy(self.k_long_term).with_knrp(msg.body["knrp_id"])
        new.peer_policy_body = dict(msg.body)
        self.links[msg.src_l2] = new
        if negotiation.outcome == Outcome.UNPROTECTED:
            new.phase = LinkPhase.ESTABLISHED
            new.established_slot = slot
            events.append(SecurityEvent(slot, "established", msg.src_l2, {"security": "none"}))
            return [self._msg(K.ESTABLISHMENT_ACCEPT, msg.src_l2, {"sess_id": 0}, new)], events
        if self.policy.auth_mandatory or peer_policy.auth_mandatory:
            new.phase = LinkPhase.AUTHENTICATING
            new.challenge = self._nonce()
            self._note_pending()
            body = {"challenge": new.challenge, "echo_nonce": new.nonce_i, "ts": slot}
            return [self._msg(K.AUTHENTICATION_REQUEST, msg.src_l2, body, None)], events
        self._note_pending()
        return self._send_smc(new, slot), events

    def _send_smc(self, link: LinkState, slot: int) -> list[Pc5Message]:
        link.phase = LinkPhase.SECURITY_MODE
        link.nonce_r = self._nonce()
        neg = link.negotiation
        link.keys = derive_session(
            link.keys,
            bytes.fromhex(link.nonce_i),
            bytes.fromhex(link.nonce_r),
            neg.cipher_alg,
            neg.integrity_alg,
        )
        link.ctx = LinkSecurityContext(link.keys, neg.cipher_on, neg.integrity_on)
        self._note_pending()
        body = {
            "nonce": link.nonce_r,
            "echo_nonce": link.nonce_i,
            "cipher_alg": neg.cipher_alg,
            "integ_alg": neg.integrity_alg,
            "ts": slot,
        }
        return [self._msg(K.SECURITY_MODE_COMMAND, link.peer_l2, body, link)]

    def _stateless_smc(self, msg: Pc5Message, slot: int) -> list[Pc5Message]:
        keys = KeyHierarchy(self.k_long_term).with_knrp(msg.body["knrp_id"])
        nonce_r = self._nonce()
        keys = derive_session(
            keys, bytes.fromhex(msg.body["nonce"]), bytes.fromhex(nonce_r),
            CIPHER_ALG, INTEG_ALG,
        )
        ctx = LinkSecurityContext(keys, True, True)
        body = {
            "nonce": nonce_r,
            "echo_nonce": msg.body["nonce"],
            "cipher_alg": CIPHER_ALG,
            "integ_alg": INTEG_ALG,
            "ts": slot,
        }
        shadow = Pc5Message(K.SECURITY_MODE_COMMAND, self.l2_id, msg.src_l2,
                            self._next_seq(), body)
        return [protect_pdu(ctx, shadow)]

    def _on_auth_request(self, link, msg, slot, guard):
        if link is None or link.phase != LinkPhase.REQUEST_SENT or not link.is_initiator:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        if msg.body.get("echo_nonce") != link.nonce_i:
            return [], [SecurityEvent(slot, "discard_unbound", msg.src_l2, {})]
        link.phase = LinkPhase.AUTHENTICATING
        proof = prf(self.k_long_term, bytes.fromhex(msg.body["challenge"])).hex()
        body = {"proof": proof, "echo_nonce": msg.body["challenge"], "ts": slot}
        return [self._msg(K.AUTHENTICATION_RESPONSE, msg.src_l2, body, None)], []

    def _on_auth_response(self, link, msg, slot, guard):
        if link is None or link.phase != LinkPhase.AUTHENTICATING or link.is_initiator:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        if msg.body.get("echo_nonce") != link.challenge:
            return [], [SecurityEvent(slot, "discard_unbound", msg.src_l2, {})]
        expected = prf(self.k_long_term, bytes.fromhex(link.challenge)).hex()
        if msg.body.get("proof") != expected:
            del self.links[msg.src_l2]
            body = {"cause": "bad_proof", "echo_nonce": link.nonce_i, "ts": slot}
            return (
                [self._msg(K.AUTHENTICATION_REJECT, msg.src_l2, body, None)],
                [SecurityEvent(slot, "auth_fail", msg.src_l2, {})],
            )
        return self._send_smc(link, slot), []

    def _on_smc(self, link, msg, slot, guard):
        if link is None or not link.is_initiator or link.phase not in (
            LinkPhase.REQUEST_SENT, LinkPhase.AUTHENTICATING
        ):
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        if msg.body.get("echo_nonce") != link.nonce_i:
            return [], [SecurityEvent(slot, "discard_unbound", msg.src_l2, {})]
        neg = Negotiation(
            Outcome.PROTECTED,
            msg.body["cipher_alg"] != NULL_ALG,
            msg.body["integ_alg"] != NULL_ALG,
        )
        keys = derive_session(
            link.keys,
            bytes.fromhex(link.nonce_i),
            bytes.fromhex(msg.body["nonce"]),
            msg.body["cipher_alg"],
            msg.body["integ_alg"],
        )
        ctx = LinkSecurityContext(keys, neg.cipher_on, neg.integrity_on)
        try:
            unprotect_pdu(ctx, msg)
        except UnprotectError as err:
            return [], [SecurityEvent(slot, "discard_bad_tag", msg.src_l2,
                                      {"kind": int(msg.kind), "reason": err.reason})]
        link.negotiation = neg
        link.keys = keys
        link.ctx = ctx
        link.nonce_r = msg.body["nonce"]
        link.phase = LinkPhase.SECURITY_MODE
        body = {"echo_nonce": link.nonce_r}
        return [self._msg(K.SECURITY_MODE_COMPLETE, msg.src_l2, body, link)], []

    def _on_sm_complete(self, link, msg, slot, guard):
        if link is None or link.is_initiator or link.phase != LinkPhase.SECURITY_MODE:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        try:
            body = unprotect_pdu(link.ctx, msg)
        except UnprotectError as err:
            return [], [SecurityEvent(slot, "discard_bad_tag", msg.src_l2,
                                      {"kind": int(msg.kind), "reason": err.reason})]
        if body.get("echo_nonce") != link.nonce_r:
            return [], [SecurityEvent(slot, "discard_unbound", msg.src_l2, {})]
        link.phase = LinkPhase.ESTABLISHED
        link.established_slot = slot
        events = [SecurityEvent(slot, "established", msg.src_l2, {"security": "context"})]
        body_out = {"sess_id": link.keys.k_nrp_sess_id}
        return [self._msg(K.ESTABLISHMENT_ACCEPT, msg.src_l2, body_out, link)], events

    def _on_accept(self, link, msg, slot, guard):
        if link is None or not link.is_initiator:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        if link.phase == LinkPhase.REQUEST_SENT and link.ctx is None:
            # null-security path: bare accept concludes it
            link.phase = LinkPhase.ESTABLISHED
            link.established_slot = slot
            link.negotiation = Negotiation(Outcome.UNPROTECTED)
            return [], [SecurityEvent(slot, "established", msg.src_l2, {"security": "none"})]
        if link.phase != LinkPhase.SECURITY_MODE:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        try:
            unprotect_pdu(link.ctx, msg)
        except UnprotectError as err:
            return [], [SecurityEvent(slot, "discard_bad_tag", msg.src_l2,
                                      {"kind": int(msg.kind), "reason": err.reason})]
        link.phase = LinkPhase.ESTABLISHED
        link.established_slot = slot
        return [], [SecurityEvent(slot, "established", msg.src_l2, {"security": "context"})]

    def _on_abort_kind(self, link, msg, slot, guard):
        """Reject/failure kinds: abort a pending link (the attack surface)."""
        if link is None or link.phase not in PRE_ESTABLISHED:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        if guard is not None:
            verdict = guard.check_response(msg, slot, link.binding_nonce())
            if verdict is not None:
                return [], [SecurityEvent(slot, "replay_reject", msg.src_l2,
                                          {"reason": verdict, "kind": int(msg.kind)})]
        cause = msg.body.get("cause", "unspecified")
        del self.links[msg.src_l2]
        return [], [SecurityEvent(slot, "link_failure", msg.src_l2,
                                  {"cause": cause, "kind": int(msg.kind)})]

    # -- established-phase procedures -------------------------------------

    def _on_keepalive_request(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        return [self._msg(K.KEEPALIVE_RESPONSE, msg.src_l2, {"n": body["n"]}, link)], events

    def _on_keepalive_response(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        link.keepalive_misses = 0
        return [], events

    def _on_release_request(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        out = [self._msg(K.RELEASE_ACCEPT, msg.src_l2, {}, link)]
        link.phase = LinkPhase.RELEASED
        events.append(SecurityEvent(slot, "released", msg.src_l2, {"cause": body.get("cause")}))
        return out, events

    def _on_release_accept(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        link.phase = LinkPhase.RELEASED
        events.append(SecurityEvent(slot, "released", msg.src_l2, {"cause": "accepted"}))
        return [], events

    def _on_rekey_request(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        fresh = self._nonce()
        out = [self._msg(K.REKEYING_RESPONSE, msg.src_l2, {"nonce": fresh}, link)]
        self._apply_rekey(link, body["nonce"], fresh)
        events.append(SecurityEvent(slot, "rekeyed", msg.src_l2, {}))
        return out, events

    def _on_rekey_response(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        self._apply_rekey(link, link.rekey_nonce, body["nonce"])
        events.append(SecurityEvent(slot, "rekeyed", msg.src_l2, {}))
        return [], events

    def _apply_rekey(self, link: LinkState, nonce_req: str, nonce_resp: str):
        neg = link.negotiation
        link.keys = derive_session(
            link.keys, bytes.fromhex(nonce_req), bytes.fromhex(nonce_resp),
            neg.cipher_alg, neg.integrity_alg,
        )
        link.ctx = LinkSecurityContext(link.keys, neg.cipher_on, neg.integrity_on)

    def _on_id_update_request(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        old = msg.src_l2
        new_l2 = body["new_l2"]
        out = [self._msg(K.IDENTIFIER_UPDATE_ACCEPT, old, {"echo_l2": new_l2}, link)]
        self.links[new_l2] = self.links.pop(old)
        link.peer_l2 = new_l2
        link.keys = link.keys.with_knrp(body["new_knrp_id"])
        events.append(SecurityEvent(slot, "identifier_update", new_l2, {"old": old}))
        return out, events

    def _on_id_update_accept(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        return [self._msg(K.IDENTIFIER_UPDATE_ACK, msg.src_l2, {}, link)], events

    def _on_modification_request(self, link, msg, slot, guard):
        body, events = self._protected_body(link, msg, slot)
        if body is None:
            return [], events
        return [self._msg(K.MODIFICATION_ACCEPT, msg.src_l2, {}, link)], events

    def _on_noop(self, link, msg, slot, guard):
        if link is None:
            return [], [SecurityEvent(slot, "unexpected_message", msg.src_l2,
                                      {"kind": int(msg.kind)})]
        if PROTECTION[msg.kind].phase == SecurityPhase.AFTER:
            body, events = self._protected_body(link, msg, slot)
            return [], events
        return [], []
