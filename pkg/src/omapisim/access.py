"""A simplified access-control enforcer keyed on (applet AID, client certificate hash).

Rules live on the card in an ARA applet and are fetched with a single
GET DATA style command. The rule blob is a flat record list::

    [aid_len:1][aid][hash_len:1][hash][policy:1][n_filters:1][header:4 mask:4]*

A zero aid_len or hash_len means "any".
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterable, Optional

from .apdu import parse_command, set_cla_channel, sw_success

log = logging.getLogger(__name__)

DEFAULT_ARA_AID = bytes.fromhex("a00000015141434c00")
FETCH_RULES = bytes.fromhex("80caff4000")


class ParseError(ValueError):
    pass


class Policy(enum.IntEnum):
    DENY = 0
    ALLOW = 1
    FILTERED = 2


class Decision(enum.Enum):
    ALLOW = "allow"
    DENY = "deny"


@dataclass(frozen=True)
class ApduFilter:
    header: bytes
    mask: bytes

    def __post_init__(self):
        object.__setattr__(self, "header", bytes(self.header))
        object.__setattr__(self, "mask", bytes(self.mask))
        if len(self.header) != 4 or len(self.mask) != 4:
            raise ValueError("APDU filter header and mask are 4 bytes each")

    def matches(self, header: bytes) -> bool:
        return all((h & m) == (f & m) for h, f, m in zip(header, self.header, self.mask))


@dataclass(frozen=True)
class AccessRule:
    """``aid`` or ``cert_hash`` of None means the rule applies to any."""

    aid: Optional[bytes]
    cert_hash: Optional[bytes]
    policy: Policy
    filters: tuple[ApduFilter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))
        if self.aid is not None:
            object.__setattr__(self, "aid", bytes(self.aid))
            if not 1 <= len(self.aid) <= 255:
                raise ValueError("rule AID must be 1..255 bytes")
        if self.cert_hash is not None:
            object.__setattr__(self, "cert_hash", bytes(self.cert_hash))
            if not 1 <= len(self.cert_hash) <= 255:
                raise ValueError("rule certificate hash must be 1..255 bytes")
        if (self.policy is Policy.FILTERED) != bool(self.filters):
            raise ValueError("filters are required for, and only allowed on, FILTERED rules")
        if len(self.filters) > 255:
            raise ValueError("at most 255 filters per rule")

    @property
    def key(self) -> tuple[Optional[bytes], Optional[bytes]]:
        return self.aid, self.cert_hash

    @property
    def specificity(self) -> int:
        # specific aid outranks specific cert; both outrank neither
        return (2 if self.aid is not None else 0) + (1 if self.cert_hash is not None else 0)


@dataclass(frozen=True)
class RuleDatabase:
    rules: tuple[AccessRule, ...] = ()
    present: bool = True

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        keys = [r.key for r in self.rules]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate rule for the same (aid, certificate) pair")

    @classmethod
    def absent(cls) -> "RuleDatabase":
        return cls((), present=False)


def encode_rules(rules: Iterable[AccessRule]) -> bytes:
    out = bytearray()
    for rule in rules:
        aid = rule.aid or b""
        cert = rule.cert_hash or b""
        out += bytes([len(aid)]) + aid + bytes([len(cert)]) + cert
        out += bytes([rule.policy, len(rule.filters)])
        for f in rule.filters:
            out += f.header + f.mask
    return bytes(out)


def decode_rules(blob: bytes) -> RuleDatabase:
    rules = []
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise ParseError(f"rule blob truncated at offset {pos}")
        chunk = bytes(blob[pos:pos + n])
        pos += n
        return chunk

    while pos < len(blob):
        aid = take(take(1)[0])
        cert = take(take(1)[0])
        policy_byte, n_filters = take(2)
        try:
            policy = Policy(policy_byte)
        except ValueError:
            raise ParseError(f"unknown policy byte 0x{policy_byte:02x}") from None
        filters = [ApduFilter(take(4), take(4)) for _ in range(n_filters)]
        try:
            rules.append(AccessRule(aid or None, cert or None, policy, filters))
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    try:
        return RuleDatabase(rules)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_rules(terminal, ara_aid: bytes = DEFAULT_ARA_AID) -> RuleDatabase:
    """Fetch and parse the rule database through a terminal's logical channel."""
    from .terminal import NoSuchElement

    try:
        channel = terminal.internal_open_logical_channel(ara_aid)
    except NoSuchElement:
        return RuleDatabase.absent()
    try:
        fetch = bytes([set_cla_channel(FETCH_RULES[0], channel)]) + FETCH_RULES[1:]
        response = terminal.internal_transmit(fetch)
    finally:
        terminal.internal_close_logical_channel(channel)
    if len(response) < 2 or not sw_success(response[-2]):
        raise ParseError(f"rule fetch failed with status {response[-2:].hex()}")
    db = decode_rules(response[:-2])
    log.debug("loaded %d access rules", len(db.rules))
    return db


def governing_rule(db: RuleDatabase, cert_hash: Optional[bytes], aid: bytes) -> Optional[AccessRule]:
    candidates = [
        r for r in db.rules
        if (r.aid is None or r.aid == aid) and (r.cert_hash is None or r.cert_hash == cert_hash)
    ]
    return max(candidates, key=lambda r: r.specificity, default=None)


def decide_channel_open(db: RuleDatabase, cert_hash: Optional[bytes], aid: bytes,
                        closed_world: bool = False) -> Decision:
    if not db.present:
        return Decision.DENY if closed_world else Decision.ALLOW
    rule = governing_rule(db, cert_hash, bytes(aid))
    if rule is None or rule.policy is Policy.DENY:
        return Decision.DENY
    return Decision.ALLOW


def decide_apdu(db: RuleDatabase, cert_hash: Optional[bytes], aid: bytes, header: bytes,
                closed_world: bool = False) -> Decision:
    if not db.present:
        return Decision.DENY if closed_world else Decision.ALLOW
    rule = governing_rule(db, cert_hash, bytes(aid))
    if rule is None or rule.policy is Policy.DENY:
        return Decision.DENY
    if rule.policy is Policy.ALLOW:
        return Decision.ALLOW
    header = bytes(header[:4])
    return Decision.ALLOW if any(f.matches(header) for f in rule.filters) else Decision.DENY


def ara_applet(rules: Iterable[AccessRule], aid: bytes = DEFAULT_ARA_AID):
    """Build the card applet that serves ``rules`` to :func:`load_rules`."""
    from .card import AppletScript, Handler

    fetch = parse_command(FETCH_RULES)
    blob = encode_rules(rules)
    return AppletScript(
        aid=aid,
        select_response=bytes.fromhex("9000"),
        handlers=(Handler(fetch.ins, blob + b"\x90\x00", fetch.p1, fetch.p2),),
        default_reply=bytes.fromhex("6d00"),
    )
