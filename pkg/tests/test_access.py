import itertools

import pytest
from hypothesis import given, strategies as st

from helpers import APPLET_AID, APPLET_FCI
from oracles import PRECEDENCE, masked_match, precedence_decision
from omapisim.access import (
    DEFAULT_ARA_AID, AccessRule, ApduFilter, Decision, ParseError, Policy, RuleDatabase,
    decide_apdu, decide_channel_open, decode_rules, encode_rules, governing_rule, load_rules,
)
from omapisim.card import AppletScript, Handler
from omapisim.profile import CardProfile
from omapisim.stack import build_stack

H = bytes.fromhex
AID = H("0102030405")
OTHER_AID = H("0102030406")
CERT = H("aa" * 20)
OTHER_CERT = H("bb" * 20)


def _rule(level: str, policy: Policy) -> AccessRule:
    aid = AID if level.startswith("aid") else None
    cert = CERT if level.endswith("cert") else None
    return AccessRule(aid, cert, policy)


def precedence_matrix():
    """Every presence subset of the four levels with every policy assignment."""
    for mask in range(16):
        levels = [lvl for i, lvl in enumerate(PRECEDENCE) if mask >> i & 1]
        for policies in itertools.product(("allow", "deny"), repeat=len(levels)):
            yield dict(zip(levels, policies))


def test_precedence_matrix_is_exhaustive():
    cases = list(precedence_matrix())
    assert len({frozenset(c) for c in cases}) == 16
    for present in cases:
        db = RuleDatabase([_rule(lvl, Policy.ALLOW if p == "allow" else Policy.DENY)
                           for lvl, p in present.items()])
        got = decide_channel_open(db, CERT, AID)
        assert got.value == precedence_decision(present), present


@pytest.mark.parametrize("header, expected", [
    ("00a40400", Decision.ALLOW),
    ("80ca0000", Decision.DENY),
    ("00a4ffff", Decision.ALLOW),
])
def test_filter_mask_cases(header, expected):
    f = ApduFilter(H("00a40000"), H("ffff0000"))
    db = RuleDatabase([AccessRule(AID, None, Policy.FILTERED, [f])])
    assert decide_channel_open(db, CERT, AID) is Decision.ALLOW
    assert decide_apdu(db, CERT, AID, H(header)) is expected
    assert masked_match(H(header), f.header, f.mask) == (expected is Decision.ALLOW)


@given(st.binary(min_size=4, max_size=4), st.binary(min_size=4, max_size=4),
       st.binary(min_size=4, max_size=4))
def test_filter_matches_oracle(header, fh, mask):
    assert ApduFilter(fh, mask).matches(header) == masked_match(header, fh, mask)


@given(st.binary(min_size=4, max_size=4))
def test_allow_rule_allows_every_apdu(header):
    db = RuleDatabase([AccessRule(None, None, Policy.ALLOW)])
    assert decide_apdu(db, None, AID, header) is Decision.ALLOW


def test_specific_deny_wins():
    db = RuleDatabase([AccessRule(AID, CERT, Policy.DENY), AccessRule(AID, None, Policy.ALLOW)])
    assert decide_channel_open(db, CERT, AID) is Decision.DENY
    assert decide_channel_open(db, OTHER_CERT, AID) is Decision.ALLOW
    assert decide_channel_open(db, CERT, OTHER_AID) is Decision.DENY


def test_anonymous_client_only_matches_any_cert():
    db = RuleDatabase([AccessRule(AID, CERT, Policy.ALLOW)])
    assert decide_channel_open(db, None, AID) is Decision.DENY
    assert governing_rule(db, None, AID) is None


def test_world_defaults():
    assert decide_channel_open(RuleDatabase.absent(), None, AID) is Decision.ALLOW
    assert decide_channel_open(RuleDatabase.absent(), None, AID, closed_world=True) is Decision.DENY
    assert decide_apdu(RuleDatabase.absent(), None, AID, H("00000000")) is Decision.ALLOW
    assert decide_channel_open(RuleDatabase([]), None, AID) is Decision.DENY


def test_rule_validation():
    with pytest.raises(ValueError):
        AccessRule(AID, None, Policy.FILTERED)
    with pytest.raises(ValueError):
        AccessRule(AID, None, Policy.ALLOW, [ApduFilter(bytes(4), bytes(4))])
    with pytest.raises(ValueError):
        ApduFilter(bytes(3), bytes(4))
    with pytest.raises(ValueError):
        RuleDatabase([AccessRule(None, None, Policy.ALLOW), AccessRule(None, None, Policy.DENY)])


def test_blob_layout():
    rule = AccessRule(AID, None, Policy.FILTERED, [ApduFilter(H("00a40000"), H("ffff0000"))])
    assert encode_rules([rule]) == H("05" "0102030405" "00" "02" "01" "00a40000ffff0000")
    assert decode_rules(H("00000100")) == RuleDatabase([AccessRule(None, None, Policy.ALLOW)])


@pytest.mark.parametrize("blob", ["05010203", "000003 00", "0000", "00000201", "0000010000000100"])
def test_malformed_blob(blob):
    with pytest.raises(ParseError):
        decode_rules(H(blob.replace(" ", "")))


optional_bytes = st.none() | st.binary(min_size=1, max_size=16)
filters = st.builds(ApduFilter, st.binary(min_size=4, max_size=4), st.binary(min_size=4, max_size=4))


@st.composite
def rules(draw):
    policy = draw(st.sampled_from(list(Policy)))
    fs = draw(st.lists(filters, min_size=1, max_size=3)) if policy is Policy.FILTERED else []
    return AccessRule(draw(optional_bytes), draw(optional_bytes), policy, fs)


databases = st.lists(rules(), max_size=6, unique_by=lambda r: r.key).map(RuleDatabase)


@given(databases)
def test_blob_round_trip(db):
    assert decode_rules(encode_rules(db.rules)) == db


def _stack_with_rules(rule_list, **kwargs):
    applet = AppletScript(APPLET_AID, APPLET_FCI, (Handler(0xCA, H("9000")),))
    return build_stack(CardProfile(applets=[applet], rules=rule_list), **kwargs)


def test_load_rules_through_terminal():
    rule_list = [AccessRule(None, None, Policy.ALLOW)]
    with _stack_with_rules(rule_list) as s:
        assert load_rules(s.terminal) == RuleDatabase(rule_list)
        assert s.terminal.channel_ids == [0, 0, 0, 0]


def test_load_rules_without_ara(stack):
    assert load_rules(stack.terminal) == RuleDatabase.absent()


def test_load_rules_fetch_failure():
    with build_stack(CardProfile(applets=[AppletScript(DEFAULT_ARA_AID, H("9000"))])) as s:
        with pytest.raises(ParseError):
            load_rules(s.terminal)
        assert s.terminal.channel_ids == [0, 0, 0, 0]
