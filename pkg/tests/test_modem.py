import threading

import pytest
from hypothesis import given, settings, strategies as st

from helpers import APPLET_AID, APPLET_FCI, DEMO_PROFILE, UNKNOWN_AID
from omapisim.profile import load_profile
from omapisim import oemhook
from omapisim.modem import ABSENT, NOT_READY, READY, Modem, ModemResponse, exchange_to_command
from omapisim.apdu import ApduError
from omapisim.oemhook import (
    CloseChannel, Exchange, GetAtr, OpenChannel, RilError, decode_atr_response,
    decode_open_response, encode_request,
)

H = bytes.fromhex
PROFILE = load_profile(DEMO_PROFILE)


@pytest.fixture
def modem(demo_profile):
    return Modem(demo_profile.build_card())


def _open(modem, aid=APPLET_AID):
    return modem.submit(encode_request(OpenChannel(aid)))


def test_atr(modem):
    assert modem.submit(H("150d0004")) == ModemResponse(payload=H("02003b00"))


def test_open_known_and_unknown(modem):
    assert _open(modem).payload == H("01010b") + APPLET_FCI
    assert _open(modem, UNKNOWN_AID).error is RilError.NO_SUCH_ELEMENT


def test_close_unknown_id(modem):
    assert modem.submit(H("150a000800000007")).error is RilError.INVALID_PARAMETER
    assert modem.submit(H("150a000800000002")).error is RilError.INVALID_PARAMETER


def test_fourth_open_is_missing_resource(modem):
    for _ in range(3):
        assert _open(modem).ok
    assert _open(modem).error is RilError.MISSING_RESOURCE


def test_close_then_reopen(modem):
    _open(modem)
    assert modem.submit(encode_request(CloseChannel(1))).payload == b""
    assert decode_open_response(_open(modem).payload).channel_id == 1


def test_exchange_cases(modem):
    _open(modem)
    run = lambda *a, **k: modem.submit(encode_request(Exchange(1, *a, **k))).payload
    assert run(0x01, 0x44, 0, 0) == H("9000")
    assert run(0x01, 0xB0, 0, 0, p3=0x10) == H("00112233445566778899aabbccddeeff9000")
    assert run(0x01, 0xD6, 0, 0, p3=2, data=H("cafe")) == H("9000")
    assert run(0x01, 0x88, 0, 0, p3=8, data=H("010203040506070800")) == H("1122334455667788910a")


@pytest.mark.parametrize("req", [
    Exchange(1, 0, 0xD6, 0, 0, p3=4, data=H("cafe")),
    Exchange(1, 0, 0xD6, 0, 0, p3=0, data=H("cafe")),
])
def test_exchange_length_mismatch_is_invalid(modem, req):
    _open(modem)
    assert modem.submit(encode_request(req)).error is RilError.INVALID_PARAMETER


def test_exchange_on_unopened_or_huge_channel(modem):
    assert modem.submit(encode_request(Exchange(2, 0, 0xCA, 0, 0))).error is RilError.INVALID_PARAMETER
    assert modem.submit(encode_request(Exchange(99, 0, 0xCA, 0, 0))).error is RilError.INVALID_PARAMETER


def test_exchange_to_command_cases():
    assert exchange_to_command(Exchange(1, 0, 0x44, 0, 0)).case == 1
    assert exchange_to_command(Exchange(1, 0, 0xB0, 0, 0, p3=0)).le == 0
    assert exchange_to_command(Exchange(1, 0, 0xD6, 0, 0, p3=1, data=H("aa"))).case == 3
    assert exchange_to_command(Exchange(1, 0, 0xD6, 0, 0, p3=1, data=H("aa00"))).case == 4
    with pytest.raises(ApduError):
        exchange_to_command(Exchange(1, 0, 0xD6, 0, 0, p3=3, data=H("aa")))


def test_malformed_frames_are_invalid_parameter(modem):
    for frame in (b"", H("15"), H("150d0005"), H("99990004")):
        assert modem.submit(frame).error is RilError.INVALID_PARAMETER


def test_absent_card_is_generic_failure(modem):
    modem.set_sim_state(ABSENT)
    assert modem.submit(H("150d0004")).error is RilError.GENERIC_FAILURE
    assert _open(modem).error is RilError.GENERIC_FAILURE
    assert modem.submit_sim_io(0x2F00, "3F00", H("00b0000000")).error is RilError.GENERIC_FAILURE


def test_sim_io(modem):
    assert modem.submit_sim_io(0x2F00, "3F00", H("00b0000000")).payload == H("aabb9000")
    assert modem.submit_sim_io(0x2F00, "3F00", b"").error is RilError.INVALID_PARAMETER


def test_sim_state_transitions(modem):
    seen = []
    modem.add_state_listener(seen.append)
    assert modem.sim_state() == READY
    modem.set_sim_state(NOT_READY)
    assert modem.sim_state() == NOT_READY and not modem.card.present
    modem.set_sim_state(ABSENT)
    modem.set_sim_state(ABSENT)
    modem.set_sim_state(READY)
    assert seen == [NOT_READY, ABSENT, READY]
    with pytest.raises(ValueError):
        modem.set_sim_state("LOADED")


def test_trace_hook_sees_every_pair(modem):
    pairs = []
    modem.add_trace_hook(lambda f, r: pairs.append((f, r)))
    modem.submit(H("150d0004"))
    modem.submit(b"\x00")
    assert [p[0] for p in pairs] == [H("150d0004"), b"\x00"]
    assert not pairs[1][1].ok


def test_response_exclusivity():
    with pytest.raises(ValueError):
        ModemResponse()
    with pytest.raises(ValueError):
        ModemResponse(b"", RilError.GENERIC_FAILURE)


frames = st.one_of(
    st.binary(max_size=24),
    st.builds(lambda aid: encode_request(OpenChannel(aid)), st.binary(min_size=1, max_size=17)),
    st.builds(lambda n: encode_request(CloseChannel(n)), st.integers(0, 5)),
    st.builds(lambda n, ins, p3, d: encode_request(Exchange(n, 0, ins, 0, 0, p3, d if p3 is not None else b"")),
              st.integers(0, 5), st.sampled_from([0xCA, 0xB0, 0xA4, 0x70, 0xC0]),
              st.none() | st.integers(0, 3), st.binary(max_size=4)),
)


@settings(max_examples=300)
@given(st.lists(frames, max_size=12))
def test_errors_never_mutate_card(batch):
    modem = Modem(PROFILE.build_card())
    _open(modem)
    for frame in batch:
        before = modem.card.snapshot()
        response = modem.submit(frame)
        if not response.ok:
            assert modem.card.snapshot() == before


@settings(max_examples=200)
@given(st.lists(frames, max_size=12))
def test_payloads_decode_with_matching_decoder(batch):
    modem = Modem(PROFILE.build_card())
    for frame in batch:
        response = modem.submit(frame)
        if not response.ok:
            continue
        req = oemhook.decode_request(frame)
        if isinstance(req, GetAtr):
            decode_atr_response(response.payload)
        elif isinstance(req, OpenChannel):
            assert decode_open_response(response.payload).channel_id in (1, 2, 3)
        elif isinstance(req, CloseChannel):
            assert response.payload == b""
        else:
            assert len(response.payload) >= 2


def test_concurrent_opens_are_serialized(modem):
    results = []
    lock = threading.Lock()

    def worker():
        r = _open(modem)
        with lock:
            results.append(r)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ids = sorted(decode_open_response(r.payload).channel_id for r in results if r.ok)
    assert ids == [1, 2, 3]
    assert sum(r.error is RilError.MISSING_RESOURCE for r in results) == 5
