import random
import struct

import pytest
from hypothesis import given, strategies as st

from omapisim.oemhook import (
    CloseChannel, Exchange, GetAtr, LengthMismatch, MalformedFrame, OemCommandCode, OemHookError,
    OpenChannel, OpenChannelResponse, RilError, TruncatedFrame, UnknownCommandCode, ZeroChannelId,
    FrameTooLong, decode_atr_response, decode_open_response, decode_request, encode_atr_response,
    encode_open_response, encode_request, map_ril_error,
)

H = bytes.fromhex


@pytest.mark.parametrize("req, frame", [
    (GetAtr(), "150d0004"),
    (OpenChannel(H("0102030405")), "150900090102030405"),
    (CloseChannel(1), "150a000800000001"),
    (Exchange(0, 0x80, 0xF2, 0x00, 0x00), "1508000880f20000"),
    (Exchange(1, 0x00, 0xB0, 0x00, 0x00, p3=5), "150b000d00b000000500000001"),
    (Exchange(2, 0x00, 0xF2, 0x00, 0x00), "150c000c00f2000000000002"),
])
def test_encode_examples(req, frame):
    assert encode_request(req) == H(frame)
    assert decode_request(H(frame)) == req


def test_decode_examples():
    assert decode_request(H("150d0004")) == GetAtr()
    assert decode_request(H("15090005aa")) == OpenChannel(H("aa"))
    with pytest.raises(LengthMismatch):
        decode_request(H("150a000700 0001".replace(" ", "")))


@pytest.mark.parametrize("frame, error", [
    ("", TruncatedFrame),
    ("150d00", TruncatedFrame),
    ("150d0005", LengthMismatch),
    ("150d000500", LengthMismatch),
    ("15ff0004", UnknownCommandCode),
    ("160d0004", UnknownCommandCode),
    ("150c000c00f2000000000000", ZeroChannelId),
    ("150b000d00b000000500000000", ZeroChannelId),
    ("150c000e00f20000000000020102", LengthMismatch),
    ("150b000c00b0000005000000", LengthMismatch),
    ("1508000700b000", LengthMismatch),
])
def test_decode_errors(frame, error):
    with pytest.raises(error):
        decode_request(H(frame))


def test_frame_too_long():
    with pytest.raises(FrameTooLong):
        encode_request(OpenChannel(bytes(0xFFFF - 3)))
    assert len(encode_request(OpenChannel(bytes(0xFFFF - 4)))) == 0xFFFF


def test_exchange_rejects_data_without_p3():
    with pytest.raises(ValueError):
        Exchange(1, 0, 0xD6, 0, 0, None, b"\x01")


def test_code_selection_three_way():
    for channel_id in (0, 1, 0xFFFFFFFF):
        for p3 in (None, 0, 0xFF):
            code = encode_request(Exchange(channel_id, 0, 0xCA, 0, 0, p3))[:2]
            if channel_id == 0:
                assert code == H("1508")
            elif p3 is None:
                assert code == H("150c")
            else:
                assert code == H("150b")


bytes_ = st.integers(0, 255)
u32 = st.integers(0, 0xFFFFFFFF)


@st.composite
def exchanges(draw):
    p3 = draw(st.none() | bytes_)
    data = b"" if p3 is None else draw(st.binary(max_size=300))
    return Exchange(draw(u32), draw(bytes_), draw(bytes_), draw(bytes_), draw(bytes_), p3, data)


requests = st.one_of(
    st.just(GetAtr()),
    st.builds(OpenChannel, st.binary(max_size=64)),
    st.builds(CloseChannel, u32),
    exchanges(),
)


@given(requests)
def test_round_trip_and_header_invariant(req):
    frame = encode_request(req)
    assert frame[0] == 0x15
    assert struct.unpack(">H", frame[2:4])[0] == len(frame)
    assert decode_request(frame) == req


@given(st.binary(max_size=40))
def test_decoder_never_crashes(raw):
    try:
        decode_request(raw)
    except OemHookError:
        pass


def test_atr_response():
    assert decode_atr_response(H("02003b00")) == H("3b00")
    assert decode_atr_response(H("0000")) is None
    with pytest.raises(TruncatedFrame):
        decode_atr_response(H("05ff3b"))
    assert encode_atr_response(H("3b00")) == H("02003b00")


@given(st.binary(max_size=255))
def test_atr_round_trip(atr):
    decoded = decode_atr_response(encode_atr_response(atr))
    assert decoded == (atr or None)


def _handset_open_loop(raw: bytes) -> tuple[int, bytes]:
    """The handset's decoding loop, transcribed literally with unsigned bytes."""
    id_len = raw[0]
    channel_id = 0
    i = id_len
    while i >= 1:
        channel_id <<= 8
        channel_id |= raw[i] & 0xFF
        i -= 1
    sel_len = raw[id_len + 1]
    return channel_id, raw[id_len + 2:id_len + 2 + sel_len]


def test_open_response_examples():
    assert decode_open_response(H("0102029000")) == OpenChannelResponse(2, H("9000"))
    assert decode_open_response(H("02010000")) == OpenChannelResponse(1, None)
    assert decode_open_response(H("010100")) == OpenChannelResponse(1, None)
    assert decode_open_response(H("02000100")) == OpenChannelResponse(256, None)


@pytest.mark.parametrize("raw, error", [
    ("", TruncatedFrame), ("01", TruncatedFrame), ("010102aa", TruncatedFrame),
    ("0100", TruncatedFrame), ("010000", ZeroChannelId), ("050102030405", MalformedFrame),
    ("00", MalformedFrame),
])
def test_open_response_errors(raw, error):
    with pytest.raises(error):
        decode_open_response(H(raw))


def test_open_response_inverse_sampled():
    rng = random.Random(7)
    for id_len in range(1, 5):
        for sel_len in list(range(0, 256, 5)) + [255]:
            channel_id = rng.randrange(1, 1 << (8 * id_len))
            select = bytes(rng.randrange(256) for _ in range(sel_len))
            raw = encode_open_response(channel_id, select, id_len=id_len)
            assert _handset_open_loop(raw) == (channel_id, select)
            assert decode_open_response(raw) == OpenChannelResponse(channel_id, select or None)


def test_open_response_default_id_len():
    assert encode_open_response(3, H("9000")) == H("0103029000")
    with pytest.raises(ZeroChannelId):
        encode_open_response(0)


@pytest.mark.parametrize("code, error", [
    (27, RilError.INVALID_PARAMETER), (29, RilError.NO_SUCH_ELEMENT),
    (30, RilError.MISSING_RESOURCE), (1, RilError.GENERIC_FAILURE), (28, RilError.GENERIC_FAILURE),
])
def test_map_ril_error(code, error):
    assert map_ril_error(code) is error


def test_command_codes():
    assert all(code >> 8 == 0x15 for code in OemCommandCode)
