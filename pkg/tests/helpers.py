"""Shared constants and the trace recorder."""

from pathlib import Path

from omapisim.modem import ModemResponse
from omapisim.oemhook import trace_error, trace_request, trace_response

ROOT = Path(__file__).resolve().parent.parent
DEMO_PROFILE = ROOT / "profiles" / "demo.json"
DATA = Path(__file__).resolve().parent / "data"

APPLET_AID = bytes.fromhex("0102030405")
APPLET_FCI = bytes.fromhex("6f07840501020304059000")
GP_AID = bytes.fromhex("a000000151000000")
UNKNOWN_AID = bytes.fromhex("deadbeef00")


class TraceRecorder:
    """Collects (frame, response) pairs and the matching trace lines."""

    def __init__(self):
        self.pairs: list[tuple[bytes, ModemResponse]] = []

    def __call__(self, frame: bytes, response: ModemResponse) -> None:
        self.pairs.append((frame, response))

    @property
    def frames(self) -> list[bytes]:
        return [f for f, _ in self.pairs]

    def lines(self) -> list[str]:
        out = []
        for frame, response in self.pairs:
            out.append(trace_request(frame))
            out.append(trace_response(response.payload) if response.ok else trace_error(response.error))
        return out

    def clear(self) -> None:
        self.pairs.clear()
