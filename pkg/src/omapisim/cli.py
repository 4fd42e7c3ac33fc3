"""Command-line front end.

    omapisim --profile card.json [--trace] [--legacy] [--client-cert HEX] COMMAND ...

Commands: readers, atr, open, transmit, close, sim-state, sim-io, script.
Exit status is 0 on success, 1 when a command fails and 2 on usage or
profile errors. With --trace every OEM-hook frame is echoed as ``>> hex``,
followed by ``<< hex`` or ``!! ERROR_NAME``.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from dataclasses import dataclass
from typing import Optional, TextIO

from .apdu import ApduError, HexError, bytes_to_hex, hex_to_bytes
from .modem import ModemResponse
from .oemhook import trace_error, trace_request, trace_response
from .profile import ProfileError, load_profile
from .stack import Stack, build_stack
from .terminal import InvalidParameter, TerminalError
from .transport import Channel, ClientIdentity, Session, TransportError

PROFILE_ENV = "OMAPI_PROFILE"

COMMAND_ERRORS = (TerminalError, TransportError, ApduError, HexError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class CliConfig:
    profile_path: str
    client_cert: Optional[str] = None
    trace: bool = False
    legacy_mode: bool = False


def _hex_arg(value: str) -> bytes:
    try:
        return hex_to_bytes(value)
    except HexError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_commands(parser: argparse.ArgumentParser, with_script: bool) -> None:
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("readers", help="list readers, system terminals first")
    sub.add_parser("atr", help="print the card ATR")
    p = sub.add_parser("open", help="open a logical channel to an applet")
    p.add_argument("--aid", type=_hex_arg, required=True)
    p = sub.add_parser("transmit", help="send an APDU on an open channel (0 is the basic channel)")
    p.add_argument("--channel", type=int, required=True)
    p.add_argument("--apdu", type=_hex_arg, required=True)
    p = sub.add_parser("close", help="close a logical channel")
    p.add_argument("--channel", type=int, required=True)
    p = sub.add_parser("sim-state", help="show or set the SIM state")
    p.add_argument("--set", choices=["READY", "ABSENT", "NOT_READY"])
    p = sub.add_parser("sim-io", help="read a file through the SIM IO path")
    p.add_argument("--file-id", type=lambda s: int(s, 16), required=True)
    p.add_argument("--path", default="3F00")
    p.add_argument("--apdu", type=_hex_arg, default=bytes.fromhex("00b0000000"))
    if with_script:
        p = sub.add_parser("script", help="run commands from a file, one per line")
        p.add_argument("file")
        p.add_argument("--keep-going", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omapisim", description="Secure element middleware over a simulated UICC.")
    parser.add_argument("--profile", default=os.environ.get(PROFILE_ENV),
                        help=f"card profile JSON (default: ${PROFILE_ENV})")
    parser.add_argument("--client-cert", help="client certificate hash, hex")
    parser.add_argument("--trace", action="store_true", help="echo OEM-hook frames")
    parser.add_argument("--legacy", action="store_true",
                        help="baseband without SELECT responses; use GET RESPONSE")
    _add_commands(parser, with_script=True)
    return parser


def _line_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="script", add_help=False)
    _add_commands(parser, with_script=False)
    return parser


class Console:
    """One stack and one session; channel numbers persist across commands."""

    def __init__(self, config: CliConfig, out: TextIO):
        self.out = out
        self.stack: Stack = build_stack(load_profile(config.profile_path), legacy_mode=config.legacy_mode)
        cert = hex_to_bytes(config.client_cert) if config.client_cert else None
        self.client = ClientIdentity(cert)
        self._session: Optional[Session] = None
        self.channels: dict[int, Channel] = {}
        if config.trace:
            self.stack.modem.add_trace_hook(self._trace)

    def _trace(self, frame: bytes, response: ModemResponse) -> None:
        print(trace_request(frame), file=self.out)
        if response.ok:
            print(trace_response(response.payload), file=self.out)
        else:
            print(trace_error(response.error), file=self.out)

    def close(self) -> None:
        self.stack.close()

    @property
    def session(self) -> Session:
        if self._session is None or self._session.is_closed():
            self._session = self.stack.reader.open_session(self.client)
        return self._session

    def _channel(self, number: int) -> Channel:
        channel = self.channels.get(number)
        if channel is not None and not channel.is_closed():
            return channel
        if number == 0:
            channel = self.session.open_basic_channel()
            self.channels[0] = channel
            return channel
        raise InvalidParameter(f"channel {number} is not open")

    def run(self, args: argparse.Namespace) -> None:
        getattr(self, "cmd_" + args.command.replace("-", "_"))(args)

    def cmd_readers(self, args) -> None:
        for reader in self.stack.service.readers():
            kind = "system" if reader.system else "add-on"
            state = "present" if reader.is_secure_element_present() else "absent"
            print(f"{reader.name} {kind} {state}", file=self.out)

    def cmd_atr(self, args) -> None:
        atr = self.stack.terminal.get_atr()
        print(bytes_to_hex(atr) if atr is not None else "-", file=self.out)

    def cmd_open(self, args) -> None:
        channel = self.session.open_logical_channel(args.aid)
        self.channels[channel.channel_number] = channel
        print(f"channel: {channel.channel_number}", file=self.out)
        select = channel.get_select_response()
        print(f"select: {bytes_to_hex(select) if select is not None else '-'}", file=self.out)

    def cmd_transmit(self, args) -> None:
        response = self._channel(args.channel).transmit(args.apdu)
        print(bytes_to_hex(response), file=self.out)

    def cmd_close(self, args) -> None:
        if args.channel == 0:
            raise InvalidParameter("the basic channel cannot be closed")
        channel = self._channel(args.channel)
        del self.channels[args.channel]
        channel.close()
        print(f"closed: {args.channel}", file=self.out)

    def cmd_sim_state(self, args) -> None:
        if args.set:
            self.stack.modem.set_sim_state(args.set)
            if args.set != "READY":
                self.channels.clear()
                self._session = None
                self.stack.service.shutdown()
        print(self.stack.modem.sim_state(), file=self.out)

    def cmd_sim_io(self, args) -> None:
        response = self.stack.terminal.sim_io_exchange(args.file_id, args.path, args.apdu)
        print(bytes_to_hex(response), file=self.out)


def _report(exc: Exception, err: TextIO, where: str = "") -> None:
    print(f"error: {where}{type(exc).__name__}: {exc}", file=err)


def run_script(console: Console, path: str, keep_going: bool, err: TextIO) -> int:
    parser = _line_parser()
    status = 0
    with open(path) as fh:
        lines = fh.read().splitlines()
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        where = f"{path}:{lineno}: "
        try:
            console.run(parser.parse_args(shlex.split(text)))
        except UsageError as exc:
            print(f"error: {where}{exc}", file=err)
            status = max(status, 2)
        except COMMAND_ERRORS as exc:
            _report(exc, err, where)
            status = max(status, 1)
        else:
            continue
        if not keep_going:
            break
    return status


def run(argv: Optional[list[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return 2
    if not args.profile:
        print(f"error: no card profile; pass --profile or set {PROFILE_ENV}", file=err)
        return 2
    config = CliConfig(args.profile, args.client_cert, args.trace, args.legacy)
    try:
        console = Console(config, out)
    except (OSError, ProfileError, HexError) as exc:
        _report(exc, err)
        return 2
    try:
        if args.command == "script":
            return run_script(console, args.file, args.keep_going, err)
        console.run(args)
        return 0
    except COMMAND_ERRORS as exc:
        _report(exc, err)
        return 1
    except OSError as exc:
        _report(exc, err)
        return 2
    finally:
        console.close()


def main() -> int:
    return run()
