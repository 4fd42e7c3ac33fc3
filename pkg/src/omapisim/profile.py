"""JSON card profiles.

Schema (all byte strings are hex, case-insensitive on input, lowercase on output)::

    {
      "atr": "3b00",
      "applets": [
        {"aid": "0102030405",
         "select_response": "6f07840501020304059000",
         "handlers": [{"ins": "ca", "p1": "00", "p2": null, "reply": "cafe9000"}],
         "default_reply": "6d00"}
      ],
      "files": [{"file_id": "2f00", "path": "3F00", "content": "aabb"}],
      "access_control": {
        "ara_aid": "a00000015141434c00",
        "rules": [{"aid": "0102030405", "cert": "any", "policy": "filtered",
                   "filters": [{"header": "00a40000", "mask": "ffff0000"}]}]
      }
    }

``access_control`` is optional; without it the card has no ARA applet.
``p1``/``p2`` may be omitted or null to match anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .access import DEFAULT_ARA_AID, AccessRule, ApduFilter, Policy, ara_applet
from .apdu import bytes_to_hex, hex_to_bytes
from .card import DEFAULT_ATR, AppletScript, Handler, VirtualCard


class ProfileError(ValueError):
    pass


@dataclass
class CardProfile:
    atr: bytes = DEFAULT_ATR
    applets: list[AppletScript] = field(default_factory=list)
    files: dict[tuple[int, str], bytes] = field(default_factory=dict)
    rules: Optional[list[AccessRule]] = None
    ara_aid: bytes = DEFAULT_ARA_AID

    def build_card(self) -> VirtualCard:
        card = VirtualCard(atr=self.atr, files=dict(self.files))
        for applet in self.applets:
            card.install(applet)
        if self.rules is not None:
            card.install(ara_applet(self.rules, self.ara_aid))
        return card


def _byte(value: Optional[str]) -> Optional[int]:
    if value is None:
        return None
    raw = hex_to_bytes(value)
    if len(raw) != 1:
        raise ProfileError(f"expected one hex byte, got {value!r}")
    return raw[0]


def _hex_byte(value: Optional[int]) -> Optional[str]:
    return None if value is None else f"{value:02x}"


def _ref(value: str) -> Optional[bytes]:
    return None if value.lower() == "any" else hex_to_bytes(value)


def profile_from_dict(doc: dict[str, Any]) -> CardProfile:
    try:
        applets = [
            AppletScript(
                aid=hex_to_bytes(a["aid"]),
                select_response=hex_to_bytes(a["select_response"]),
                handlers=tuple(
                    Handler(_byte(h["ins"]), hex_to_bytes(h["reply"]), _byte(h.get("p1")), _byte(h.get("p2")))
                    for h in a.get("handlers", [])
                ),
                default_reply=hex_to_bytes(a.get("default_reply", "6d00")),
            )
            for a in doc.get("applets", [])
        ]
        files = {
            (int(f["file_id"], 16), f["path"].upper()): hex_to_bytes(f["content"])
            for f in doc.get("files", [])
        }
        rules = None
        ara_aid = DEFAULT_ARA_AID
        ac = doc.get("access_control")
        if ac is not None:
            ara_aid = hex_to_bytes(ac.get("ara_aid", bytes_to_hex(DEFAULT_ARA_AID)))
            rules = [
                AccessRule(
                    _ref(r.get("aid", "any")),
                    _ref(r.get("cert", "any")),
                    Policy[r["policy"].upper()],
                    tuple(ApduFilter(hex_to_bytes(f["header"]), hex_to_bytes(f["mask"]))
                          for f in r.get("filters", [])),
                )
                for r in ac.get("rules", [])
            ]
        return CardProfile(hex_to_bytes(doc.get("atr", "3b00")), applets, files, rules, ara_aid)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ProfileError):
            raise
        raise ProfileError(f"bad card profile: {exc!r}") from exc


def profile_to_dict(profile: CardProfile) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "atr": bytes_to_hex(profile.atr),
        "applets": [
            {
                "aid": bytes_to_hex(a.aid),
                "select_response": bytes_to_hex(a.select_response),
                "handlers": [
                    {"ins": _hex_byte(h.ins), "p1": _hex_byte(h.p1), "p2": _hex_byte(h.p2),
                     "reply": bytes_to_hex(h.reply)}
                    for h in a.handlers
                ],
                "default_reply": bytes_to_hex(a.default_reply),
            }
            for a in profile.applets
        ],
        "files": [
            {"file_id": f"{fid:04x}", "path": path, "content": bytes_to_hex(content)}
            for (fid, path), content in profile.files.items()
        ],
    }
    if profile.rules is not None:
        doc["access_control"] = {
            "ara_aid": bytes_to_hex(profile.ara_aid),
            "rules": [
                {
                    "aid": "any" if r.aid is None else bytes_to_hex(r.aid),
                    "cert": "any" if r.cert_hash is None else bytes_to_hex(r.cert_hash),
                    "policy": r.policy.name.lower(),
                    "filters": [{"header": bytes_to_hex(f.header), "mask": bytes_to_hex(f.mask)}
                                for f in r.filters],
                }
                for r in profile.rules
            ],
        }
    return doc


def load_profile(path: Union[str, Path]) -> CardProfile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: {exc}") from exc
    return profile_from_dict(doc)


def dump_profile(profile: CardProfile, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(profile), indent=2) + "\n")
