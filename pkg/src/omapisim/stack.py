"""Wire the layers together: card -> modem -> telephony -> terminal -> transport."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .card import VirtualCard
from .modem import Modem
from .phone import PhoneService
from .profile import CardProfile
from .terminal import UiccTerminal
from .transport import Reader, SeService


@dataclass
class Stack:
    card: VirtualCard
    modem: Modem
    phone: PhoneService
    terminal: UiccTerminal
    service: SeService
    reader: Reader

    def close(self) -> None:
        self.service.shutdown()
        self.phone.close()

    def __enter__(self) -> "Stack":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def build_stack(profile: Optional[CardProfile] = None, legacy_mode: bool = False,
                closed_world: bool = False, name: str = "SIM1") -> Stack:
    """Build a full stack over a fresh card.

    ``legacy_mode`` makes the modem omit SELECT responses from open replies
    and switches the terminal to its GET RESPONSE fallback.
    """
    profile = profile or CardProfile()
    card = profile.build_card()
    modem = Modem(card, return_select_response=not legacy_mode)
    phone = PhoneService(modem)
    terminal = UiccTerminal(phone, name=name, legacy_mode=legacy_mode)
    service = SeService()
    reader = service.add_terminal(terminal, ara_aid=profile.ara_aid, closed_world=closed_world)
    return Stack(card, modem, phone, terminal, service, reader)
