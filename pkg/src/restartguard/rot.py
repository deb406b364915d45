"""Emulated hardware restart timer (root of trust).

Per cycle the timer accepts exactly one arming call; later calls are
ignored until the restart has fired and the module is re-armed for the next
cycle.  Arming is only possible while awaiting; the fire time, once set,
cannot be changed by anyone — that is the whole point of the module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

__all__ = ["RotEmulator", "RestartSignal", "RotStateError"]


class RotStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class RestartSignal:
    armed_at: float
    fire_at: float
    fired_at: float


class RotEmulator:
    """Single-set, single-fire restart timer driven by simulation time."""

    AWAITING_SET = "awaiting_set"
    ARMED = "armed"
    FIRED = "fired"

    def __init__(self):
        self.phase = self.AWAITING_SET
        self.fire_at: Optional[float] = None
        self._armed_at: Optional[float] = None
        self._last_now = -float("inf")
        self.ignored_sets = 0
        self.cycles_completed = 0

    def _advance_clock(self, now: float):
        if now < self._last_now:
            raise RotStateError(
                f"time went backwards: {now} after {self._last_now}")
        self._last_now = now

    def set_restart_time(self, now: float, delta: float) -> bool:
        """Arm the timer to fire at now + delta.  Only the first call of a
        cycle (with delta > 0) is accepted; everything else is ignored."""
        self._advance_clock(now)
        if delta <= 0.0:
            return False
        if self.phase != self.AWAITING_SET:
            self.ignored_sets += 1
            return False
        self.phase = self.ARMED
        self.fire_at = now + delta
        self._armed_at = now
        return True

    def poll(self, now: float) -> Optional[RestartSignal]:
        """Emit the restart signal exactly once, at the first poll at or
        past the armed time."""
        self._advance_clock(now)
        if self.phase == self.ARMED and now >= self.fire_at:
            self.phase = self.FIRED
            return RestartSignal(self._armed_at, self.fire_at, now)
        return None

    def rearm(self) -> None:
        """Open the next cycle; legal only after the signal has fired."""
        if self.phase != self.FIRED:
            raise RotStateError(f"rearm in phase {self.phase}")
        self.phase = self.AWAITING_SET
        self.fire_at = None
        self._armed_at = None
        self.cycles_completed += 1
