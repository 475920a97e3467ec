"""Energest-style per-state time accounting and the derived power figures."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

STATES = ("cpu", "lpm", "deep_lpm", "tx", "rx_receive", "rx_idle")
RADIO_STATES = ("tx", "rx_receive", "rx_idle")

# intra-slot timing (fractions of one timeslot)
TX_FRACTION = 0.4
ACK_WAIT_FRACTION = 0.1
CPU_BASE_DUTY = 0.02
DECISION_FRACTION = 0.01

E_BATTERY_COIN_CELL = 3 * 220 * 3.6  # 3 V x 220 mAh, joules


class EnergyError(ValueError):
    pass


@dataclass
class EnergyLedger:
    """Seconds spent per state. MCU states (cpu, lpm, deep_lpm) partition
    ``elapsed``; radio states run alongside them."""
    cpu: float = 0.0
    lpm: float = 0.0
    deep_lpm: float = 0.0
    tx: float = 0.0
    rx_receive: float = 0.0
    rx_idle: float = 0.0
    elapsed: float = 0.0

    def __add__(self, other: "EnergyLedger") -> "EnergyLedger":
        return EnergyLedger(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                               for f in fields(self)})

    def scaled(self, c: float) -> "EnergyLedger":
        return EnergyLedger(**{f.name: c * getattr(self, f.name) for f in fields(self)})

    @property
    def radio_on(self) -> float:
        return self.tx + self.rx_receive + self.rx_idle

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SlotCounters:
    """Raw per-node slot tallies the engine keeps; converted to a ledger on demand."""
    tx_slots: int = 0
    rx_receive_slots: int = 0
    rx_idle_slots: int = 0
    skip_slots: int = 0
    decisions: int = 0
    slots: int = 0

    def __add__(self, other: "SlotCounters") -> "SlotCounters":
        return SlotCounters(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                               for f in fields(self)})


def ledger_from_counters(c: SlotCounters, timeslot_s: float,
                         overhead_duty: float = 0.0) -> EnergyLedger:
    """Charge slot tallies to states.

    Transmit slots: 40% TX plus 10% ack wait (RX). Listened slots: a full
    slot of RX, receive or idle by outcome. Skipped slots: DEEP_LPM. CPU:
    2% baseline plus 1% of a slot per agent decision. Beacon and broadcast
    slotframes add ``overhead_duty`` of RX time. The rest is LPM.
    """
    elapsed = c.slots * timeslot_s
    tx = c.tx_slots * TX_FRACTION * timeslot_s
    rx_receive = (c.tx_slots * ACK_WAIT_FRACTION + c.rx_receive_slots) * timeslot_s \
        + overhead_duty * elapsed
    rx_idle = c.rx_idle_slots * timeslot_s
    cpu = CPU_BASE_DUTY * elapsed + c.decisions * DECISION_FRACTION * timeslot_s
    deep = c.skip_slots * timeslot_s
    lpm = max(0.0, elapsed - cpu - deep)
    return EnergyLedger(cpu=cpu, lpm=lpm, deep_lpm=deep, tx=tx, rx_receive=rx_receive,
                        rx_idle=rx_idle, elapsed=elapsed)


@dataclass(frozen=True)
class PlatformCurrents:
    """Current draw per state in mA (IoT-LAB M3 defaults) and supply voltage."""
    cpu: float = 14.0
    lpm: float = 0.014
    deep_lpm: float = 0.002
    tx: float = 11.6
    rx: float = 12.3
    voltage: float = 3.3

    def __post_init__(self):
        if min(self.cpu, self.lpm, self.deep_lpm, self.tx, self.rx, self.voltage) <= 0:
            raise EnergyError("currents and voltage must be positive")

    def current_for(self, state: str) -> float:
        return self.rx if state.startswith("rx") else getattr(self, state)


M3 = PlatformCurrents()


@dataclass(frozen=True)
class PowerBreakdown:
    total_mw: float
    by_state_mw: dict
    current_ma: float


def average_power(ledger: EnergyLedger, currents: PlatformCurrents = M3) -> PowerBreakdown:
    if ledger.elapsed <= 0:
        raise EnergyError("ledger has no elapsed time")
    parts = {}
    for s in STATES:
        duty = getattr(ledger, s) / ledger.elapsed
        parts[s] = duty * currents.current_for(s) * currents.voltage
    current = sum(getattr(ledger, s) / ledger.elapsed * currents.current_for(s) for s in STATES)
    return PowerBreakdown(total_mw=sum(parts.values()), by_state_mw=parts, current_ma=current)


def radio_duty_cycle(ledger: EnergyLedger) -> float:
    if ledger.elapsed <= 0:
        raise EnergyError("ledger has no elapsed time")
    return ledger.radio_on / ledger.elapsed


def lifetime_days(power_mw: float, battery_joules: float = E_BATTERY_COIN_CELL) -> float:
    if power_mw <= 0:
        raise EnergyError("power must be positive")
    return battery_joules / (power_mw / 1000.0 * 86400.0)
