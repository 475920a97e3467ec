import json
import math

import pytest

from tschsim.energy import (M3, STATES, EnergyError, EnergyLedger, PlatformCurrents,
                            SlotCounters, average_power, ledger_from_counters, lifetime_days,
                            radio_duty_cycle)
from tschsim.metrics import (MetricsError, build_report, idle_listen_count, latency_stats,
                             mean_ci, pdr, summarize)
from tschsim.topology import builtin_topology
from tschsim.trace import Event, SlotTrace, TraceFormatError, read_trace

S5 = builtin_topology("simple5")


def _oracle_power(ledger, cur=M3):
    # sum over states of duty * current * voltage, written out long-hand
    amps = {"cpu": cur.cpu, "lpm": cur.lpm, "deep_lpm": cur.deep_lpm, "tx": cur.tx,
            "rx_receive": cur.rx, "rx_idle": cur.rx}
    return sum(getattr(ledger, s) / ledger.elapsed * amps[s] * cur.voltage for s in amps)


def test_all_deep_sleep():
    pw = average_power(EnergyLedger(deep_lpm=10.0, elapsed=10.0))
    assert pw.total_mw == pytest.approx(0.0066, abs=1e-15)


def test_idle_plus_deep_sleep():
    led = EnergyLedger(rx_idle=0.01, deep_lpm=0.99, elapsed=1.0)
    pw = average_power(led)
    assert pw.total_mw == pytest.approx((0.01 * 12.3 + 0.99 * 0.002) * 3.3, abs=1e-12)
    assert pw.total_mw == pytest.approx(0.412434, abs=1e-9)


@pytest.mark.parametrize("led", [
    EnergyLedger(cpu=0.02, lpm=0.5, deep_lpm=0.48, tx=0.004, rx_receive=0.01, rx_idle=0.03,
                 elapsed=1.0),
    EnergyLedger(cpu=72.0, lpm=3000.0, deep_lpm=528.0, tx=3.1, rx_receive=20.0, rx_idle=110.0,
                 elapsed=3600.0),
])
def test_hand_cases_and_breakdown(led):
    pw = average_power(led)
    assert pw.total_mw == pytest.approx(_oracle_power(led), rel=1e-12)
    assert math.fsum(pw.by_state_mw.values()) == pytest.approx(pw.total_mw, rel=1e-12)
    assert list(pw.by_state_mw) == list(STATES)


def test_power_is_scale_invariant_and_additive():
    a = EnergyLedger(cpu=1, lpm=50, deep_lpm=49, tx=0.5, rx_idle=2, elapsed=100)
    b = EnergyLedger(cpu=3, lpm=90, deep_lpm=7, tx=1.5, rx_receive=4, elapsed=100)
    assert average_power(a.scaled(7.5)).total_mw == pytest.approx(average_power(a).total_mw)
    ab = a + b
    assert ab.elapsed == 200 and ab.rx_receive == 4 and ab.cpu == 4


def test_counters_to_ledger():
    c = SlotCounters(tx_slots=10, rx_receive_slots=5, rx_idle_slots=20, skip_slots=30,
                     decisions=50, slots=1000)
    led = ledger_from_counters(c, 0.01, overhead_duty=0.004)
    assert led.elapsed == pytest.approx(10.0)
    assert led.tx == pytest.approx(0.04)
    assert led.rx_receive == pytest.approx(0.01 + 0.05 + 0.04)
    assert led.rx_idle == pytest.approx(0.2)
    assert led.deep_lpm == pytest.approx(0.3)
    assert led.cpu == pytest.approx(0.2 + 0.005)
    assert led.cpu + led.lpm + led.deep_lpm == pytest.approx(led.elapsed)
    assert led.radio_on <= led.elapsed


def test_radio_duty_cycle():
    assert radio_duty_cycle(EnergyLedger(lpm=3600, elapsed=3600)) == 0.0
    assert radio_duty_cycle(EnergyLedger(rx_idle=36, lpm=3600, elapsed=3600)) == pytest.approx(0.01)
    with pytest.raises(EnergyError):
        radio_duty_cycle(EnergyLedger())


def test_lifetime():
    assert lifetime_days(0.561) == pytest.approx(49.0196, rel=1e-4)
    assert lifetime_days(2376 / 86400 * 1000) == pytest.approx(1.0, rel=1e-12)
    assert lifetime_days(1.0, 2 * 2376) == pytest.approx(2 * lifetime_days(1.0))
    with pytest.raises(EnergyError):
        lifetime_days(0.0)


def test_currents_must_be_positive():
    with pytest.raises(EnergyError):
        PlatformCurrents(rx=0.0)


# -- trace metrics --------------------------------------------------------

def _trace(events, warmup=0):
    return SlotTrace(10.0, 17, 1, warmup, 1000, [Event(*e) for e in events])


def _gen(asn, src, seq):
    return (asn, asn % 17, -1, src, 2, "gen", seq, "-")


def _sink_ack(asn, seq):
    return (asn, asn % 17, 1, 1, 2, "ack", seq, "sink")


def test_pdr_counting():
    ev = [_gen(10 * i, 3, i) for i in range(10)]
    ev += [_sink_ack(10 * i + 5, i) for i in range(9)]
    ev.append((300, 2, 2, 2, 1, "drop_retry", 9, "-"))
    assert pdr(_trace(ev), S5) == pytest.approx(0.9)
    assert pdr(_trace(ev[:-1]), S5) == 1.0        # in flight, not counted


def test_pdr_ignores_relay_origins_and_warmup():
    ev = [_gen(5, 2, 1), (50, 0, 0, 2, 1, "drop_retry", 1, "-"), _gen(5, 3, 2),
          (60, 0, 0, 2, 1, "drop_retry", 2, "-"), _gen(200, 3, 3), _sink_ack(250, 3)]
    assert pdr(_trace(ev, warmup=100), S5) == 1.0


def test_latency_stats():
    st = latency_stats(_trace([_gen(100, 3, 1), _sink_ack(150, 1)]))
    assert st.mean_ms == 500.0 and st.count == 1
    ev = [_gen(0, 3, 1), _gen(0, 4, 2), _gen(0, 5, 3),
          _sink_ack(10, 1), _sink_ack(20, 2), _sink_ack(30, 3)]
    st = latency_stats(_trace(ev))
    assert st.mean_ms == pytest.approx(200.0)
    assert st.p99_ms >= st.median_ms
    with pytest.raises(MetricsError):
        latency_stats(_trace([_gen(0, 3, 1)]))


def test_idle_count_excludes_skips_and_warmup():
    ev = [(k, 2, 2, -1, 2, "rx_idle", -1, "-") for k in (2, 19, 36)]
    ev.append((53, 2, 2, -1, 2, "skip", -1, "policy"))
    assert idle_listen_count(_trace(ev), 2) == 3
    assert idle_listen_count(_trace(ev, warmup=20), 2) == 1


def test_trace_round_trip():
    tr = _trace([_gen(0, 3, 1), _sink_ack(10, 1)], warmup=3)
    import io
    back = read_trace(io.StringIO(tr.dumps()))
    assert back == tr
    with pytest.raises(TraceFormatError):
        read_trace(io.StringIO("asn,slot\n"))


def test_report_serialization_and_breakdown():
    from tschsim.engine import Engine
    from tschsim.traffic import traffic_pattern
    res = Engine(S5, traffic_pattern("periodic", S5), seed=2, warmup_slots=2000).run(60_000)
    rep = build_report(res.trace, S5, res.ledgers, "orchestra", "t", 2)
    assert rep.pdr == 1.0
    for n in rep.nodes:
        assert math.fsum(n.power_by_state_mw.values()) == pytest.approx(n.power_mw, rel=1e-12)
    lines = rep.to_csv().splitlines()
    assert len(lines) == 1 + 5 + 1 and lines[-1].startswith("network,network,1.0,")
    doc = json.loads(rep.to_json())
    assert list(doc) == ["protocol", "scenario", "seed", "network", "nodes"]
    assert rep.to_json() == build_report(res.trace, S5, res.ledgers, "orchestra", "t", 2).to_json()


def test_confidence_interval():
    m, h = mean_ci([1.0, 2.0, 3.0])
    # t(0.975, 2) = 4.302652729...; s = 1
    assert m == 2.0 and h == pytest.approx(4.302652729911275 / math.sqrt(3), rel=1e-9)
    assert mean_ci([5.0]) == (5.0, 0.0)
    with pytest.raises(MetricsError):
        summarize([])
