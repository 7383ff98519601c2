import io
import json
import random

import pytest

from mcruntime import harness as hs
from mcruntime.mean_protocols import MeanProtocolConfig, run_protocol


def test_broadcast_reaches_every_inbox():
    h = hs.SimHarness()
    parties = h.spawn(3, lambda p: None)
    parties[0].broadcast("x", 42)
    for p in parties:
        assert [m.payload for m in p.inbox] == [42]
    assert sum(len(p.inbox) for p in parties) == 3


def test_single_party_run():
    h = hs.SimHarness()
    parties = h.spawn(1, lambda p: p.state["v"] * 2, [{"v": 21}])
    assert h.run(parties) == [42]


def test_parties_can_open_broadcast_sum():
    def program(p):
        p.broadcast("d", p.state["d"])
        yield
        return sum(m.payload for m in p.receive("d"))

    for scheduling in (hs.SEQUENTIAL, hs.CONCURRENT):
        h = hs.SimHarness(scheduling=scheduling)
        parties = h.spawn(4, program, [{"d": d} for d in (3, 5, 7, 11)])
        assert h.run(parties) == [26] * 4
        assert h.deliveries == 4 * h.broadcasts == 16
        h.shutdown()


def test_fifo_per_sender_concurrent():
    k, count = 4, 300

    def program(p):
        for i in range(count):
            p.broadcast("seq", (p.index, i))
        yield
        return [m.payload for m in p.receive("seq")]

    h = hs.SimHarness(scheduling=hs.CONCURRENT)
    outputs = h.run(h.spawn(k, program))
    for received in outputs:
        assert len(received) == k * count
        for sender in range(1, k + 1):
            assert [i for s, i in received if s == sender] == list(range(count))
    h.shutdown()


def test_receive_filters_by_type():
    h = hs.SimHarness()
    a, b = h.spawn(2, lambda p: None)
    a.broadcast("x", 1)
    a.broadcast("y", 2)
    b.broadcast("x", 3)
    assert [m.payload for m in b.receive("x")] == [1, 3]
    assert [m.payload for m in b.inbox] == [2]


def test_send_after_shutdown():
    h = hs.SimHarness()
    (p,) = h.spawn(1, lambda p: None)
    h.shutdown()
    with pytest.raises(hs.HarnessClosedError):
        p.broadcast("x", 1)


def test_cross_party_access_is_counted():
    h = hs.SimHarness()
    handles = []

    def snoop(p):
        other = handles[p.index % len(handles)]
        return other.state.get("secret")

    handles.extend(h.spawn(2, snoop, [{"secret": 1}, {"secret": 2}]))
    h.run(handles)
    assert h.cross_party_accesses == 2


@pytest.mark.parametrize("protocol", ["HE", "MPC"])
def test_protocol_runs_touch_only_own_state(protocol, keys512):
    h = hs.SimHarness(scheduling=hs.CONCURRENT)
    cfg = MeanProtocolConfig(protocol, mode="paper_faithful", key_bits=512)
    run_protocol([5, 6, 7], cfg, h, random.Random(1), keys512)
    assert h.cross_party_accesses == 0
    h.shutdown()


def test_sequential_and_concurrent_agree():
    cfg = MeanProtocolConfig("MPC", parties=5, mode="paper_faithful")
    data = list(range(100, 160))
    results = []
    for scheduling in (hs.SEQUENTIAL, hs.CONCURRENT):
        with hs.SimHarness(scheduling=scheduling) as h:
            results.append(run_protocol(data, cfg, h, random.Random(5)).value)
    assert results[0] == results[1]


def _transcript(seed):
    h = hs.SimHarness(hs.FakeClock(step=10), record_transcript=True)
    cfg = MeanProtocolConfig("MPC", mode="paper_faithful")
    out = run_protocol([1, 2, 3, 4, 5], cfg, h, random.Random(seed))
    buf = io.StringIO()
    h.dump_transcript(buf)
    return out.value, buf.getvalue()


def test_transcript_deterministic_and_well_formed():
    v1, t1 = _transcript(8)
    v2, t2 = _transcript(8)
    assert (v1, t1) == (v2, t2)
    lines = [json.loads(line) for line in t1.splitlines()]
    assert len(lines) == 3
    assert set(lines[0]) == {"step", "party", "msg_type", "payload_digest"}
    assert [e["party"] for e in lines] == [1, 2, 3]
    assert _transcript(9)[1] != t1


def test_fake_clock_unit_conversion():
    clock = hs.FakeClock()

    def work():
        clock.advance(2_000_000)
        return "done"

    assert hs.time_role(clock, hs.CLIENT, work) == ("done", 2.0)
    assert hs.time_role(clock, hs.SERVER, lambda: None) == (None, 0.0)


def test_role_timer_accumulates_and_rejects_nesting():
    clock = hs.FakeClock(step=1_000_000)
    timer = hs.RoleTimer(clock)
    timer.time(hs.CLIENT, lambda: None)
    timer.time(hs.SERVER, lambda: None)
    timer.time(hs.CLIENT, lambda: None)
    assert timer.sample.t_cli == 2.0 and timer.sample.t_srv == 1.0
    with pytest.raises(hs.NestedTimingError):
        timer.time(hs.CLIENT, lambda: timer.time(hs.CLIENT, lambda: None))
    with pytest.raises(ValueError):
        timer.time("auditor", lambda: None)


def test_timing_partition(keys512):
    for protocol in ("HE", "MPC"):
        h = hs.SimHarness(hs.FakeClock(step=1000))
        cfg = MeanProtocolConfig(protocol, mode="paper_faithful", key_bits=512)
        res = run_protocol([1, 2, 3], cfg, h, random.Random(0), keys512)
        s = res.timings
        cli = sum(e for role, _, e in s.phases if role == hs.CLIENT)
        srv = sum(e for role, _, e in s.phases if role == hs.SERVER)
        assert (cli, srv) == (s.t_cli, s.t_srv)
        assert [p for _, p, _ in s.phases] == ["prepare", "compute", "finish"]


def test_monotone_workload_real_clock(keys512):
    cfg = MeanProtocolConfig("HE", mode="paper_faithful", key_bits=512)
    h = hs.SimHarness()
    rng = random.Random(3)
    small = min(run_protocol([7] * 50, cfg, h, rng, keys512).timings.t_cli for _ in range(3))
    large = min(run_protocol([7] * 500, cfg, h, rng, keys512).timings.t_cli for _ in range(3))
    assert large > 5 * small


def test_per_party_breakdown_collected():
    h = hs.SimHarness(hs.FakeClock(step=500_000))
    cfg = MeanProtocolConfig("MPC", parties=3, mode="paper_faithful")
    res = run_protocol([1, 2, 3], cfg, h, random.Random(0))
    assert set(res.timings.party_ms) == {1, 2, 3}
