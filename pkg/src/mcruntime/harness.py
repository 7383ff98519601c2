"""In-process multi-party execution with role-scoped timing.

Parties are handles with private state and an inbox. A party program is a
callable taking its :class:`PartyHandle`; it may be a plain function (one
round) or a generator, where each bare ``yield`` ends a round. The harness
delivers every broadcast of a round before any party starts the next one,
so programs never block on receive and the same code runs under sequential
and concurrent scheduling.
"""
from __future__ import annotations

import hashlib
import inspect
import json
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol

CLIENT = "client"
SERVER = "server"
ROLES = (CLIENT, SERVER)

SEQUENTIAL = "sequential"
CONCURRENT = "concurrent"


class HarnessError(RuntimeError):
    pass


class HarnessClosedError(HarnessError):
    pass


class NestedTimingError(HarnessError):
    pass


# -- clocks -----------------------------------------------------------------

class Clock(Protocol):
    def now(self) -> int:
        """Monotonic timestamp in nanoseconds."""


class MonotonicClock:
    def now(self) -> int:
        return time.perf_counter_ns()


class FakeClock:
    """Manually driven clock; ``step`` nanoseconds elapse on every read."""

    def __init__(self, start: int = 0, step: int = 0):
        self._t = start
        self.step = step
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            t = self._t
            self._t += self.step
            return t

    def advance(self, ns: int) -> None:
        if ns < 0:
            raise ValueError("clock cannot go backwards")
        with self._lock:
            self._t += ns


# -- timing -------------------------------------------------------------------

@dataclass
class RuntimeSample:
    """One protocol run's client and server times in milliseconds."""

    t_cli: float = 0.0
    t_srv: float = 0.0
    iteration: int = 0
    h_u: float = 0.0
    value: int | None = None
    phases: list[tuple[str, str, float]] = field(default_factory=list)
    party_ms: dict[int, float] = field(default_factory=dict)


class RoleTimer:
    """Accumulates elapsed time per role into a :class:`RuntimeSample`."""

    def __init__(self, clock: Clock, iteration: int = 0):
        self.clock = clock
        self.sample = RuntimeSample(iteration=iteration)
        self._active: set[str] = set()

    @contextmanager
    def measure(self, role: str, phase: str = ""):
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if role in self._active:
            raise NestedTimingError(f"{role} time is already being measured")
        self._active.add(role)
        start = self.clock.now()
        try:
            yield
        finally:
            elapsed = (self.clock.now() - start) / 1e6
            self._active.discard(role)
            if role == CLIENT:
                self.sample.t_cli += elapsed
            else:
                self.sample.t_srv += elapsed
            self.sample.phases.append((role, phase, elapsed))

    def time(self, role: str, thunk: Callable[[], Any], phase: str = "") -> Any:
        with self.measure(role, phase):
            return thunk()


def time_role(clock: Clock, role: str, thunk: Callable[[], Any], timer: RoleTimer | None = None):
    """Run ``thunk`` and return ``(result, elapsed_ms)``, booking it to ``timer`` if given."""
    timer = timer or RoleTimer(clock)
    before = len(timer.sample.phases)
    result = timer.time(role, thunk)
    return result, timer.sample.phases[before][2]


# -- parties --------------------------------------------------------------------

@dataclass(frozen=True)
class Message:
    sender: int
    msg_type: str
    payload: Any
    seq: int


class PartyHandle:
    def __init__(self, harness: SimHarness, index: int, program: Callable | None, state: dict | None):
        self.index = index
        self.program = program
        self._harness = harness
        self._state = dict(state or {})
        self._inbox: deque[Message] = deque()
        self._sent = 0
        self.output: Any = None

    def _touch(self) -> None:
        current = getattr(self._harness._local, "party", None)
        if current is not None and current != self.index:
            with self._harness._lock:
                self._harness.cross_party_accesses += 1

    @property
    def state(self) -> dict:
        self._touch()
        return self._state

    @property
    def inbox(self) -> list[Message]:
        self._touch()
        return list(self._inbox)

    def receive(self, msg_type: str | None = None) -> list[Message]:
        """Remove and return inbox messages (of ``msg_type`` if given), oldest first."""
        self._touch()
        taken = [m for m in self._inbox if msg_type is None or m.msg_type == msg_type]
        if msg_type is None:
            self._inbox.clear()
        else:
            kept = [m for m in self._inbox if m.msg_type != msg_type]
            self._inbox.clear()
            self._inbox.extend(kept)
        return taken

    def broadcast(self, msg_type: str, payload: Any) -> None:
        self._harness._broadcast(self, msg_type, payload)


class SimHarness:
    """Runs party programs in one process, sequentially or on worker threads."""

    def __init__(self, clock: Clock | None = None, scheduling: str = SEQUENTIAL,
                 record_transcript: bool = False):
        if scheduling not in (SEQUENTIAL, CONCURRENT):
            raise ValueError(f"unknown scheduling {scheduling!r}")
        self.clock = clock or MonotonicClock()
        self.scheduling = scheduling
        self.record_transcript = record_transcript
        self.transcript: list[dict] = []
        self.cross_party_accesses = 0
        self.broadcasts = 0
        self.deliveries = 0
        self.party_ms: dict[int, float] = {}
        self._parties: list[PartyHandle] = []
        self._round = 0
        self._closed = False
        self._lock = threading.Lock()
        self._local = threading.local()
        self._pool: ThreadPoolExecutor | None = None

    def spawn(self, k: int, program: Callable | None = None,
              states: Iterable[dict] | None = None) -> list[PartyHandle]:
        """Create ``k`` parties (1-based) wired for all-to-all broadcast."""
        if k < 1:
            raise ValueError("need at least one party")
        if self._closed:
            raise HarnessClosedError("harness is shut down")
        states = list(states) if states is not None else [{}] * k
        if len(states) != k:
            raise ValueError("one initial state per party is required")
        self._parties = [PartyHandle(self, i + 1, program, s) for i, s in enumerate(states)]
        self._round = 0
        return list(self._parties)

    def _broadcast(self, sender: PartyHandle, msg_type: str, payload: Any) -> None:
        if self._closed:
            raise HarnessClosedError("send after harness shutdown")
        with self._lock:
            sender._sent += 1
            msg = Message(sender.index, msg_type, payload, sender._sent)
            # the sender keeps its own value locally rather than sending to itself
            for party in self._parties:
                party._inbox.append(msg)
            self.broadcasts += 1
            self.deliveries += len(self._parties)
            if self.record_transcript:
                self.transcript.append({
                    "step": self._round,
                    "party": sender.index,
                    "msg_type": msg_type,
                    "payload_digest": hashlib.sha256(repr(payload).encode()).hexdigest()[:16],
                })

    def _advance(self, party: PartyHandle, runner) -> tuple[bool, Any]:
        """Run one round of ``party``; returns (finished, output)."""
        self._local.party = party.index
        start = self.clock.now()
        try:
            if runner is None:
                return True, party.program(party)
            try:
                next(runner)
                return False, None
            except StopIteration as stop:
                return True, stop.value
        finally:
            self._local.party = None
            elapsed = (self.clock.now() - start) / 1e6
            with self._lock:
                self.party_ms[party.index] = self.party_ms.get(party.index, 0.0) + elapsed

    def run(self, parties: list[PartyHandle] | None = None) -> list[Any]:
        """Execute every party's program to completion; returns outputs in party order."""
        if self._closed:
            raise HarnessClosedError("harness is shut down")
        parties = parties if parties is not None else self._parties
        self.party_ms = {}
        runners: dict[int, Any] = {}
        live = []
        for p in parties:
            if p.program is None:
                raise HarnessError(f"party {p.index} has no program")
            if inspect.isgeneratorfunction(p.program):
                runners[p.index] = p.program(p)
            else:
                runners[p.index] = None
            live.append(p)

        while live:
            if self.scheduling == CONCURRENT and len(live) > 1:
                pool = self._get_pool(len(live))
                futures = [pool.submit(self._advance, p, runners[p.index]) for p in live]
                results = [f.result() for f in futures]
            else:
                results = [self._advance(p, runners[p.index]) for p in live]
            still = []
            for p, (done, out) in zip(live, results):
                if done:
                    p.output = out
                    # a one-shot function is not resumable
                    runners.pop(p.index, None)
                else:
                    still.append(p)
            live = still
            self._round += 1
        return [p.output for p in parties]

    def _get_pool(self, k: int) -> ThreadPoolExecutor:
        if self._pool is None or self._pool._max_workers < k:
            if self._pool is not None:
                self._pool.shutdown()
            self._pool = ThreadPoolExecutor(max_workers=k, thread_name_prefix="party")
        return self._pool

    def shutdown(self) -> None:
        self._closed = True
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def dump_transcript(self, fp) -> None:
        """Write the recorded transcript as JSON lines."""
        for entry in self.transcript:
            fp.write(json.dumps(entry, sort_keys=True) + "\n")
