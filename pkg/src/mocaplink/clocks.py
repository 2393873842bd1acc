"""Clock and task-runtime abstractions.

Everything in the service that ticks (ingest sources, senders) runs on a
Runtime.  ThreadRuntime drives tasks from the OS scheduler against a
monotonic clock; VirtualRuntime is a single-threaded discrete-event
scheduler driven by an explicitly advanced clock, used for deterministic
timing tests and fast replays.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from typing import Callable, Iterator, Optional, Protocol

log = logging.getLogger(__name__)

# tick_fn(now, scheduled, missed): `missed` is the number of schedule grid
# slots skipped because the task ran more than one full period late.
TickFn = Callable[[float, float, int], None]
PeriodFn = Callable[[], float]


class Clock(Protocol):
    def now(self) -> float: ...


class MonotonicClock:
    """Wall-time monotonic clock, zeroed at construction (service epoch)."""

    def __init__(self) -> None:
        self._epoch = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._epoch


class VirtualClock:
    """Simulated clock; only a VirtualRuntime advances it."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = start

    def now(self) -> float:
        return self._now

    def _advance_to(self, t: float) -> None:
        if t < self._now:
            raise ValueError(f"virtual clock cannot run backwards ({t} < {self._now})")
        self._now = t


class TaskHandle:
    def __init__(self, name: str) -> None:
        self.name = name
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    @property
    def stopped(self) -> bool:
        return self._stop.is_set()

    def stop(self) -> None:
        self._stop.set()

    def join(self, timeout: float = 5.0) -> None:
        if self._thread is not None:
            self._thread.join(timeout)


class Runtime(Protocol):
    clock: Clock

    def spawn_periodic(self, name: str, period_fn: PeriodFn, tick_fn: TickFn) -> TaskHandle: ...

    def spawn_stream(
        self,
        name: str,
        events: Iterator[tuple[Optional[float], object]],
        handle_fn: Callable[[object], None],
        on_stop: Optional[Callable[[], None]] = None,
    ) -> TaskHandle: ...

    def stop_all(self) -> None: ...


class ThreadRuntime:
    """One daemon thread per task, absolute-deadline scheduling.

    Periodic tasks keep their tick grid aligned to the original schedule;
    when a tick fires more than one period late the skipped grid slots are
    reported to the tick function as `missed` and the grid realigns.
    """

    def __init__(self, clock: Optional[Clock] = None) -> None:
        self.clock: Clock = clock if clock is not None else MonotonicClock()
        self._handles: list[TaskHandle] = []
        self._lock = threading.Lock()

    def spawn_periodic(self, name: str, period_fn: PeriodFn, tick_fn: TickFn) -> TaskHandle:
        handle = TaskHandle(name)

        def loop() -> None:
            period = period_fn()
            deadline = self.clock.now() + period
            while True:
                wait = deadline - self.clock.now()
                if handle._stop.wait(wait if wait > 0 else 0):
                    return
                now = self.clock.now()
                period = period_fn()
                missed = int((now - deadline) // period) if now - deadline > period else 0
                try:
                    tick_fn(now, deadline, missed)
                except Exception:
                    log.exception("periodic task %r tick failed", name)
                period = period_fn()  # config changes apply from the next tick
                deadline = deadline + period * (missed + 1)

        handle._thread = threading.Thread(target=loop, name=name, daemon=True)
        with self._lock:
            self._handles.append(handle)
        handle._thread.start()
        return handle

    def spawn_stream(
        self,
        name: str,
        events: Iterator[tuple[Optional[float], object]],
        handle_fn: Callable[[object], None],
        on_stop: Optional[Callable[[], None]] = None,
    ) -> TaskHandle:
        handle = TaskHandle(name)

        def loop() -> None:
            try:
                for due, item in events:
                    if due is not None:
                        while True:
                            wait = due - self.clock.now()
                            if wait <= 0:
                                break
                            if handle._stop.wait(min(wait, 0.5)):
                                return
                    if handle._stop.is_set():
                        return
                    try:
                        handle_fn(item)
                    except Exception:
                        log.exception("stream task %r failed to handle item", name)
            except Exception:
                if not handle._stop.is_set():
                    log.exception("stream task %r terminated", name)

        def stop_hook() -> None:
            if on_stop is not None:
                on_stop()

        handle._on_stop = stop_hook  # type: ignore[attr-defined]
        handle._thread = threading.Thread(target=loop, name=name, daemon=True)
        with self._lock:
            self._handles.append(handle)
        handle._thread.start()
        return handle

    def stop(self, handle: TaskHandle) -> None:
        handle.stop()
        hook = getattr(handle, "_on_stop", None)
        if hook is not None:
            hook()
        handle.join()

    def stop_all(self) -> None:
        with self._lock:
            handles = list(self._handles)
            self._handles.clear()
        for h in handles:
            h.stop()
            hook = getattr(h, "_on_stop", None)
            if hook is not None:
                hook()
        for h in handles:
            h.join()


class VirtualRuntime:
    """Deterministic single-threaded scheduler over a VirtualClock.

    Tasks never run concurrently; events fire in (time, spawn-order) order
    when run_until()/run_for() is called.  Periodic ticks land exactly on
    their grid, so `missed` is always 0 here.
    """

    def __init__(self, clock: Optional[VirtualClock] = None) -> None:
        self.clock: VirtualClock = clock if clock is not None else VirtualClock()
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._counter = itertools.count()
        self._handles: list[TaskHandle] = []

    def _schedule(self, t: float, action: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (t, next(self._counter), action))

    def spawn_periodic(self, name: str, period_fn: PeriodFn, tick_fn: TickFn) -> TaskHandle:
        handle = TaskHandle(name)
        self._handles.append(handle)

        def fire(scheduled: float) -> None:
            if handle.stopped:
                return
            tick_fn(scheduled, scheduled, 0)
            if not handle.stopped:
                nxt = scheduled + period_fn()
                self._schedule(nxt, lambda: fire(nxt))

        first = self.clock.now() + period_fn()
        self._schedule(first, lambda: fire(first))
        return handle

    def spawn_stream(
        self,
        name: str,
        events: Iterator[tuple[Optional[float], object]],
        handle_fn: Callable[[object], None],
        on_stop: Optional[Callable[[], None]] = None,
    ) -> TaskHandle:
        handle = TaskHandle(name)
        self._handles.append(handle)
        it = iter(events)

        def pump() -> None:
            if handle.stopped:
                return
            try:
                due, item = next(it)
            except StopIteration:
                return
            at = self.clock.now() if due is None else max(due, self.clock.now())
            self._schedule(at, lambda: deliver(item))

        def deliver(item: object) -> None:
            if handle.stopped:
                return
            handle_fn(item)
            pump()

        pump()
        return handle

    def run_until(self, t_end: float) -> None:
        while self._heap and self._heap[0][0] <= t_end:
            t, _, action = heapq.heappop(self._heap)
            self.clock._advance_to(t)
            action()
        self.clock._advance_to(t_end)

    def run_for(self, duration: float) -> None:
        self.run_until(self.clock.now() + duration)

    def stop(self, handle: TaskHandle) -> None:
        handle.stop()

    def stop_all(self) -> None:
        for h in self._handles:
            h.stop()
        self._handles.clear()
        self._heap.clear()
