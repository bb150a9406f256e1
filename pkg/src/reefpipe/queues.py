"""Bounded FIFO queues decoupling pipeline stages.

Two overflow policies: `block` (producer waits, nothing lost) and
`drop_oldest` (oldest element evicted so a live feed never stalls).
Closing a queue rejects further offers; takes drain what remains and then
return END_OF_STREAM.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from enum import Enum
from typing import Any


class _Sentinel:
    def __init__(self, name: str):
        self._name = name

    def __repr__(self):
        return self._name


END_OF_STREAM = _Sentinel("END_OF_STREAM")
TIMED_OUT = _Sentinel("TIMED_OUT")


class OfferPolicy(Enum):
    BLOCK = "block"
    DROP_OLDEST = "drop_oldest"


class BoundedQueue:
    """Fixed-capacity FIFO safe for concurrent producers and consumers."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: deque = deque()
        self._lock = threading.Lock()
        self._not_empty = threading.Condition(self._lock)
        self._not_full = threading.Condition(self._lock)
        self._closed = False
        self._drops = 0

    @property
    def drops(self) -> int:
        with self._lock:
            return self._drops

    @property
    def closed(self) -> bool:
        with self._lock:
            return self._closed

    def depth(self) -> int:
        with self._lock:
            return len(self._items)

    def offer(self, item: Any, policy: OfferPolicy = OfferPolicy.BLOCK) -> bool:
        """Enqueue `item`; returns False iff the queue is closed.

        With DROP_OLDEST the head is evicted when full and the offer always
        succeeds on an open queue.
        """
        with self._lock:
            if policy is OfferPolicy.DROP_OLDEST:
                if self._closed:
                    return False
                if len(self._items) >= self.capacity:
                    self._items.popleft()
                    self._drops += 1
                self._items.append(item)
                self._not_empty.notify()
                return True
            while True:
                if self._closed:
                    return False
                if len(self._items) < self.capacity:
                    self._items.append(item)
                    self._not_empty.notify()
                    return True
                self._not_full.wait()

    def take(self, timeout: float | None = None) -> Any:
        """Dequeue in FIFO order.

        Blocks while the queue is empty and open. Returns END_OF_STREAM
        once closed and drained, or TIMED_OUT if `timeout` seconds elapse
        first.
        """
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._lock:
            while True:
                if self._items:
                    item = self._items.popleft()
                    self._not_full.notify()
                    return item
                if self._closed:
                    return END_OF_STREAM
                if deadline is None:
                    self._not_empty.wait()
                else:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        return TIMED_OUT
                    self._not_empty.wait(remaining)

    def close(self) -> None:
        """Stop accepting items; pending items remain takeable."""
        with self._lock:
            self._closed = True
            self._not_empty.notify_all()
            self._not_full.notify_all()
