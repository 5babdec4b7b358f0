"""In-process publish/subscribe bus for wiring mission nodes together.

Fire-and-forget semantics: a publish fans out to every matching
subscription queue and returns.  Queues are bounded; when one is full
the oldest message is dropped and counted, so a slow consumer lags
rather than stalling the publisher.  Single-threaded by design, the
simulator drives every node from one loop.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any

from .errors import TopicError

QUEUE_CAPACITY = 128

_SEGMENT = r"[A-Za-z0-9_]+"
_TOPIC_RE = re.compile(rf"^{_SEGMENT}(/{_SEGMENT})*$")
_PATTERN_RE = re.compile(rf"^({_SEGMENT}/)*(({_SEGMENT})|#)$")
MAX_TOPIC_BYTES = 256


def validate_topic(topic: str) -> None:
    """Reject anything but slash-separated word segments, at most 256 bytes."""
    if not isinstance(topic, str) or not _TOPIC_RE.match(topic):
        raise TopicError(f"bad topic: {topic!r}")
    if len(topic.encode("ascii")) > MAX_TOPIC_BYTES:
        raise TopicError("topic exceeds 256 bytes")


def validate_pattern(pattern: str) -> None:
    """A pattern is a topic whose last segment may be the wildcard '#'."""
    if not isinstance(pattern, str) or not _PATTERN_RE.match(pattern):
        raise TopicError(f"bad pattern: {pattern!r}")
    if len(pattern.encode("ascii")) > MAX_TOPIC_BYTES:
        raise TopicError("pattern exceeds 256 bytes")


def topic_matches(pattern: str, topic: str) -> bool:
    """Exact match, or prefix match when the pattern ends in '/#'.

    A bare '#' matches every topic.  The wildcard only appears as the
    final segment; 'a/#' matches 'a/b' and 'a/b/c' but not 'a' itself.
    """
    if pattern == "#":
        return True
    if pattern.endswith("/#"):
        return topic.startswith(pattern[:-1])
    return pattern == topic


@dataclass
class Envelope:
    topic: str
    payload: Any
    seq: int
    time: float


@dataclass
class Subscription:
    pattern: str
    _queue: deque = field(default_factory=lambda: deque(maxlen=QUEUE_CAPACITY))
    dropped: int = 0
    _closed: bool = False

    def _offer(self, env: Envelope) -> None:
        if self._closed:
            return
        if len(self._queue) == self._queue.maxlen:
            self._queue.popleft()
            self.dropped += 1
        self._queue.append(env)

    def __len__(self) -> int:
        return len(self._queue)

    def poll(self) -> Envelope | None:
        """Pop the oldest pending message, or None when idle."""
        if not self._queue:
            return None
        return self._queue.popleft()

    def drain(self) -> list[Envelope]:
        """Consume and return every pending message, oldest first."""
        out = list(self._queue)
        self._queue.clear()
        return out


class MessageBus:
    """Topic registry plus fan-out delivery with per-topic sequence numbers."""

    def __init__(self):
        self._subs: list[Subscription] = []
        self._seq: dict[str, int] = {}
        self._now = 0.0

    def set_time(self, t: float) -> None:
        """Stamp subsequent publishes with simulated time t."""
        self._now = float(t)

    def subscribe(self, pattern: str) -> Subscription:
        validate_pattern(pattern)
        sub = Subscription(pattern=pattern)
        self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub._closed = True
        try:
            self._subs.remove(sub)
        except ValueError:
            pass

    def publish(self, topic: str, payload: Any) -> Envelope:
        validate_topic(topic)
        seq = self._seq.get(topic, -1) + 1
        self._seq[topic] = seq
        env = Envelope(topic=topic, payload=payload, seq=seq, time=self._now)
        for sub in self._subs:
            if topic_matches(sub.pattern, topic):
                sub._offer(env)
        return env

    def last_seq(self, topic: str) -> int:
        """Sequence number of the most recent publish, -1 if never published."""
        return self._seq.get(topic, -1)
