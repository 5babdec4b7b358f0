"""In-process pub/sub: topic grammar, wildcard matching, bounded queues."""

import pytest
from hypothesis import given, strategies as st

from aquamon.bus import (
    QUEUE_CAPACITY,
    MessageBus,
    topic_matches,
    validate_pattern,
    validate_topic,
)
from aquamon.errors import TopicError

segment = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_",
    min_size=1,
    max_size=8,
)


class TestTopicGrammar:
    @pytest.mark.parametrize(
        "topic", ["a", "asv/asv1/pose", "A_1/b2", "x" * 256]
    )
    def test_valid_topics(self, topic):
        validate_topic(topic)

    @pytest.mark.parametrize(
        "topic",
        ["", "/a", "a/", "a//b", "a b", "a/#", "#", "a.b", "x" * 257, "ü/a"],
    )
    def test_invalid_topics(self, topic):
        with pytest.raises(TopicError):
            validate_topic(topic)

    @pytest.mark.parametrize("pattern", ["a", "a/b", "#", "a/#", "a/b/#"])
    def test_valid_patterns(self, pattern):
        validate_pattern(pattern)

    @pytest.mark.parametrize("pattern", ["", "#/a", "a/#/b", "a#", "/#"])
    def test_invalid_patterns(self, pattern):
        with pytest.raises(TopicError):
            validate_pattern(pattern)

    @given(st.lists(segment, min_size=1, max_size=4))
    def test_generated_topics_validate(self, parts):
        topic = "/".join(parts)
        if len(topic.encode()) <= 256:
            validate_topic(topic)


class TestMatching:
    def test_exact(self):
        assert topic_matches("a/b", "a/b")
        assert not topic_matches("a/b", "a/c")

    def test_hash_matches_everything(self):
        for t in ("a", "a/b", "deep/er/still"):
            assert topic_matches("#", t)

    def test_prefix_wildcard(self):
        assert topic_matches("a/#", "a/b")
        assert topic_matches("a/#", "a/b/c")
        assert not topic_matches("a/#", "a")
        assert not topic_matches("a/#", "ab")
        assert not topic_matches("a/#", "b/a")

    @given(st.lists(segment, min_size=1, max_size=3), st.lists(segment, min_size=0, max_size=2))
    def test_wildcard_extends_prefix(self, base, extra):
        prefix = "/".join(base)
        topic = "/".join(base + extra)
        if len(topic.encode()) <= 256 and extra:
            assert topic_matches(prefix + "/#", topic)


class TestBus:
    def test_sequence_numbers_per_topic(self):
        bus = MessageBus()
        sub = bus.subscribe("#")
        e0 = bus.publish("a/b", {"x": 1})
        e1 = bus.publish("a/b", {"x": 2})
        e2 = bus.publish("c", {})
        assert (e0.seq, e1.seq, e2.seq) == (0, 1, 0)
        assert bus.last_seq("a/b") == 1
        assert [e.seq for e in sub.drain()] == [0, 1, 0]

    def test_time_stamping(self):
        bus = MessageBus()
        bus.set_time(42.5)
        env = bus.publish("a", {})
        assert env.time == 42.5

    def test_delivery_isolated_per_subscription(self):
        bus = MessageBus()
        s1 = bus.subscribe("a")
        s2 = bus.subscribe("a")
        bus.publish("a", 1)
        assert [e.payload for e in s1.drain()] == [1]
        assert [e.payload for e in s2.drain()] == [1]
        assert list(s1.drain()) == []

    def test_no_match_no_delivery(self):
        bus = MessageBus()
        sub = bus.subscribe("a/b")
        bus.publish("a", 1)
        bus.publish("a/b/c", 2)
        assert sub.drain() == []

    def test_drop_oldest_when_full(self):
        bus = MessageBus()
        sub = bus.subscribe("t")
        for i in range(QUEUE_CAPACITY + 10):
            bus.publish("t", i)
        got = [e.payload for e in sub.drain()]
        assert len(got) == QUEUE_CAPACITY
        assert got[0] == 10  # oldest ten fell off the front
        assert got[-1] == QUEUE_CAPACITY + 9
        assert sub.dropped == 10

    def test_unsubscribe(self):
        bus = MessageBus()
        sub = bus.subscribe("t")
        bus.publish("t", 1)
        bus.unsubscribe(sub)
        bus.publish("t", 2)
        assert [e.payload for e in sub.drain()] == [1]

    def test_publish_invalid_topic_raises(self):
        bus = MessageBus()
        with pytest.raises(TopicError):
            bus.publish("bad topic!", {})

    def test_poll_single(self):
        bus = MessageBus()
        sub = bus.subscribe("t")
        bus.publish("t", "x")
        env = sub.poll()
        assert env.payload == "x"
        assert sub.poll() is None
