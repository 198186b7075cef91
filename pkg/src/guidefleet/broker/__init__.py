"""In-process topic pub/sub with wildcard subscriptions and latency injection."""

from guidefleet.broker.broker import Broker, BrokerClosed, Receipt, Subscription
from guidefleet.broker.links import DelaySampler, Link, LinkProfile, sample_delay
from guidefleet.broker.matching import MalformedPattern, match_topic, validate_pattern

__all__ = [
    "Broker",
    "BrokerClosed",
    "Receipt",
    "Subscription",
    "DelaySampler",
    "Link",
    "LinkProfile",
    "sample_delay",
    "MalformedPattern",
    "match_topic",
    "validate_pattern",
]
