"""Route model: trip histories over road segments and route probabilities.

A route is a tuple of segment ids. Two trips are the same route only when
their segment sequences are identical. All operations are pure; a
``TripHistory`` is never mutated after construction.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import NoHistoryError

SegmentId = str
Route = tuple  # tuple[SegmentId, ...]


def make_route(segments: Iterable[SegmentId]) -> Route:
    """Validate a segment sequence and return it as a route tuple."""
    route = tuple(segments)
    if not route:
        raise ValueError("route must contain at least one segment")
    for seg in route:
        if not isinstance(seg, str) or not seg:
            raise ValueError(f"invalid segment id {seg!r}")
    for a, b in zip(route, route[1:]):
        if a == b:
            raise ValueError(f"segment {a!r} repeats immediately in route")
    return route


@dataclass(frozen=True)
class TripHistory:
    """Multiset of past routes. ``counts`` maps route -> times taken."""

    counts: Mapping[Route, int] = field(default_factory=dict)

    def __post_init__(self):
        for route, n in self.counts.items():
            make_route(route)
            if n < 1:
                raise ValueError(f"count for {route} must be >= 1, got {n}")

    @classmethod
    def from_trips(cls, trips: Iterable[Iterable[SegmentId]]) -> "TripHistory":
        return cls(dict(Counter(make_route(t) for t in trips)))

    @property
    def total_trips(self) -> int:
        return sum(self.counts.values())

    def segments(self) -> set:
        return {s for route in self.counts for s in route}

    def count(self, route: Iterable[SegmentId]) -> int:
        return self.counts.get(tuple(route), 0)


@dataclass(frozen=True)
class RouteDistribution:
    entries: Mapping[Route, float]
    conditioning_segment: SegmentId


def record_trip(history: TripHistory, trip: Iterable[SegmentId]) -> TripHistory:
    route = make_route(trip)
    counts = dict(history.counts)
    counts[route] = counts.get(route, 0) + 1
    return TripHistory(counts)


def _matching(history: TripHistory, current: SegmentId) -> dict:
    matching = {r: n for r, n in history.counts.items() if current in r}
    if not matching:
        raise NoHistoryError(f"no recorded route contains segment {current!r}")
    return matching


def route_distribution(history: TripHistory, current: SegmentId) -> RouteDistribution:
    """Probability of each recorded route through ``current``.

    p(route) = count(route) / sum of counts over routes containing ``current``.
    """
    matching = _matching(history, current)
    total = sum(matching.values())
    return RouteDistribution({r: n / total for r, n in matching.items()}, current)


def predict_route(history: TripHistory, current: SegmentId) -> Route:
    """Most probable route through ``current``; ties go to the lexicographically
    smallest segment sequence."""
    matching = _matching(history, current)
    # compare integer counts so ties are exact
    return min(matching, key=lambda r: (-matching[r], r))


def segment_probability(
    history: TripHistory, current: SegmentId, target: SegmentId
) -> float:
    dist = route_distribution(history, current)
    return sum(p for r, p in dist.entries.items() if target in r)


def segment_probabilities(history: TripHistory, current: SegmentId) -> dict:
    """Traversal probability of every segment seen on routes through ``current``."""
    dist = route_distribution(history, current)
    probs: dict = {}
    for route, p in dist.entries.items():
        for seg in set(route):
            probs[seg] = probs.get(seg, 0.0) + p
    return probs


def parse_history(lines: Iterable[str]) -> TripHistory:
    """Parse trip-history text: one trip per line, comma-separated segment
    ids, ``#`` starts a comment."""
    trips = []
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        segs = [s.strip() for s in text.split(",")]
        try:
            trips.append(make_route(segs))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return TripHistory.from_trips(trips)


def load_history(path) -> TripHistory:
    with open(Path(path), encoding="utf-8") as fh:
        return parse_history(fh)
