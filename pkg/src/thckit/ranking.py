"""Fractional ranking of labeled intervals.

Point estimates alone over-state how sure a sweep is about which setting won;
two settings whose intervals overlap cannot honestly be given distinct ranks.
The ranking here works on the intervals themselves:

1. Sort settings by decreasing upper bound (ties: decreasing lower bound,
   then label), giving 1-based positions ``p = 1..m``. A setting's position
   is its initial rank.
2. For setting ``j``, find ``l_j``, the lowest position whose lower bound is
   <= ``j``'s upper bound, and ``u_j``, the highest position whose upper
   bound is >= ``j``'s lower bound.
3. Its final rank is ``(l_j + u_j) / 2`` -- the average position over the
   span of settings it cannot be separated from. Rank 1 is best.

Final ranks are half-integer multiples in ``[1, m]``. Disjoint intervals
reduce to the strict ordering 1..m; mutually overlapping intervals all share
the mean rank ``(1 + m) / 2``.

A second mode averages the initial ranks of the settings whose intervals
actually overlap ``j``'s. Both agree whenever each setting's overlapping
neighbours occupy a contiguous block of positions; where they diverge (a wide
interval straddling a narrow non-overlapping one) the divergence is logged.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .stats import Interval

__all__ = [
    "RankedSetting",
    "RankingMode",
    "RankingTable",
    "compute_rankings",
]

logger = logging.getLogger(__name__)


class RankingMode(str, enum.Enum):
    """How overlapping intervals share rank mass."""

    #: Average of the extreme positions whose intervals touch the setting's.
    SPAN = "span"
    #: Mean initial rank over the set of settings whose intervals overlap.
    OVERLAP = "overlap"


@dataclass(frozen=True)
class RankedSetting:
    label: str
    interval: Interval
    initial_rank: int
    final_rank: float

    def __post_init__(self) -> None:
        if self.initial_rank < 1:
            raise ValueError("initial_rank is 1-based")
        if self.final_rank < 1:
            raise ValueError("final_rank must be >= 1")


@dataclass(frozen=True)
class RankingTable:
    """Fractional ranks of one hyper-parameter's settings in one context."""

    entries: tuple[RankedSetting, ...]
    hyperparameter: str | None = None
    context: Mapping[str, str] | None = field(default=None)

    def __post_init__(self) -> None:
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError("ranking table labels must be unique")

    def final_ranks(self) -> dict[str, float]:
        return {e.label: e.final_rank for e in self.entries}

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def compute_rankings(
    settings: Sequence[tuple[str, Interval]],
    mode: RankingMode = RankingMode.SPAN,
    hyperparameter: str | None = None,
    context: Mapping[str, str] | None = None,
) -> RankingTable:
    """Rank labeled intervals, sharing rank between settings that overlap.

    ``settings`` is a sequence of ``(label, interval)`` pairs with unique
    labels; input order never affects the result. Returns entries in rank
    order (best first).
    """
    if not settings:
        raise ValueError("compute_rankings needs at least one setting")
    labels = [label for label, _ in settings]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate setting labels: {sorted(labels)}")
    mode = RankingMode(mode)

    ordered = sorted(settings, key=lambda s: (-s[1].upper, -s[1].lower, s[0]))
    m = len(ordered)
    uppers = [iv.upper for _, iv in ordered]
    lowers = [iv.lower for _, iv in ordered]

    # The sort is by upper bound only, so the lower bounds need not be
    # monotone; a binary search over them would be unsound. m stays small
    # (tens of settings), so linear scans cost nothing.
    entries = []
    for pos0, (label, interval) in enumerate(ordered):
        l = next(p for p in range(m) if lowers[p] <= interval.upper) + 1
        u = next(p for p in reversed(range(m)) if uppers[p] >= interval.lower) + 1
        if mode is RankingMode.SPAN:
            final = (l + u) / 2.0
        else:
            members = [p + 1 for p in range(m) if interval.overlaps(ordered[p][1])]
            if members != list(range(members[0], members[-1] + 1)):
                logger.info(
                    "setting %r overlaps a non-contiguous position set %s; "
                    "overlap-mode rank %.3f differs from span rank %.3f",
                    label, members, sum(members) / len(members), (l + u) / 2.0,
                )
            final = sum(members) / len(members)
        entries.append(RankedSetting(label, interval, pos0 + 1, final))

    return RankingTable(tuple(entries), hyperparameter=hyperparameter, context=context)
