"""Cross-context consistency scoring.

Given rankings of a hyper-parameter's values in several contexts (agents,
environments, or data regimes), the THC score measures how much each value's
rank moves around: per value, take the peak-to-peak spread of its ranks
across contexts, normalize by the largest spread a value could show
(``m - 1`` for ``m`` values), and average over values. 0 means every value
kept its rank everywhere; 1 means every value swung between best and worst.

Kendall's W and pairwise Kendall's tau-b are provided as classical
comparison baselines.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import kendalltau

from .dataset import Axis, ContextKey, EmptySliceError, SweepDataset, slice_scores
from .ranking import RankingMode, RankingTable, compute_rankings
from .stats import (
    DEFAULT_CONFIDENCE,
    DEFAULT_RESAMPLES,
    Interval,
    ScoreMatrix,
    derive_seed,
    human_normalize,
    iqm,
    mean_and_spread,
    stratified_bootstrap_ci,
)

__all__ = [
    "AssembledProfiles",
    "AssemblyOptions",
    "ConsistencyReport",
    "HyperparameterConsistency",
    "IntervalSource",
    "KendallSummary",
    "PtpNormalization",
    "RankProfile",
    "SkippedHyperparameter",
    "TransferSetup",
    "assemble_profiles",
    "build_consistency_report",
    "kendall_tau_matrix",
    "kendall_w",
    "mean_pairwise_tau",
    "normalized_ptp",
    "ptp",
    "rank_context",
    "thc",
]

logger = logging.getLogger(__name__)


class TransferSetup(str, enum.Enum):
    """Which coordinate plays the role of the context being varied."""

    ACROSS_AGENTS = "agents"
    ACROSS_ENVIRONMENTS = "environments"
    ACROSS_DATA_REGIMES = "data_regimes"

    @property
    def axis(self) -> Axis:
        return {
            TransferSetup.ACROSS_AGENTS: Axis.AGENT,
            TransferSetup.ACROSS_ENVIRONMENTS: Axis.ENVIRONMENT,
            TransferSetup.ACROSS_DATA_REGIMES: Axis.DATA_REGIME,
        }[self]


class PtpNormalization(str, enum.Enum):
    """How per-value peak-to-peak rank spreads are normalized.

    ``MAX`` divides each spread by its largest attainable value, ``m - 1``.
    ``SUM`` divides by the total spread over all values; it is kept for
    auditability only, since it collapses the averaged score to ``1/m``
    whenever any inconsistency exists at all.
    """

    MAX = "max"
    SUM = "sum"


class IntervalSource(str, enum.Enum):
    """How per-value seed scores become an interval for ranking."""

    IQM_CI = "iqm_ci"
    MEAN_SD = "mean_sd"


@dataclass(frozen=True)
class RankProfile:
    """Final ranks of one hyper-parameter's values across several contexts.

    ``ranks[i, j]`` is the rank of ``values[i]`` in ``contexts[j]``. All
    entries must be present; values that could not be ranked in every
    context are excluded before a profile is built.
    """

    hyperparameter: str
    values: tuple[str, ...]
    contexts: tuple[str, ...]
    ranks: np.ndarray
    fixed: Mapping[str, str] = field(default_factory=dict)
    tables: tuple[RankingTable, ...] = ()
    points: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ranks = np.asarray(self.ranks, dtype=float)
        object.__setattr__(self, "ranks", ranks)
        if len(set(self.values)) != len(self.values):
            raise ValueError("profile values must be unique")
        if len(set(self.contexts)) != len(self.contexts):
            raise ValueError("profile contexts must be unique")
        if ranks.shape != (len(self.values), len(self.contexts)):
            raise ValueError(
                f"rank matrix shape {ranks.shape} does not match "
                f"{len(self.values)} values x {len(self.contexts)} contexts"
            )
        if ranks.size == 0:
            raise ValueError("profile must contain at least one value and one context")
        if not np.all(np.isfinite(ranks)):
            raise ValueError("profile ranks must all be present and finite")


def ptp(ranks: Sequence[float]) -> float:
    """Peak-to-peak spread (max minus min) of one value's ranks."""
    arr = np.asarray(ranks, dtype=float)
    if arr.size == 0:
        raise ValueError("ptp of an empty rank list is undefined")
    return float(arr.max() - arr.min())


def normalized_ptp(
    ptp_values: Sequence[float],
    m: int | None = None,
    mode: PtpNormalization = PtpNormalization.MAX,
) -> list[float]:
    """Normalize per-value rank spreads into [0, 1].

    ``m`` is the number of values the spreads were computed over; it
    defaults to ``len(ptp_values)``.
    """
    spreads = [float(p) for p in ptp_values]
    if any(p < 0 for p in spreads):
        raise ValueError("ptp values must be non-negative")
    if m is None:
        m = len(spreads)
    if m < 1:
        raise ValueError("value count m must be >= 1")
    mode = PtpNormalization(mode)
    if mode is PtpNormalization.MAX:
        if m == 1:
            return [0.0 for _ in spreads]
        return [p / (m - 1) for p in spreads]
    total = sum(spreads)
    if total == 0:
        return [0.0 for _ in spreads]
    return [p / total for p in spreads]


def thc(profile: RankProfile, mode: PtpNormalization = PtpNormalization.MAX) -> float:
    """THC score of a profile: mean normalized rank spread over its values.

    A single-context profile scores 0 (there is nothing to be inconsistent
    about), as does one whose values keep identical ranks everywhere.
    """
    spreads = [ptp(row) for row in profile.ranks]
    normalized = normalized_ptp(spreads, m=len(profile.values), mode=mode)
    return float(sum(normalized) / len(normalized))


def kendall_w(profile: RankProfile) -> float | None:
    """Tie-corrected coefficient of concordance across the profile's
    contexts; 1 means identical rankings. Returns ``None`` when every
    ranking is fully tied (the statistic is undefined)."""
    v, c = profile.ranks.shape
    if c < 2:
        raise ValueError("kendall_w needs at least 2 contexts")
    if v < 2:
        raise ValueError("kendall_w needs at least 2 values")
    totals = profile.ranks.sum(axis=1)
    s = float(((totals - totals.mean()) ** 2).sum())
    tie_term = 0.0
    for j in range(c):
        _, counts = np.unique(profile.ranks[:, j], return_counts=True)
        tie_term += float((counts**3 - counts).sum())
    denom = c * c * (v**3 - v) - c * tie_term
    if denom <= 0:
        return None
    return 12.0 * s / denom


def kendall_tau_matrix(profile: RankProfile) -> np.ndarray:
    """Pairwise tau-b between every pair of context rankings.

    Entries are ``nan`` where the statistic is undefined (a fully tied
    ranking involved); the diagonal is 1 whenever a ranking has at least one
    non-tied pair.
    """
    _, c = profile.ranks.shape
    if c < 2:
        raise ValueError("kendall_tau_matrix needs at least 2 contexts")
    out = np.full((c, c), np.nan)
    for i in range(c):
        for j in range(i, c):
            stat = kendalltau(profile.ranks[:, i], profile.ranks[:, j]).statistic
            out[i, j] = out[j, i] = float(stat)
    return out


def mean_pairwise_tau(profile: RankProfile) -> float | None:
    """Mean of the defined off-diagonal tau-b entries; ``None`` if none are
    defined."""
    matrix = kendall_tau_matrix(profile)
    c = matrix.shape[0]
    offdiag = [matrix[i, j] for i in range(c) for j in range(i + 1, c)
               if math.isfinite(matrix[i, j])]
    if not offdiag:
        return None
    return float(np.mean(offdiag))


# -- profile assembly from a dataset -----------------------------------------


@dataclass(frozen=True)
class AssemblyOptions:
    """Knobs for turning a dataset into rank profiles."""

    interval_source: IntervalSource = IntervalSource.IQM_CI
    ranking_mode: RankingMode = RankingMode.SPAN
    resamples: int = DEFAULT_RESAMPLES
    confidence: float = DEFAULT_CONFIDENCE
    seed: int = 0
    workers: int = 1
    agent: str | None = None
    environment: str | None = None
    data_regime: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "interval_source", IntervalSource(self.interval_source))
        object.__setattr__(self, "ranking_mode", RankingMode(self.ranking_mode))


@dataclass(frozen=True)
class SkippedHyperparameter:
    hyperparameter: str
    fixed: Mapping[str, str]
    reason: str


@dataclass(frozen=True)
class AssembledProfiles:
    profiles: tuple[RankProfile, ...]
    skipped: tuple[SkippedHyperparameter, ...]


@dataclass(frozen=True)
class KendallSummary:
    """Classical concordance baselines for one profile. ``None`` fields mean
    the statistic is undefined for this profile's ranks."""

    w: float | None
    mean_tau: float | None


@dataclass(frozen=True)
class HyperparameterConsistency:
    hyperparameter: str
    fixed: Mapping[str, str]
    contexts: tuple[str, ...]
    values: tuple[str, ...]
    thc: float
    normalized_ptp: Mapping[str, float]
    kendall: KendallSummary | None = None


@dataclass(frozen=True)
class ConsistencyReport:
    setup: TransferSetup
    entries: tuple[HyperparameterConsistency, ...]
    skipped: tuple[SkippedHyperparameter, ...]


def _present(dataset: SweepDataset, hyperparameter: str, axis: Axis) -> list[str]:
    seen = {rec.axis_value(axis) for rec in dataset.records_for(hyperparameter)}
    return [v for v in dataset.schema.axis_values(axis) if v in seen]


def _aggregate_cell(
    dataset: SweepDataset,
    groups: dict[tuple[str, str], list[float]],
    value: str,
    environments: Sequence[str],
    options: AssemblyOptions,
    seed_key: tuple,
) -> tuple[Interval, float, list[str]] | tuple[None, None, list[str]]:
    """Build the interval and point estimate for one (context, value) cell
    from its per-environment score groups.

    Returns ``(None, None, dropped)`` when no group has enough seeds.
    """
    rows: list[list[float]] = []
    labels: list[str] = []
    dropped: list[str] = []
    for env in environments:
        scores = groups.get((env, value), [])
        if not scores:
            continue
        if len(scores) < 2:
            dropped.append(env)
            continue
        rnd = dataset.baselines.random_score(env)
        hum = dataset.baselines.human_score(env)
        rows.append([human_normalize(s, rnd, hum) for s in scores])
        labels.append(env)
    if not rows:
        return None, None, dropped

    pooled = [s for row in rows for s in row]
    if options.interval_source is IntervalSource.MEAN_SD:
        return mean_and_spread(pooled), float(np.mean(pooled)), dropped
    interval = stratified_bootstrap_ci(
        ScoreMatrix(rows, labels=labels),
        statistic="iqm",
        resamples=options.resamples,
        confidence=options.confidence,
        seed=derive_seed(options.seed, *seed_key),
        workers=options.workers,
    )
    return interval, iqm(pooled), dropped


def assemble_profiles(
    dataset: SweepDataset,
    setup: TransferSetup,
    options: AssemblyOptions = AssemblyOptions(),
) -> AssembledProfiles:
    """Build one rank profile per (hyper-parameter, complementary-coordinate
    combination) for a transfer setup.

    Per context, per-value seed scores are normalized and aggregated into an
    interval (per ``options.interval_source``), ranked, and collected into a
    profile. Environments act as resampling strata and are pooled unless the
    setup varies them or ``options.environment`` pins one. Hyper-parameters
    that cannot be compared across the setup (fewer than two contexts with
    data, or no value rankable in every context) are skipped with a reason.
    """
    setup = TransferSetup(setup)
    axis = setup.axis
    if getattr(options, axis.value) is not None:
        raise ValueError(f"cannot fix {axis.value!r}; it is the varying axis of setup {setup.value!r}")

    schema = dataset.schema
    profiles: list[RankProfile] = []
    skipped: list[SkippedHyperparameter] = []

    for hp in schema.hyperparameters:
        if not dataset.records_for(hp):
            continue
        for combo in _combos(dataset, hp, setup, options):
            result = _profile_for(dataset, hp, setup, combo, options)
            if isinstance(result, SkippedHyperparameter):
                logger.warning("skipping %s %s: %s", hp, dict(combo), result.reason)
                skipped.append(result)
            else:
                profiles.append(result)

    return AssembledProfiles(tuple(profiles), tuple(skipped))


def _combos(
    dataset: SweepDataset,
    hp: str,
    setup: TransferSetup,
    options: AssemblyOptions,
) -> list[dict[str, str]]:
    """Concrete coordinates for the axes the setup does not vary.

    The environment axis is aggregated (absent from the combo) unless pinned
    via options or varied by the setup.
    """
    def choices(axis: Axis) -> list[str]:
        pinned = getattr(options, axis.value)
        if pinned is not None:
            return [pinned]
        return _present(dataset, hp, axis)

    if setup is TransferSetup.ACROSS_AGENTS:
        free_axes = [Axis.DATA_REGIME]
    elif setup is TransferSetup.ACROSS_DATA_REGIMES:
        free_axes = [Axis.AGENT]
    else:
        free_axes = [Axis.AGENT, Axis.DATA_REGIME]
    if options.environment is not None and setup is not TransferSetup.ACROSS_ENVIRONMENTS:
        free_axes.append(Axis.ENVIRONMENT)

    combos: list[dict[str, str]] = []
    for picks in itertools.product(*(choices(a) for a in free_axes)):
        combos.append({a.value: v for a, v in zip(free_axes, picks)})
    return combos


def _profile_for(
    dataset: SweepDataset,
    hp: str,
    setup: TransferSetup,
    combo: dict[str, str],
    options: AssemblyOptions,
) -> RankProfile | SkippedHyperparameter:
    axis = setup.axis
    schema = dataset.schema
    env_pinned = combo.get("environment")
    env_scope = [env_pinned] if env_pinned else list(schema.environments)

    # Per context label, the per-environment score groups for this combo.
    context_groups: dict[str, dict[tuple[str, str], list[float]]] = {}
    if setup is TransferSetup.ACROSS_ENVIRONMENTS:
        key = ContextKey(varying=Axis.ENVIRONMENT,
                         agent=combo["agent"], data_regime=combo["data_regime"])
        try:
            groups = slice_scores(dataset, key, hp)
        except EmptySliceError:
            groups = {}
        for env in schema.environments:
            per_env = {(env, value): scores for (label, value), scores in groups.items()
                       if label == env and scores}
            if per_env:
                context_groups[env] = per_env
    else:
        for label in _present(dataset, hp, axis):
            coords = dict(combo)
            coords.pop("environment", None)
            coords[axis.value] = label
            key = ContextKey(varying=Axis.ENVIRONMENT, **coords)
            try:
                groups = slice_scores(dataset, key, hp)
            except EmptySliceError:
                continue
            if env_pinned:
                groups = {k: v for k, v in groups.items() if k[0] == env_pinned}
            context_groups[label] = groups

    contexts = [c for c in schema.axis_values(axis) if c in context_groups]
    if len(contexts) < 2:
        return SkippedHyperparameter(hp, dict(combo), f"only {len(contexts)} context(s) with data")

    declared_values = schema.hyperparameters[hp]
    per_context: dict[str, dict[str, tuple[Interval, float]]] = {}
    for label in contexts:
        groups = context_groups[label]
        envs_here = [env_pinned] if env_pinned else (
            [label] if setup is TransferSetup.ACROSS_ENVIRONMENTS else env_scope
        )
        cells: dict[str, tuple[Interval, float]] = {}
        thin: list[str] = []
        for value in declared_values:
            interval, point, dropped = _aggregate_cell(
                dataset, groups, value, envs_here, options,
                seed_key=(setup.value, hp, value, label, tuple(sorted(combo.items()))),
            )
            thin.extend(f"{value}@{env}" for env in dropped)
            if interval is not None:
                cells[value] = (interval, point)
        if thin:
            logger.warning(
                "%s, context %s %s: dropping groups with fewer than 2 seeds: %s",
                hp, label, dict(combo), ", ".join(thin),
            )
        if cells:
            per_context[label] = cells

    contexts = [c for c in contexts if c in per_context]
    if len(contexts) < 2:
        return SkippedHyperparameter(hp, dict(combo), f"only {len(contexts)} context(s) with rankable values")

    common = [v for v in declared_values if all(v in per_context[c] for c in contexts)]
    partial = sorted({v for c in contexts for v in per_context[c]} - set(common))
    if partial:
        logger.warning("%s %s: excluding values not rankable in every context: %s",
                       hp, dict(combo), ", ".join(partial))
    if not common:
        return SkippedHyperparameter(hp, dict(combo), "no value is rankable in every context")

    tables = []
    points: dict[tuple[str, str], float] = {}
    for label in contexts:
        settings = [(value, per_context[label][value][0]) for value in common]
        table = compute_rankings(settings, mode=options.ranking_mode,
                                 hyperparameter=hp, context={**combo, axis.value: label})
        tables.append(table)
        for value in common:
            points[(label, value)] = per_context[label][value][1]

    ranks = np.array([[table.final_ranks()[value] for table in tables] for value in common])
    return RankProfile(
        hyperparameter=hp,
        values=tuple(common),
        contexts=tuple(contexts),
        ranks=ranks,
        fixed=dict(combo),
        tables=tuple(tables),
        points=points,
    )


def rank_context(
    dataset: SweepDataset,
    hyperparameter: str,
    agent: str,
    data_regime: str,
    environment: str | None = None,
    options: AssemblyOptions = AssemblyOptions(),
) -> tuple[RankingTable, dict[str, float]]:
    """Rank one hyper-parameter's values in a single context.

    Environments are pooled as strata unless ``environment`` pins one.
    Returns the ranking table and per-value point estimates. Raises
    :class:`EmptySliceError` when the selector matches nothing and
    ``ValueError`` when no value has enough seeds to rank.
    """
    key = ContextKey(varying=Axis.ENVIRONMENT, agent=agent, data_regime=data_regime)
    groups = slice_scores(dataset, key, hyperparameter)
    environments = [environment] if environment else list(dataset.schema.environments)

    settings = []
    points: dict[str, float] = {}
    thin: list[str] = []
    for value in dataset.schema.hyperparameters[hyperparameter]:
        interval, point, dropped = _aggregate_cell(
            dataset, groups, value, environments, options,
            seed_key=("rank", hyperparameter, value, agent, data_regime, environment or "*"),
        )
        thin.extend(f"{value}@{env}" for env in dropped)
        if interval is not None:
            settings.append((value, interval))
            points[value] = point
    if thin:
        logger.warning("%s, agent %s, regime %s: dropping groups with fewer than 2 seeds: %s",
                       hyperparameter, agent, data_regime, ", ".join(thin))
    if not settings:
        raise ValueError(f"no value of {hyperparameter!r} has at least 2 seeds in this context")

    context = {"agent": agent, "data_regime": data_regime}
    if environment:
        context["environment"] = environment
    table = compute_rankings(settings, mode=options.ranking_mode,
                             hyperparameter=hyperparameter, context=context)
    return table, points


def build_consistency_report(
    dataset: SweepDataset,
    setup: TransferSetup,
    options: AssemblyOptions = AssemblyOptions(),
    normalization: PtpNormalization = PtpNormalization.MAX,
    include_kendall: bool = False,
) -> tuple[ConsistencyReport, tuple[RankProfile, ...]]:
    """Score every assembled profile for one transfer setup.

    Returns the report plus the underlying profiles (for table/plot export).
    """
    assembled = assemble_profiles(dataset, setup, options)
    entries = []
    for profile in assembled.profiles:
        spreads = [ptp(row) for row in profile.ranks]
        normalized = normalized_ptp(spreads, m=len(profile.values), mode=normalization)
        kendall = None
        if include_kendall:
            defined = len(profile.values) >= 2
            kendall = KendallSummary(
                w=kendall_w(profile) if defined else None,
                mean_tau=mean_pairwise_tau(profile) if defined else None,
            )
        entries.append(HyperparameterConsistency(
            hyperparameter=profile.hyperparameter,
            fixed=dict(profile.fixed),
            contexts=profile.contexts,
            values=profile.values,
            thc=float(sum(normalized) / len(normalized)),
            normalized_ptp=dict(zip(profile.values, normalized)),
            kendall=kendall,
        ))
    report = ConsistencyReport(TransferSetup(setup), tuple(entries), assembled.skipped)
    return report, assembled.profiles
