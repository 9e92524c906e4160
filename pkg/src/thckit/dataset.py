"""Experiment sweep data model: run logs, baselines, schemas, and slicing.

A sweep is stored in long form, one row per training run, keyed by
``(agent, environment, data_regime, hyperparameter, value, seed)``. Parsing
validates every row against a declared schema and a per-environment baseline
table; the resulting :class:`SweepDataset` is immutable and safe to share.

Hyper-parameter values are opaque strings compared by exact match. ``"0.5"``
and ``"0.50"`` are different settings on purpose: ranking only needs
identity, and numeric coercion silently corrupts keys.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

import yaml

__all__ = [
    "Axis",
    "BaselineTable",
    "ContextKey",
    "DatasetError",
    "EmptySliceError",
    "RunRecord",
    "SweepDataset",
    "SweepSchema",
    "bundled_schema",
    "bundled_schema_bytes",
    "dump_schema",
    "load_dataset",
    "load_schema",
    "parse_dataset",
    "slice_scores",
    "write_baselines",
    "write_run_log",
]

RUN_LOG_HEADER = ("agent", "environment", "data_regime", "hyperparameter", "value", "seed", "final_score")
BASELINES_HEADER = ("environment", "random_score", "human_score")

MAX_DIAGNOSTICS = 200


class DatasetError(ValueError):
    """Raised when a run log, baseline table, or schema fails validation.

    ``diagnostics`` holds one message per offending row or key.
    """

    def __init__(self, diagnostics: Sequence[str]):
        self.diagnostics = list(diagnostics)
        preview = "\n".join(self.diagnostics[:20])
        extra = len(self.diagnostics) - 20
        if extra > 0:
            preview += f"\n... and {extra} more"
        super().__init__(preview)


class EmptySliceError(LookupError):
    """Raised when a context selector matches no records at all."""


class Axis(str, enum.Enum):
    """The three coordinates a run is indexed by besides its setting."""

    AGENT = "agent"
    ENVIRONMENT = "environment"
    DATA_REGIME = "data_regime"


@dataclass(frozen=True)
class RunRecord:
    """Final score of one training run."""

    agent: str
    environment: str
    data_regime: str
    hyperparameter: str
    value: str
    seed: int
    final_score: float

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if not math.isfinite(self.final_score):
            raise ValueError(f"final_score must be finite, got {self.final_score}")

    @property
    def key(self) -> tuple[str, str, str, str, str, int]:
        return (self.agent, self.environment, self.data_regime,
                self.hyperparameter, self.value, self.seed)

    def axis_value(self, axis: Axis) -> str:
        return getattr(self, Axis(axis).value)


@dataclass(frozen=True)
class BaselineTable:
    """Per-environment random and human reference scores."""

    scores: Mapping[str, tuple[float, float]]

    def __post_init__(self) -> None:
        bad = [env for env, (rnd, hum) in self.scores.items() if hum == rnd]
        if bad:
            raise ValueError(f"human_score equals random_score for environments: {sorted(bad)}")

    def __contains__(self, environment: str) -> bool:
        return environment in self.scores

    @property
    def environments(self) -> tuple[str, ...]:
        return tuple(self.scores)

    def random_score(self, environment: str) -> float:
        return self.scores[environment][0]

    def human_score(self, environment: str) -> float:
        return self.scores[environment][1]


def _stringify(value: object) -> str:
    """Canonical string for a schema scalar. Strings pass through untouched;
    quote values in the config to control the exact spelling."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class SweepSchema:
    """Declared identifier vocabularies a dataset is validated against."""

    agents: tuple[str, ...]
    environments: tuple[str, ...]
    data_regimes: tuple[str, ...]
    hyperparameters: Mapping[str, tuple[str, ...]]
    defaults: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        problems = []
        for name, values in (("agents", self.agents),
                             ("environments", self.environments),
                             ("data_regimes", self.data_regimes)):
            if not values:
                problems.append(f"schema key {name!r} must list at least one identifier")
            if len(set(values)) != len(values):
                problems.append(f"schema key {name!r} contains duplicates")
        if not self.hyperparameters:
            problems.append("schema must declare at least one hyperparameter")
        for hp, values in self.hyperparameters.items():
            if not values:
                problems.append(f"hyperparameter {hp!r} declares no values")
            if len(set(values)) != len(values):
                problems.append(f"hyperparameter {hp!r} declares duplicate values")
        for hp in self.defaults:
            if hp not in self.hyperparameters:
                problems.append(f"default given for undeclared hyperparameter {hp!r}")
        if problems:
            raise DatasetError(problems)

    def axis_values(self, axis: Axis) -> tuple[str, ...]:
        return {
            Axis.AGENT: self.agents,
            Axis.ENVIRONMENT: self.environments,
            Axis.DATA_REGIME: self.data_regimes,
        }[Axis(axis)]


@dataclass(frozen=True)
class ContextKey:
    """Coordinates of one analysis context.

    Exactly one axis varies; the other two are pinned to concrete
    identifiers. Slicing groups scores by the varying axis's labels.
    """

    varying: Axis
    agent: str | None = None
    environment: str | None = None
    data_regime: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "varying", Axis(self.varying))
        if getattr(self, self.varying.value) is not None:
            raise ValueError(f"varying axis {self.varying.value!r} must not be fixed")
        for axis in Axis:
            if axis is not self.varying and getattr(self, axis.value) is None:
                raise ValueError(f"non-varying axis {axis.value!r} must be fixed")

    def fixed(self) -> dict[str, str]:
        """The pinned coordinates as a plain mapping."""
        return {axis.value: getattr(self, axis.value)
                for axis in Axis if axis is not self.varying}

    def matches(self, record: RunRecord) -> bool:
        return all(record.axis_value(Axis(name)) == value
                   for name, value in self.fixed().items())


class SweepDataset:
    """Validated, immutable collection of run records plus baselines."""

    __slots__ = ("records", "baselines", "schema", "_by_hyperparameter")

    def __init__(self, records: Iterable[RunRecord], baselines: BaselineTable, schema: SweepSchema):
        records = tuple(records)
        problems = []
        seen: set[tuple] = set()
        for rec in records:
            if rec.agent not in schema.agents:
                problems.append(f"unknown agent {rec.agent!r}")
            if rec.environment not in schema.environments:
                problems.append(f"unknown environment {rec.environment!r}")
            if rec.data_regime not in schema.data_regimes:
                problems.append(f"unknown data_regime {rec.data_regime!r}")
            declared = schema.hyperparameters.get(rec.hyperparameter)
            if declared is None:
                problems.append(f"unknown hyperparameter {rec.hyperparameter!r}")
            elif rec.value not in declared:
                problems.append(f"value {rec.value!r} not declared for hyperparameter {rec.hyperparameter!r}")
            if rec.environment in schema.environments and rec.environment not in baselines:
                problems.append(f"no baseline scores for environment {rec.environment!r}")
            if rec.key in seen:
                problems.append(f"duplicate record key {rec.key}")
            seen.add(rec.key)
            if len(problems) >= MAX_DIAGNOSTICS:
                break
        if problems:
            raise DatasetError(problems)

        object.__setattr__(self, "records", records)
        object.__setattr__(self, "baselines", baselines)
        object.__setattr__(self, "schema", schema)
        by_hp: dict[str, list[RunRecord]] = {}
        for rec in records:
            by_hp.setdefault(rec.hyperparameter, []).append(rec)
        object.__setattr__(self, "_by_hyperparameter",
                           {hp: tuple(rs) for hp, rs in by_hp.items()})

    def __setattr__(self, name, value):
        raise AttributeError("SweepDataset is immutable")

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SweepDataset):
            return NotImplemented
        return (self.records == other.records
                and self.baselines == other.baselines
                and self.schema == other.schema)

    def records_for(self, hyperparameter: str) -> tuple[RunRecord, ...]:
        return self._by_hyperparameter.get(hyperparameter, ())

    def normalize(self, record: RunRecord) -> float:
        """Human-normalized final score of a record."""
        rnd = self.baselines.random_score(record.environment)
        hum = self.baselines.human_score(record.environment)
        return (record.final_score - rnd) / (hum - rnd)


def _iter_csv_rows(stream: IO[str], source: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            row = next(csv.reader([line]))
        except csv.Error as exc:
            raise DatasetError([f"{source}:{lineno}: malformed row: {exc}"]) from exc
        yield lineno, [cell.strip() for cell in row]


def _check_header(row: list[str], expected: tuple[str, ...], source: str, lineno: int) -> None:
    if tuple(row) != expected:
        raise DatasetError([
            f"{source}:{lineno}: expected header {','.join(expected)!r}, got {','.join(row)!r}"
        ])


def _parse_baselines(stream: IO[str], source: str) -> BaselineTable:
    problems: list[str] = []
    scores: dict[str, tuple[float, float]] = {}
    rows = _iter_csv_rows(stream, source)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise DatasetError([f"{source}: baseline table is empty"]) from None
    _check_header(header, BASELINES_HEADER, source, lineno)
    for lineno, row in rows:
        if len(row) != len(BASELINES_HEADER):
            problems.append(f"{source}:{lineno}: expected {len(BASELINES_HEADER)} columns, got {len(row)}")
            continue
        env, rnd_text, hum_text = row
        try:
            rnd = float(rnd_text)
            hum = float(hum_text)
        except ValueError:
            problems.append(f"{source}:{lineno}: non-numeric score for environment {env!r}")
            continue
        if not (math.isfinite(rnd) and math.isfinite(hum)):
            problems.append(f"{source}:{lineno}: non-finite baseline score for environment {env!r}")
            continue
        if hum == rnd:
            problems.append(f"{source}:{lineno}: human_score equals random_score for environment {env!r}")
            continue
        if env in scores:
            problems.append(f"{source}:{lineno}: duplicate baseline row for environment {env!r}")
            continue
        scores[env] = (rnd, hum)
    if problems:
        raise DatasetError(problems)
    return BaselineTable(scores)


def parse_dataset(run_log: IO[str], baselines: IO[str], schema: SweepSchema) -> SweepDataset:
    """Parse and validate a run log and baseline table against a schema.

    Raises :class:`DatasetError` carrying one diagnostic per problem row:
    malformed rows (with line number and column), identifiers absent from the
    schema, duplicate record keys, missing baselines, and non-finite scores.
    """
    run_source = getattr(run_log, "name", "<run log>")
    base_source = getattr(baselines, "name", "<baselines>")
    baseline_table = _parse_baselines(baselines, base_source)

    problems: list[str] = []
    records: list[RunRecord] = []
    seen: set[tuple] = set()
    rows = _iter_csv_rows(run_log, run_source)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise DatasetError([f"{run_source}: run log is empty"]) from None
    _check_header(header, RUN_LOG_HEADER, run_source, lineno)

    for lineno, row in rows:
        if len(problems) >= MAX_DIAGNOSTICS:
            problems.append(f"{run_source}: stopping after {MAX_DIAGNOSTICS} problems")
            break
        if len(row) != len(RUN_LOG_HEADER):
            problems.append(f"{run_source}:{lineno}: expected {len(RUN_LOG_HEADER)} columns, got {len(row)}")
            continue
        agent, env, regime, hp, value, seed_text, score_text = row
        row_problems = []
        for column, ident in (("agent", agent), ("environment", env),
                              ("data_regime", regime), ("hyperparameter", hp), ("value", value)):
            if not ident:
                row_problems.append(f"{run_source}:{lineno}: empty column {column!r}")
        try:
            seed = int(seed_text)
            if seed < 0:
                raise ValueError
        except ValueError:
            row_problems.append(f"{run_source}:{lineno}: column 'seed' must be a non-negative integer, got {seed_text!r}")
            seed = 0
        try:
            score = float(score_text)
        except ValueError:
            row_problems.append(f"{run_source}:{lineno}: column 'final_score' is not a number: {score_text!r}")
            score = 0.0
        if not math.isfinite(score):
            row_problems.append(f"{run_source}:{lineno}: column 'final_score' must be finite, got {score_text!r}")
            score = 0.0

        if agent not in schema.agents:
            row_problems.append(f"{run_source}:{lineno}: unknown agent {agent!r}")
        if env not in schema.environments:
            row_problems.append(f"{run_source}:{lineno}: unknown environment {env!r}")
        elif env not in baseline_table:
            row_problems.append(f"{run_source}:{lineno}: no baseline scores for environment {env!r}")
        if regime not in schema.data_regimes:
            row_problems.append(f"{run_source}:{lineno}: unknown data_regime {regime!r}")
        declared = schema.hyperparameters.get(hp)
        if declared is None:
            row_problems.append(f"{run_source}:{lineno}: unknown hyperparameter {hp!r}")
        elif value not in declared:
            row_problems.append(f"{run_source}:{lineno}: value {value!r} not declared for hyperparameter {hp!r}")

        key = (agent, env, regime, hp, value, seed)
        if key in seen:
            row_problems.append(f"{run_source}:{lineno}: duplicate record key {key}")
        seen.add(key)

        if row_problems:
            problems.extend(row_problems)
        else:
            records.append(RunRecord(agent, env, regime, hp, value, seed, score))

    if problems:
        raise DatasetError(problems)
    return SweepDataset(records, baseline_table, schema)


def load_dataset(run_log_path: str | Path, baselines_path: str | Path,
                 schema_path: str | Path | None = None) -> SweepDataset:
    """File-path convenience wrapper around :func:`parse_dataset`.

    With no schema path the bundled Atari DER/DrQ(eps) schema is used.
    """
    schema = bundled_schema() if schema_path is None else load_schema(schema_path)
    with open(run_log_path, encoding="utf-8") as run_log, \
            open(baselines_path, encoding="utf-8") as baselines:
        return parse_dataset(run_log, baselines, schema)


def slice_scores(
    dataset: SweepDataset,
    context: ContextKey,
    hyperparameter: str,
) -> dict[tuple[str, str], list[float]]:
    """Group one hyper-parameter's per-seed final scores by (varying-axis
    label, value).

    The full declared grid is returned: combinations that were never run
    appear as empty lists rather than vanishing. Within a group, scores are
    ordered by seed. Raises ``KeyError`` for an undeclared hyper-parameter
    and :class:`EmptySliceError` when nothing matches the context at all.
    """
    schema = dataset.schema
    if hyperparameter not in schema.hyperparameters:
        raise KeyError(f"hyperparameter {hyperparameter!r} is not declared in the schema")

    labels = schema.axis_values(context.varying)
    values = schema.hyperparameters[hyperparameter]
    cells: dict[tuple[str, str], list[tuple[int, float]]] = {
        (label, value): [] for label in labels for value in values
    }
    matched = 0
    for rec in dataset.records_for(hyperparameter):
        if not context.matches(rec):
            continue
        cells[(rec.axis_value(context.varying), rec.value)].append((rec.seed, rec.final_score))
        matched += 1
    if matched == 0:
        raise EmptySliceError(
            f"no records for hyperparameter {hyperparameter!r} in context {context.fixed()}"
        )
    return {
        key: [score for _, score in sorted(pairs)]
        for key, pairs in cells.items()
    }


# -- schema and dataset serialization ---------------------------------------

_SCHEMA_LIST_KEYS = ("agents", "environments", "data_regimes")


def load_schema(source: str | Path | IO[str]) -> SweepSchema:
    """Read a schema config document (YAML mapping).

    Keys: ``agents``, ``environments``, ``data_regimes`` (lists of
    identifiers), ``hyperparameters`` (mapping of name to value list), and
    optional ``defaults`` (mapping of name to value). Quote values that must
    keep an exact spelling, e.g. ``"0.50"`` or ``"None"``.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            doc = yaml.safe_load(handle)
        name = str(source)
    else:
        doc = yaml.safe_load(source)
        name = getattr(source, "name", "<schema>")
    return _schema_from_mapping(doc, name)


def _schema_from_mapping(doc: object, source: str) -> SweepSchema:
    if not isinstance(doc, dict):
        raise DatasetError([f"{source}: schema document must be a mapping"])
    problems = []
    lists: dict[str, tuple[str, ...]] = {}
    for key in _SCHEMA_LIST_KEYS:
        raw = doc.get(key)
        if not isinstance(raw, list):
            problems.append(f"{source}: schema key {key!r} must be a list")
            continue
        lists[key] = tuple(_stringify(v) for v in raw)
    raw_hps = doc.get("hyperparameters")
    if not isinstance(raw_hps, dict):
        problems.append(f"{source}: schema key 'hyperparameters' must be a mapping of name to value list")
        raw_hps = {}
    hps: dict[str, tuple[str, ...]] = {}
    for hp, values in raw_hps.items():
        if not isinstance(values, list):
            problems.append(f"{source}: hyperparameter {hp!r} must map to a list of values")
            continue
        hps[_stringify(hp)] = tuple(_stringify(v) for v in values)
    raw_defaults = doc.get("defaults", {})
    if not isinstance(raw_defaults, dict):
        problems.append(f"{source}: schema key 'defaults' must be a mapping")
        raw_defaults = {}
    defaults = {_stringify(k): _stringify(v) for k, v in raw_defaults.items()}
    if problems:
        raise DatasetError(problems)
    return SweepSchema(
        agents=lists["agents"],
        environments=lists["environments"],
        data_regimes=lists["data_regimes"],
        hyperparameters=hps,
        defaults=defaults,
    )


def bundled_schema() -> SweepSchema:
    """The schema shipped with the package: DER and DrQ(eps) value sweeps on
    the 26-game Atari 100k suite at 100k and 40M budgets."""
    ref = resources.files("thckit").joinpath("data/atari_der_drq.yaml")
    with ref.open("r", encoding="utf-8") as handle:
        return load_schema(handle)


def bundled_schema_bytes() -> bytes:
    """Raw bytes of the bundled schema document, for provenance digests."""
    return resources.files("thckit").joinpath("data/atari_der_drq.yaml").read_bytes()


def dump_schema(schema: SweepSchema, stream: IO[str]) -> None:
    doc = {
        "agents": list(schema.agents),
        "environments": list(schema.environments),
        "data_regimes": list(schema.data_regimes),
        "hyperparameters": {hp: list(values) for hp, values in schema.hyperparameters.items()},
    }
    if schema.defaults:
        doc["defaults"] = dict(schema.defaults)
    yaml.safe_dump(doc, stream, sort_keys=False, default_flow_style=False, allow_unicode=True)


def write_run_log(dataset: SweepDataset, stream: IO[str]) -> None:
    """Emit records in the run-log format; floats keep full precision so a
    round trip reproduces the dataset exactly."""
    stream.write(",".join(RUN_LOG_HEADER) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    for rec in dataset.records:
        writer.writerow([rec.agent, rec.environment, rec.data_regime,
                         rec.hyperparameter, rec.value, rec.seed, repr(rec.final_score)])


def write_baselines(dataset: SweepDataset, stream: IO[str]) -> None:
    stream.write(",".join(BASELINES_HEADER) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    for env in sorted(dataset.baselines.environments):
        writer.writerow([env,
                         repr(dataset.baselines.random_score(env)),
                         repr(dataset.baselines.human_score(env))])
