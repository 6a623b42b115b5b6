"""Per-entity metric tables: loading, reversal handling, correlation matrices.

Columns follow the ``Construct.Metric[.Tool]`` naming convention, e.g.
``Size.LOC.Designite``: the construct the metric claims to reflect, the metric
itself, and optionally the tool that computed it.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConstantColumnError, ValidationError

LISTWISE = "listwise"
PAIRWISE = "pairwise"


@dataclass(frozen=True, order=True)
class MetricName:
    """Parsed ``Construct.Metric[.Tool]`` column header."""

    construct: str
    metric: str
    tool: str | None = None
    raw: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.construct:
            raise ValidationError("metric name needs a non-empty construct segment")
        if not self.raw:
            object.__setattr__(self, "raw", str(self))

    @classmethod
    def parse(cls, header: str) -> "MetricName":
        """Parse a header. Extra segments beyond three fold into the metric name."""
        parts = header.strip().split(".")
        if len(parts) < 2 or not parts[0] or not parts[1]:
            raise ValidationError(
                f"column {header!r} does not follow the Construct.Metric[.Tool] convention"
            )
        if len(parts) == 2:
            return cls(parts[0], parts[1], None, header.strip())
        return cls(parts[0], ".".join(parts[1:-1]), parts[-1] or None, header.strip())

    def __str__(self):
        if self.tool:
            return f"{self.construct}.{self.metric}.{self.tool}"
        return f"{self.construct}.{self.metric}"


@dataclass(frozen=True)
class ParseOptions:
    """Options for :func:`load_dataset`."""

    delimiter: str = ","
    strict: bool = False


@dataclass(frozen=True)
class MetricDataset:
    """Immutable entities-by-metrics value table.

    Missing cells are stored as NaN; every non-missing cell is a finite float.
    """

    entity_ids: tuple
    columns: tuple
    values: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "entity_ids", tuple(self.entity_ids))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if values.ndim != 2:
            raise ValidationError("values must be a 2-D entities x metrics table")
        if values.shape != (len(self.entity_ids), len(self.columns)):
            raise ValidationError(
                f"values shape {values.shape} does not match "
                f"{len(self.entity_ids)} entities x {len(self.columns)} metrics"
            )
        names = [str(c) for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate metric names: {', '.join(dupes)}")
        if np.isinf(values).any():
            raise ValidationError("values must be finite or missing (NaN)")

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def n_metrics(self) -> int:
        return len(self.columns)

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def column_index(self, name) -> int:
        key = str(name)
        for i, col in enumerate(self.columns):
            if str(col) == key:
                return i
        raise ValidationError(f"unknown metric {key!r}")

    def select(self, names) -> "MetricDataset":
        """Dataset restricted to the named metrics, in the given order."""
        idx = [self.column_index(n) for n in names]
        return MetricDataset(
            self.entity_ids,
            tuple(self.columns[i] for i in idx),
            self.values[:, idx],
            self.provenance,
        )

    def drop(self, names) -> "MetricDataset":
        """Dataset without the named metrics."""
        gone = {str(n) for n in names}
        for name in gone:
            self.column_index(name)
        keep = [c for c in self.columns if str(c) not in gone]
        return self.select(keep)

    def complete_rows(self, names=None) -> np.ndarray:
        """Row mask with no missing cell among the given metrics (all by default)."""
        sub = self.values if names is None else self.values[:, [self.column_index(n) for n in names]]
        return ~np.isnan(sub).any(axis=1)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson correlations with the labels and sample size that produced them."""

    labels: tuple
    r: np.ndarray
    n_used: int
    missing_policy: str = LISTWISE
    n_pairwise: np.ndarray | None = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "labels", tuple(self.labels))
        p = len(self.labels)
        if r.shape != (p, p):
            raise ValidationError("correlation matrix shape does not match labels")
        if not np.allclose(r, r.T, atol=1e-12):
            raise ValidationError("correlation matrix must be symmetric")
        if not np.all(np.diag(r) == 1.0):
            raise ValidationError("correlation matrix diagonal must be exactly 1")
        if np.nanmax(np.abs(r)) > 1.0 + 1e-12:
            raise ValidationError("correlations must lie in [-1, 1]")

    @property
    def p(self) -> int:
        return len(self.labels)


def load_dataset(source, options: ParseOptions = ParseOptions()) -> MetricDataset:
    """Load a delimiter-separated metric table.

    The first row is the header and the first column the entity id. Empty
    cells are missing; non-numeric cells are missing too unless
    ``options.strict``, in which case they raise. A column with no numeric
    value at all is treated as categorical and rejected.
    """
    if isinstance(source, str):
        stream = io.StringIO(source)
    elif hasattr(source, "read"):
        stream = source
    else:
        stream = open(source, "r", encoding="utf-8", newline="")
    try:
        reader = csv.reader(stream, delimiter=options.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("input has no header row") from None
        if len(header) < 2:
            raise ValidationError("header must name an entity-id column and at least one metric")
        columns = tuple(MetricName.parse(h) for h in header[1:])
        raw_names = [str(c) for c in columns]
        if len(set(raw_names)) != len(raw_names):
            dupes = sorted({n for n in raw_names if raw_names.count(n) > 1})
            raise ValidationError(f"duplicate metric names: {', '.join(dupes)}")

        entity_ids = []
        rows = []
        non_numeric_seen = [False] * len(columns)
        numeric_seen = [False] * len(columns)
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ValidationError(
                    f"line {lineno}: expected {len(header)} cells, found {len(record)}"
                )
            entity_ids.append(record[0])
            parsed = []
            for j, cell in enumerate(record[1:]):
                text = cell.strip()
                if not text:
                    parsed.append(math.nan)
                    continue
                try:
                    value = float(text)
                except ValueError:
                    if options.strict:
                        raise ValidationError(
                            f"line {lineno}: cell {text!r} in column "
                            f"{raw_names[j]!r} is not numeric"
                        ) from None
                    non_numeric_seen[j] = True
                    parsed.append(math.nan)
                    continue
                if not math.isfinite(value):
                    raise ValidationError(
                        f"line {lineno}: non-finite value in column {raw_names[j]!r}"
                    )
                numeric_seen[j] = True
                parsed.append(value)
            rows.append(parsed)
        if not rows:
            raise ValidationError("input has a header but no data rows")
        categorical = [
            raw_names[j]
            for j in range(len(columns))
            if non_numeric_seen[j] and not numeric_seen[j]
        ]
        if categorical:
            raise ValidationError(
                "non-numeric columns must be recoded before loading: "
                + ", ".join(categorical)
            )
        return MetricDataset(tuple(entity_ids), columns, np.array(rows, dtype=float))
    finally:
        if stream is not source and not isinstance(source, str):
            stream.close()
        elif isinstance(source, str):
            stream.close()


def save_dataset(ds: MetricDataset, stream=None, delimiter: str = ",") -> str | None:
    """Write the canonical echo of a dataset; returns the text if no stream given.

    Floats are written with ``repr`` so a reload reproduces them bit-exactly.
    """
    buffer = stream or io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["entity"] + [str(c) for c in ds.columns])
    for i, entity in enumerate(ds.entity_ids):
        row = [entity]
        for value in ds.values[i]:
            row.append("" if math.isnan(value) else repr(float(value)))
        writer.writerow(row)
    if stream is None:
        return buffer.getvalue()
    return None


def invert_reversed(ds: MetricDataset, metrics, mode: str = "negate",
                    bounds: tuple | None = None) -> MetricDataset:
    """Invert reversed metrics so all indicators point the same way.

    ``negate`` maps x to -x; ``reflect`` maps x to min+max-x and requires
    finite declared ``bounds=(min, max)`` covering every observed value.
    """
    names = [str(m) for m in metrics]
    idx = [ds.column_index(n) for n in names]
    values = ds.values.copy()
    if mode == "negate":
        values[:, idx] = -values[:, idx]
        note = f"negated: {', '.join(names)}"
    elif mode == "reflect":
        if bounds is None:
            raise ValidationError("reflect mode requires bounds=(min, max)")
        lo, hi = float(bounds[0]), float(bounds[1])
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            raise ValidationError("reflect bounds must be finite with min < max")
        block = values[:, idx]
        observed = block[~np.isnan(block)]
        if observed.size and (observed.min() < lo or observed.max() > hi):
            raise ValidationError(
                f"observed values fall outside reflect bounds [{lo}, {hi}]"
            )
        values[:, idx] = lo + hi - block
        note = f"reflected over [{lo}, {hi}]: {', '.join(names)}"
    else:
        raise ValidationError(f"unknown inversion mode {mode!r}")
    return replace(ds, values=values, provenance=ds.provenance + (note,))


def correlation_matrix(ds: MetricDataset, missing_policy: str = LISTWISE,
                       metrics=None) -> CorrelationMatrix:
    """Pearson product-moment correlation matrix of the dataset's metrics.

    Listwise deletion keeps the matrix Gramian; pairwise deletion uses all
    available pairs and warns when the result is not positive semidefinite.
    """
    if missing_policy not in (LISTWISE, PAIRWISE):
        raise ValidationError(f"unknown missing policy {missing_policy!r}")
    sub = ds if metrics is None else ds.select(metrics)
    p = sub.n_metrics
    if p < 2:
        raise ValidationError("need at least two metrics for a correlation matrix")

    if missing_policy == LISTWISE:
        keep = sub.complete_rows()
        n_used = int(keep.sum())
        if n_used < 3:
            raise ValidationError(
                f"only {n_used} complete observations; need at least 3"
            )
        data = sub.values[keep]
        sd = data.std(axis=0, ddof=1)
        for j in range(p):
            if sd[j] == 0:
                raise ConstantColumnError(str(sub.columns[j]))
        r = np.corrcoef(data, rowvar=False)
        n_pairwise = None
    else:
        r = np.eye(p)
        n_pairwise = np.full((p, p), sub.n_entities, dtype=int)
        for j in range(p):
            col = sub.values[:, j]
            finite = col[~np.isnan(col)]
            if finite.size and finite.std(ddof=1) == 0:
                raise ConstantColumnError(str(sub.columns[j]))
        for j in range(p):
            for k in range(j + 1, p):
                both = ~np.isnan(sub.values[:, j]) & ~np.isnan(sub.values[:, k])
                n_jk = int(both.sum())
                n_pairwise[j, k] = n_pairwise[k, j] = n_jk
                if n_jk < 3:
                    raise ValidationError(
                        f"pair {sub.columns[j]}/{sub.columns[k]} has only "
                        f"{n_jk} complete observations; need at least 3"
                    )
                x, y = sub.values[both, j], sub.values[both, k]
                if x.std(ddof=1) == 0:
                    raise ConstantColumnError(str(sub.columns[j]))
                if y.std(ddof=1) == 0:
                    raise ConstantColumnError(str(sub.columns[k]))
                r[j, k] = r[k, j] = np.corrcoef(x, y)[0, 1]
        n_used = int(n_pairwise[np.triu_indices(p, 1)].min()) if p > 1 else sub.n_entities
        eigmin = np.linalg.eigvalsh((r + r.T) / 2).min()
        if eigmin < -1e-10:
            warnings.warn(
                "pairwise correlation matrix is not positive semidefinite "
                f"(smallest eigenvalue {eigmin:.3e}); factor analysis may fail",
                stacklevel=2,
            )

    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(sub.columns, r, n_used, missing_policy, n_pairwise)


def correlation_table(cm: CorrelationMatrix, delimiter: str = ",") -> str:
    """Square labelled export of a correlation matrix."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    labels = [str(c) for c in cm.labels]
    writer.writerow([""] + labels)
    for label, row in zip(labels, cm.r):
        writer.writerow([label] + [repr(float(v)) for v in row])
    return buffer.getvalue()
