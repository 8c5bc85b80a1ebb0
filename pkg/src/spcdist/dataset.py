"""Data model and CSV ingestion for irregular longitudinal observations.

One ``Subject`` is a single irregularly sampled series; a ``Dataset``
collects subjects sharing a common time domain ``[t_lower, t_upper]``.
Missing values are represented by absent rows in the long-format CSV, never
by sentinel codes.
"""

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from spcdist.errors import ValidationError

#: Smallest admissible number of observations per subject.  A natural cubic
#: smoothing spline needs at least three distinct knots, and the restricted
#: likelihood needs a residual degree of freedom beyond the two-dimensional
#: straight-line null space.
MIN_POINTS = 4

CSV_HEADER = ("subject", "time", "value")


def _as_readonly(values):
    arr = np.asarray(values, dtype=np.float64)
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Subject:
    """One subject's series: strictly increasing times, matching values.

    The constructor does not validate; use :func:`validate` on the enclosing
    dataset, or build datasets through :func:`parse_long_csv` which does.
    """

    id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _as_readonly(self.times))
        object.__setattr__(self, "values", _as_readonly(self.values))

    @property
    def n_obs(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, Subject):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class Dataset:
    """Subjects plus the shared domain the distance integrals run over."""

    subjects: tuple = field(default_factory=tuple)
    t_lower: float = 0.0
    t_upper: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "t_lower", float(self.t_lower))
        object.__setattr__(self, "t_upper", float(self.t_upper))

    @property
    def n(self):
        return len(self.subjects)

    @property
    def ids(self):
        return tuple(s.id for s in self.subjects)

    @property
    def domain(self):
        return (self.t_lower, self.t_upper)

    def subject(self, subject_id):
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    def restrict(self, keep_ids):
        """Dataset with only the given subject ids, original order kept."""
        keep = set(keep_ids)
        return replace(
            self, subjects=tuple(s for s in self.subjects if s.id in keep)
        )


def validate(dataset):
    """Check every type invariant; return a list of violation messages.

    Returns an empty list iff the dataset is well formed.  Never raises:
    this is the reporting counterpart of the raising constructors.
    """
    problems = []
    if not dataset.t_lower < dataset.t_upper:
        problems.append(
            f"domain: t_lower={dataset.t_lower!r} must be below "
            f"t_upper={dataset.t_upper!r}"
        )
    seen = {}
    for s in dataset.subjects:
        seen[s.id] = seen.get(s.id, 0) + 1
    for sid, count in seen.items():
        if count > 1:
            problems.append(f"subject {sid!r}: id appears {count} times")
    for s in dataset.subjects:
        if len(s.times) != len(s.values):
            problems.append(
                f"subject {s.id!r}: {len(s.times)} times but "
                f"{len(s.values)} values"
            )
            continue
        if len(s.times) < MIN_POINTS:
            problems.append(
                f"subject {s.id!r}: {len(s.times)} observations, "
                f"need at least {MIN_POINTS}"
            )
        if len(s.times) >= 2 and not np.all(np.diff(s.times) > 0):
            problems.append(f"subject {s.id!r}: times not strictly increasing")
        if len(s.times) and (
            s.times[0] < dataset.t_lower or s.times[-1] > dataset.t_upper
        ):
            problems.append(
                f"subject {s.id!r}: observations outside the domain "
                f"[{dataset.t_lower!r}, {dataset.t_upper!r}]"
            )
        if not np.all(np.isfinite(s.times)) or not np.all(np.isfinite(s.values)):
            problems.append(f"subject {s.id!r}: non-finite time or value")
    return problems


def _check(dataset):
    problems = validate(dataset)
    if problems:
        raise ValidationError("; ".join(problems))
    return dataset


def parse_long_csv(source, domain=None):
    """Parse long-format CSV (``subject,time,value``) into a Dataset.

    ``source`` may be the CSV text itself or an open text stream.  Rows may
    appear in any order; rows with an empty value field are missing
    observations and are dropped.  Subjects are ordered by id, times
    ascending within each subject.  When ``domain`` is None the domain is
    the global range of observed times.

    Raises
    ------
    ValidationError
        Empty input, malformed numeric field, duplicated (subject, time)
        pair, any subject retaining fewer than four rows, or observations
        outside an explicitly supplied domain.
    """
    if isinstance(source, (str, bytes)):
        if isinstance(source, bytes):
            source = source.decode("utf-8")
        stream = io.StringIO(source)
    else:
        stream = source
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty input: no header row") from None
    header = [col.strip().lstrip("﻿") for col in header]
    if tuple(header) != CSV_HEADER:
        raise ValidationError(
            f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
        )

    rows = {}
    n_data_rows = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # blank line
        if len(row) != 3:
            raise ValidationError(
                f"line {lineno}: expected 3 fields, got {len(row)}"
            )
        sid, time_text, value_text = (f.strip() for f in row)
        if not sid:
            raise ValidationError(f"line {lineno}: empty subject id")
        try:
            t = float(time_text)
        except ValueError:
            raise ValidationError(
                f"line {lineno}: non-numeric time {time_text!r}"
            ) from None
        n_data_rows += 1
        if not value_text:
            continue  # missing observation
        try:
            v = float(value_text)
        except ValueError:
            raise ValidationError(
                f"line {lineno}: non-numeric value {value_text!r}"
            ) from None
        rows.setdefault(sid, []).append((t, v))

    if n_data_rows == 0:
        raise ValidationError("empty input: no data rows")

    subjects = []
    too_short = []
    for sid in sorted(rows):
        obs = sorted(rows[sid])
        times = np.array([t for t, _ in obs])
        if len(times) >= 2:
            dup = np.flatnonzero(np.diff(times) == 0)
            if dup.size:
                raise ValidationError(
                    f"subject {sid!r}: duplicate time point "
                    f"{times[dup[0]]!r}"
                )
        if len(obs) < MIN_POINTS:
            too_short.append(sid)
            continue
        subjects.append(
            Subject(sid, times, np.array([v for _, v in obs]))
        )
    if too_short:
        raise ValidationError(
            "subjects with fewer than "
            f"{MIN_POINTS} non-missing observations: {', '.join(too_short)}"
        )
    if not subjects:
        raise ValidationError("empty input: no usable subjects")

    if domain is None:
        t_lower = min(s.times[0] for s in subjects)
        t_upper = max(s.times[-1] for s in subjects)
    else:
        t_lower, t_upper = (float(domain[0]), float(domain[1]))
    return _check(Dataset(tuple(subjects), t_lower, t_upper))


def write_long_csv(dataset, target):
    """Write a dataset back to long CSV with full-precision numeric text.

    ``repr`` rendering round-trips every float exactly, so
    ``parse_long_csv(write_long_csv(ds, ...))`` reproduces ``ds``
    bit for bit.
    """
    own = isinstance(target, (str, bytes))
    stream = open(target, "w", newline="") if own else target
    try:
        stream.write(",".join(CSV_HEADER) + "\n")
        for s in dataset.subjects:
            for t, v in zip(s.times.tolist(), s.values.tolist()):
                stream.write(f"{s.id},{t!r},{v!r}\n")
    finally:
        if own:
            stream.close()


def read_long_csv(path, domain=None):
    """Parse a long-format CSV file from disk."""
    with open(path, "r", newline="") as fh:
        return parse_long_csv(fh, domain=domain)
