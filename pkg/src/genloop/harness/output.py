"""CSV tables and gnuplot data files. Rows are pydantic models or plain
mappings; floats are written with `repr`, so files are byte-identical for
identical results."""
import collections
import csv
import io
import math
import pathlib
import typing as t

import pydantic

from genloop import errors

Row: t.TypeAlias = pydantic.BaseModel | t.Mapping[str, t.Any]


def _as_dict(row: Row) -> dict[str, t.Any]:
    if isinstance(row, pydantic.BaseModel):
        return row.model_dump(mode='json')
    return dict(row)


def _cell(value: t.Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(
    rows: t.Iterable[Row],
    fieldnames: t.Sequence[str] | None = None,
) -> str:
    dicts = [_as_dict(row) for row in rows]
    if fieldnames is None:
        fieldnames = list(dicts[0]) if dicts else []
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=list(fieldnames), lineterminator='\n')
    writer.writeheader()
    for row in dicts:
        writer.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return buffer.getvalue()


def write_csv(
    path: str | pathlib.Path,
    rows: t.Iterable[Row],
    fieldnames: t.Sequence[str] | None = None,
) -> pathlib.Path:
    """Write rows as CSV. Without `fieldnames` the keys of the first row
    are the header. Missing and None values become empty cells."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(rows, fieldnames), encoding='utf-8')
    return path


def read_csv(path: str | pathlib.Path) -> list[dict[str, str | None]]:
    """Read a CSV written by `write_csv`; empty cells become None.

    Raises:
        errors.DataError: when the file cannot be read.
    """
    try:
        text = pathlib.Path(path).read_text(encoding='utf-8')
    except OSError as ex:
        raise errors.DataError(f'cannot read {path}') from ex
    return [
        {k: (v if v != '' else None) for k, v in row.items()}
        for row in csv.DictReader(io.StringIO(text))
    ]


def write_dat(
    path: str | pathlib.Path,
    rows: t.Iterable[Row],
    columns: t.Sequence[str],
    comment: str = '',
) -> pathlib.Path:
    """A whitespace separated gnuplot data file with a commented header.
    Missing values are written as `NaN`."""
    lines = []
    if comment:
        lines.append(f'# {comment}')
    lines.append('# ' + ' '.join(columns))
    for row in map(_as_dict, rows):
        cells = []
        for column in columns:
            value = row.get(column)
            cells.append('NaN' if value is None else _cell(value))
        lines.append(' '.join(cells))
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def mean_std(values: t.Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation; the deviation of a single value
    is 0."""
    if not values:
        raise errors.ContractError('no values to aggregate')
    mean = math.fsum(values) / len(values)
    if len(values) == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def aggregate(
    rows: t.Iterable[t.Mapping[str, t.Any]],
    group_keys: t.Sequence[str],
    value_keys: t.Sequence[str],
) -> list[dict[str, t.Any]]:
    """Mean and standard deviation of `value_keys` per group, groups in
    first-seen order. Output columns are `<key>_mean` and `<key>_std`."""
    groups: dict[tuple, list[t.Mapping[str, t.Any]]] = (
        collections.OrderedDict())
    for row in rows:
        groups.setdefault(tuple(row[k] for k in group_keys), []).append(row)
    result = []
    for key, members in groups.items():
        out: dict[str, t.Any] = dict(zip(group_keys, key))
        out['n'] = len(members)
        for name in value_keys:
            values = [float(m[name]) for m in members
                      if m.get(name) is not None]
            mean, std = mean_std(values) if values else (None, None)
            out[f'{name}_mean'] = mean
            out[f'{name}_std'] = std
        result.append(out)
    return result
