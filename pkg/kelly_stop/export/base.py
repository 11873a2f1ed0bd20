import enum
import json
import typing

import arrow
import numpy as np
import pandas as pd

from kelly_stop.core import StrategySurface
from kelly_stop.utils import KellyStopError

# 17 significant digits round-trip any double.
CSV_FLOAT_FORMAT = '%.17g'


class ExportError(KellyStopError):
    pass


class ListEntry(typing.NamedTuple):
    name: str
    last_modified: arrow.Arrow
    size: int


class ExportFormat(enum.Enum):
    csv = 'csv'
    json = 'json'

    @property
    def suffix(self) -> str:
        return '.' + self.value

    @classmethod
    def as_format(cls, obj: typing.Union[str, 'ExportFormat']) -> 'ExportFormat':
        if isinstance(obj, cls):
            return obj
        if not isinstance(obj, str):
            raise ValueError('as_format() accepts only ExportFormat or str arguments')
        try:
            return cls(obj.lower().lstrip('.'))
        except ValueError:
            raise ExportError('Unknown export format {!r}, expected csv or json'.format(obj))


def _plain(value):
    """JSON-compatible copy of ``value`` with numpy scalars and arrays unpacked."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def render_json(document) -> str:
    try:
        return json.dumps(_plain(document), sort_keys=True, indent=2, allow_nan=False) + '\n'
    except ValueError as e:
        raise ExportError('Document cannot be written as JSON: {}'.format(e)) from e


def render_csv(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def surface_table(surface: StrategySurface) -> pd.DataFrame:
    """Long ``z,theta,u`` table, row-major by theta."""
    zz, tt = np.meshgrid(surface.z, surface.thetas)
    return pd.DataFrame({'z': zz.ravel(), 'theta': tt.ravel(), 'u': surface.values.ravel()})


def surface_document(surface: StrategySurface, params: dict = None) -> dict:
    return {
        'params': dict(params or {}, **surface.metadata()),
        'grid': {'z': surface.z, 'theta': surface.thetas},
        'values': surface.values,
    }


class ArtifactWriter:
    """Somewhere result files can be written to; subclasses supply ``open``."""

    def __init__(self, name: str):
        self.name = name
        self.written: typing.List[ListEntry] = []

    def open(self, path: str) -> typing.TextIO:
        """
        Returns a text stream that replaces the artifact at `path` once closed.
        """
        raise NotImplementedError()

    def write_text(self, path: str, text: str) -> ListEntry:
        with self.open(path) as fp:
            fp.write(text)
        entry = ListEntry(name=path, last_modified=arrow.utcnow(),
                          size=len(text.encode('utf-8')))
        self.written.append(entry)
        return entry

    def write_table(self, path: str, table: pd.DataFrame) -> ListEntry:
        return self.write_text(path, render_csv(table))

    def write_document(self, path: str, document) -> ListEntry:
        return self.write_text(path, render_json(document))

    def write(self, stem: str, fmt: typing.Union[str, ExportFormat], table=None,
              document=None) -> ListEntry:
        """Write ``stem`` + suffix in ``fmt``; a table without a document is written as records."""
        fmt = ExportFormat.as_format(fmt)
        if fmt is ExportFormat.csv:
            if table is None:
                raise ExportError('{} has no tabular form'.format(stem))
            return self.write_table(stem + fmt.suffix, table)
        if document is None:
            if table is None:
                raise ExportError('Nothing to write for {}'.format(stem))
            document = {'columns': list(table.columns), 'records': table.to_dict('records')}
        return self.write_document(stem + fmt.suffix, document)

    def __str__(self):
        return self.__class__.__name__
