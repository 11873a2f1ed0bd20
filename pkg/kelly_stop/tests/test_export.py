import json
import pathlib

import numpy as np
import pandas as pd
import pytest

from kelly_stop import export
from kelly_stop.core import Grid, StrategySurface


def linear_surface():
    grid = Grid(nz=2, dtheta=0.01, ntheta=1)
    return StrategySurface.from_function(grid, [0.0, 0.01], lambda z, theta: 1.0 - z)


class TestExportFormat:
    def test_as_format(self):
        assert export.ExportFormat.as_format('CSV') is export.ExportFormat.csv
        assert export.ExportFormat.as_format('.json') is export.ExportFormat.json
        assert export.ExportFormat.as_format(export.ExportFormat.csv) is export.ExportFormat.csv
        assert export.ExportFormat.json.suffix == '.json'

    def test_unknown(self):
        with pytest.raises(export.ExportError) as exc:
            export.ExportFormat.as_format('xml')
        assert str(exc.value) == "Unknown export format 'xml', expected csv or json"

    def test_wrong_type(self):
        with pytest.raises(ValueError) as exc:
            export.ExportFormat.as_format(1)
        assert str(exc.value) == 'as_format() accepts only ExportFormat or str arguments'


class TestRender:
    def test_csv(self):
        table = pd.DataFrame({'a': [0.1, 2.0], 'b': [1, 2]})
        assert export.render_csv(table) == 'a,b\n0.10000000000000001,1\n2,2\n'

    def test_json(self):
        text = export.render_json({'b': np.array([1.5, 2.0]), 'a': np.float64(0.25)})
        assert text == '{\n  "a": 0.25,\n  "b": [\n    1.5,\n    2.0\n  ]\n}\n'
        assert json.loads(text) == {'a': 0.25, 'b': [1.5, 2.0]}

    def test_json_non_finite(self):
        with pytest.raises(export.ExportError):
            export.render_json({'a': float('nan')})

    def test_surface_table(self):
        table = export.surface_table(linear_surface())
        assert list(table.columns) == ['z', 'theta', 'u']
        assert len(table) == 8
        # Row-major by theta.
        assert table['theta'].tolist() == [0.0] * 4 + [0.01] * 4
        np.testing.assert_allclose(table['u'], 1.0 - table['z'])

    def test_surface_document(self):
        document = export.surface_document(linear_surface(), {'alpha_K': 10.0})
        assert document['params']['alpha_K'] == 10.0
        assert document['params']['stored_planes'] == 2
        assert document['params']['grid']['nz'] == 2
        assert np.shape(document['values']) == (2, 4)
        parsed = json.loads(export.render_json(document))
        assert parsed['grid']['theta'] == [0.0, 0.01]


class TestLocalFSWriter:
    def test_init(self, tmp_path: pathlib.Path):
        root = tmp_path.joinpath('real')
        root.mkdir()
        tmp_path.joinpath('link').symlink_to(root, target_is_directory=True)

        writer = export.LocalFSWriter(root)
        assert writer.root == root.resolve()
        assert writer.name == 'fs-real'
        assert str(writer) == 'LocalFSWriter'

        assert export.LocalFSWriter(tmp_path / 'link').root == root.resolve()
        assert export.LocalFSWriter(root, name='results').name == 'results'

    def test_init_not_dir(self, tmp_path: pathlib.Path):
        root = tmp_path.joinpath('foo')
        root.touch()
        with pytest.raises(export.ExportError) as exc:
            export.LocalFSWriter(root)
        assert str(exc.value) == 'Output root does not exist or is not a directory'

        with pytest.raises(export.ExportError):
            export.LocalFSWriter(tmp_path / 'missing')

    def test_write_csv(self, tmp_path: pathlib.Path):
        writer = export.LocalFSWriter(tmp_path)
        entry = writer.write('figure-2b', 'csv', table=pd.DataFrame({'theta': [0.0], 'u': [1.0]}))
        assert entry.name == 'figure-2b.csv'
        assert entry.size == len('theta,u\n0,1\n')
        assert tmp_path.joinpath('figure-2b.csv').read_text() == 'theta,u\n0,1\n'
        assert writer.written == [entry]

    def test_write_json_records(self, tmp_path: pathlib.Path):
        writer = export.LocalFSWriter(tmp_path)
        writer.write('comparison', 'json', table=pd.DataFrame({'label': ['a'], 'rank': [1]}))
        document = json.loads(tmp_path.joinpath('comparison.json').read_text())
        assert document == {'columns': ['label', 'rank'], 'records': [{'label': 'a', 'rank': 1}]}

    def test_write_document_preferred(self, tmp_path: pathlib.Path):
        writer = export.LocalFSWriter(tmp_path)
        writer.write('value', 'json', table=pd.DataFrame({'pi': [1.0]}), document={'theta': 0.5})
        assert json.loads(tmp_path.joinpath('value.json').read_text()) == {'theta': 0.5}

    def test_nothing_to_write(self, tmp_path: pathlib.Path):
        writer = export.LocalFSWriter(tmp_path)
        with pytest.raises(export.ExportError) as exc:
            writer.write('value', 'csv', document={'theta': 0.5})
        assert str(exc.value) == 'value has no tabular form'
        with pytest.raises(export.ExportError) as exc:
            writer.write('value', 'json')
        assert str(exc.value) == 'Nothing to write for value'

    def test_subdirectories(self, tmp_path: pathlib.Path):
        writer = export.LocalFSWriter(tmp_path)
        entry = writer.write_text('run1/a.txt', 'a')
        assert entry.name == 'run1/a.txt'
        assert tmp_path.joinpath('run1', 'a.txt').read_text() == 'a'

    def test_symlink_escape(self, tmp_path: pathlib.Path):
        root = tmp_path.joinpath('root')
        root.mkdir()
        root.joinpath('out').symlink_to(tmp_path, target_is_directory=True)
        writer = export.LocalFSWriter(root)
        with pytest.raises(export.ExportError) as exc:
            writer.write_text('out/escape.csv', 'x')
        assert str(exc.value) == 'Invalid path'
        assert not tmp_path.joinpath('escape.csv').exists()

    def test_directory_target(self, tmp_path: pathlib.Path):
        tmp_path.joinpath('sub').mkdir()
        writer = export.LocalFSWriter(tmp_path)
        with pytest.raises(export.ExportError) as exc:
            writer.write_text('sub', 'x')
        assert str(exc.value) == 'Invalid path'

    @pytest.mark.parametrize('path,message', [
        ('../escape.csv', 'Invalid path'),
        ('a*b.csv', 'Unsupported characters in path'),
        ('a\tb.csv', 'Unsupported characters in path'),
    ])
    def test_invalid_paths(self, tmp_path: pathlib.Path, path, message):
        root = tmp_path.joinpath('root')
        root.mkdir()
        writer = export.LocalFSWriter(root)
        with pytest.raises(export.ExportError) as exc:
            writer.write_text(path, 'x')
        assert str(exc.value) == message
        assert writer.written == []

    def test_overwrite(self, tmp_path: pathlib.Path):
        writer = export.LocalFSWriter(tmp_path)
        writer.write_text('a.txt', 'first')
        writer.write_text('a.txt', 'second')
        assert tmp_path.joinpath('a.txt').read_text() == 'second'
        assert [e.name for e in writer.written] == ['a.txt', 'a.txt']
