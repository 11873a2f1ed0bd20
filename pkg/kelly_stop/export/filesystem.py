import logging
import pathlib
import string
import typing

from kelly_stop.export import base

log = logging.getLogger(__name__)


class LocalFSWriter(base.ArtifactWriter):
    """Writes result files below ``root``; paths may not leave it, through ``..`` or symlinks."""
    disallowed_path_chars = frozenset(set('~?*' + string.whitespace) - {' '})

    def __init__(self, root: typing.Union[str, pathlib.Path], name: str = None):
        self.root = pathlib.Path(root).resolve()
        if not self.root.is_dir():
            raise base.ExportError('Output root does not exist or is not a directory')
        super().__init__(name=name if name is not None else 'fs-{}'.format(self.root.name))

    def _target(self, path: str) -> pathlib.Path:
        """Resolved location of ``path``; raises for odd characters or anything outside root."""
        if self.disallowed_path_chars.intersection(path):
            raise base.ExportError('Unsupported characters in path')
        target = self.root.joinpath(path).resolve()
        try:
            target.relative_to(self.root)
        except ValueError:
            raise base.ExportError('Invalid path')
        return target

    def open(self, path: str) -> typing.TextIO:
        target = self._target(path)
        if target.exists() and not target.is_file():
            raise base.ExportError('Invalid path')
        target.parent.mkdir(parents=True, exist_ok=True)
        log.debug('Writing {}'.format(target))
        # newline='' keeps '\n' line endings on every platform.
        return target.open('w', encoding='utf-8', newline='')
