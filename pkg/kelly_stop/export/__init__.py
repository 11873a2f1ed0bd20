from .base import (
    ArtifactWriter,
    ExportError,
    ExportFormat,
    ListEntry,
    render_csv,
    render_json,
    surface_document,
    surface_table,
)
from .filesystem import LocalFSWriter

__all__ = [
    "ArtifactWriter",
    "ExportError",
    "ExportFormat",
    "ListEntry",
    "LocalFSWriter",
    "base",
    "filesystem",
    "render_csv",
    "render_json",
    "surface_document",
    "surface_table",
]
