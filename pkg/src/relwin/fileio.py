"""JSON document I/O with schema-version checks; .gz paths are gzipped."""

from __future__ import annotations

import gzip
import io
import json
from pathlib import Path

from .errors import ValidationError

__all__ = ["write_json_doc", "read_json_doc", "check_schema_version"]


def write_json_doc(path, doc: dict) -> None:
    """Serialize a document deterministically (sorted keys, gzip mtime 0)."""
    path = Path(path)
    data = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as gz:
            gz.write(data)
        data = buf.getvalue()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def read_json_doc(path, expected_kind: str | None = None) -> dict:
    """Read a JSON document, transparently decompressing .gz paths."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".gz":
        try:
            data = gzip.decompress(data)
        except OSError as exc:
            raise ValidationError(f"{path} is not valid gzip data: {exc}") from exc
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path} must contain a JSON object")
    if expected_kind is not None and doc.get("kind") != expected_kind:
        raise ValidationError(
            f"{path}: expected a {expected_kind!r} document, got {doc.get('kind')!r}")
    return doc


def check_schema_version(doc: dict, supported_major: int, path="document") -> None:
    """Reject documents whose schema major version is unknown."""
    version = doc.get("schema_version")
    if not isinstance(version, str) or "." not in version:
        raise ValidationError(f"{path}: missing or malformed schema_version {version!r}")
    major_text = version.split(".", 1)[0]
    try:
        major = int(major_text)
    except ValueError:
        raise ValidationError(f"{path}: malformed schema_version {version!r}") from None
    if major != supported_major:
        raise ValidationError(
            f"{path}: unsupported schema major version {major} (supported: {supported_major})")
