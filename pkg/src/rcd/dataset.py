"""Corpus scanning and JSON-Lines manifests."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, ParseError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png"}
# Market1501: <pid>_c<cam>s<seq>_<frame>_<bbox>.jpg; junk images use pid -1
MARKET_NAME = re.compile(r"^(-?\d+)_c(\d+)")
_BASE_KEYS = ("path", "identity", "camera")


@dataclass(frozen=True)
class SampleRecord:
    path: str
    identity: int
    camera: int
    index: int = 0
    meta: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        if self.identity < -1:
            raise ValueError(f"identity must be >= -1, got {self.identity}")
        if self.camera < 0:
            raise ValueError(f"camera must be >= 0, got {self.camera}")

    @property
    def distractor(self) -> bool:
        """Junk (-1) and background (0) identities; skipped by sampling, ignored as positives."""
        return self.identity < 1

    def to_json(self) -> str:
        obj = {"path": self.path, "identity": self.identity, "camera": self.camera}
        if self.distractor:
            obj["distractor"] = True
        for key in sorted(self.meta):
            obj[key] = self.meta[key]
        return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class Manifest:
    records: tuple[SampleRecord, ...]
    skipped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        paths = [r.path for r in self.records]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate paths in manifest")

    @property
    def identities(self) -> int:
        return len({r.identity for r in self.records})

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_identity(self, include_distractors: bool = False) -> dict[int, list[SampleRecord]]:
        groups: dict[int, list[SampleRecord]] = {}
        for r in self.records:
            if r.distractor and not include_distractors:
                continue
            groups.setdefault(r.identity, []).append(r)
        return groups


def parse_market_name(name: str) -> tuple[int, int] | None:
    m = MARKET_NAME.match(name)
    if m is None:
        return None
    return int(m.group(1)), int(m.group(2))


def scan_market_layout(directory) -> Manifest:
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"not a directory: {directory}")
    records, skipped = [], []
    for path in sorted(directory.iterdir(), key=lambda p: p.name):
        if not path.is_file() or path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        parsed = parse_market_name(path.name)
        if parsed is None or parsed[0] < -1:
            log.warning("skipping unparseable file name %s", path.name)
            skipped.append(str(path))
            continue
        pid, cam = parsed
        records.append(SampleRecord(str(path), pid, cam, len(records)))
    if not records:
        raise EmptyCorpus(f"no parseable images in {directory}")
    return Manifest(records, tuple(skipped))


def _int_field(obj, key, lineno, path):
    value = obj.get(key)
    if type(value) is not int:
        raise ParseError(f"field {key!r} must be an integer, got {value!r}", lineno, path)
    return value


def parse_manifest_lines(lines, path=None) -> Manifest:
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", lineno, path)
        if not isinstance(obj.get("path"), str):
            raise ParseError("field 'path' must be a string", lineno, path)
        identity = _int_field(obj, "identity", lineno, path)
        camera = _int_field(obj, "camera", lineno, path)
        meta = {k: v for k, v in obj.items() if k not in _BASE_KEYS and k != "distractor"}
        try:
            records.append(SampleRecord(obj["path"], identity, camera, len(records), meta))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, path) from None
    try:
        return Manifest(records)
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def load_manifest(path) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest_lines(fh, path=str(path))


def dumps_manifest(manifest: Manifest) -> str:
    return "".join(r.to_json() + "\n" for r in manifest.records)


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_manifest(manifest))
