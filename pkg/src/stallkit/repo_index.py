"""Repository scanning and the precomputed cross-file symbol index."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .analyzer import ClassSummary, Diagnostic, SourceFile, parse_method_signature, recover_file
from .errors import DuplicateSymbol, EmptyRepository, SubjectSyntaxError, UnknownImport

SOURCE_SUFFIX = ".sub"
MANIFEST = "repo.json"


@dataclass(frozen=True)
class RepoSnapshot:
    root: str
    files: tuple[SourceFile, ...]
    name: str = ""

    def __post_init__(self):
        ordered = tuple(sorted(self.files, key=lambda f: f.path))
        paths = [f.path for f in ordered]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate file paths in snapshot")
        object.__setattr__(self, "files", ordered)

    def file(self, path: str) -> SourceFile:
        for f in self.files:
            if f.path == path:
                return f
        raise KeyError(path)


def load_repo(root: str | Path) -> RepoSnapshot:
    """Read every ``*.sub`` file under ``root`` (paths relative, POSIX style)."""
    root = Path(root)
    files = []
    for p in sorted(root.rglob(f"*{SOURCE_SUFFIX}")):
        if any(part.startswith(".") for part in p.relative_to(root).parts):
            continue
        files.append(SourceFile(p.relative_to(root).as_posix(), p.read_text(encoding="utf-8")))
    name = root.name
    manifest = root / MANIFEST
    if manifest.exists():
        name = json.loads(manifest.read_text(encoding="utf-8")).get("name", name)
    return RepoSnapshot(str(root), tuple(files), name)


@dataclass
class SymbolIndex:
    """Qualified class name -> summary, plus what is needed to type member
    chains that cross files (each file's imports and package)."""

    modules: dict[str, ClassSummary] = field(default_factory=dict)
    file_of: dict[str, str] = field(default_factory=dict)
    build_time: float = 0.0
    skipped: dict[str, tuple[Diagnostic, ...]] = field(default_factory=dict)
    diagnostics: dict[str, tuple[Diagnostic, ...]] = field(default_factory=dict)
    imports_of: dict[str, tuple[str, ...]] = field(default_factory=dict)
    package_of: dict[str, str | None] = field(default_factory=dict)

    def structure(self) -> dict:
        """Everything except build_time, in a JSON-ready form."""
        return {
            "modules": {q: _summary_to_json(s) for q, s in sorted(self.modules.items())},
            "file_of": dict(sorted(self.file_of.items())),
            "skipped": {p: [list(d) for d in ds] for p, ds in sorted(self.skipped.items())},
            "diagnostics": {p: [list(d) for d in ds] for p, ds in sorted(self.diagnostics.items())},
            "imports_of": {p: list(v) for p, v in sorted(self.imports_of.items())},
            "package_of": dict(sorted(self.package_of.items())),
        }

    def to_json(self, *, include_build_time: bool = True) -> str:
        data = self.structure()
        if include_build_time:
            data["build_time"] = self.build_time
        return json.dumps(data, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SymbolIndex":
        data = json.loads(text)
        return cls(
            modules={q: _summary_from_json(s) for q, s in data["modules"].items()},
            file_of=dict(data["file_of"]),
            build_time=float(data.get("build_time", 0.0)),
            skipped={p: tuple(Diagnostic(*d) for d in ds) for p, ds in data.get("skipped", {}).items()},
            diagnostics={p: tuple(Diagnostic(*d) for d in ds) for p, ds in data.get("diagnostics", {}).items()},
            imports_of={p: tuple(v) for p, v in data.get("imports_of", {}).items()},
            package_of=dict(data.get("package_of", {})),
        )


def _summary_to_json(s: ClassSummary) -> dict:
    return {
        "name": s.name,
        "signature": s.signature,
        "fields": [[n, t] for n, t in zip(s.field_names, s.field_types)],
        "methods": [m.rendered for m in s.methods],
    }


def _summary_from_json(d: dict) -> ClassSummary:
    fields = d.get("fields", [])
    return ClassSummary(
        d["name"],
        d["signature"],
        tuple(n for n, _ in fields),
        tuple(t for _, t in fields),
        tuple(parse_method_signature(r) for r in d.get("methods", [])),
    )


def _parse_one(f: SourceFile):
    try:
        outline, summary = recover_file(f)
    except SubjectSyntaxError as err:
        return f, None, None, (Diagnostic(err.position, str(err)),)
    return f, outline, summary, tuple(outline.diagnostics)


def build_index(repo: RepoSnapshot, *, jobs: int = 1) -> SymbolIndex:
    """Parse every file of ``repo`` and collect its class declarations.

    Files whose header does not parse are recorded in ``skipped``; body
    errors are recovered from and kept in ``diagnostics``.
    """
    if not repo.files:
        raise EmptyRepository(f"no {SOURCE_SUFFIX} files under {repo.root}")
    t0 = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parsed = list(pool.map(_parse_one, repo.files))
    else:
        parsed = [_parse_one(f) for f in repo.files]
    index = SymbolIndex()
    for f, outline, summary, diags in parsed:
        if outline is None:
            index.skipped[f.path] = diags
            continue
        if diags:
            index.diagnostics[f.path] = diags
        index.imports_of[f.path] = tuple(q for q, _ in outline.imports)
        index.package_of[f.path] = outline.package
        for cls in summary.classes:
            qname = f"{outline.package}.{cls.name}" if outline.package else cls.name
            if qname in index.modules:
                raise DuplicateSymbol(qname, index.file_of[qname], f.path)
            index.modules[qname] = cls
            index.file_of[qname] = f.path
    index.build_time = time.perf_counter() - t0
    return index


def resolve_import(index: SymbolIndex, qname: str) -> ClassSummary:
    """Summary for ``qname``; raises :class:`UnknownImport` otherwise.

    When a file in the index looks like it should have declared ``qname``
    (same package, class name matches the file stem) its diagnostics are
    attached to the error.
    """
    if qname in index.modules:
        return index.modules[qname]
    package, _, simple = qname.rpartition(".")
    diags: tuple[Diagnostic, ...] = ()
    for path in sorted(set(index.package_of) | set(index.skipped)):
        if Path(path).stem == simple and index.package_of.get(path, package) == package:
            diags += index.diagnostics.get(path, ()) + index.skipped.get(path, ())
    raise UnknownImport(qname, diags)


__all__ = [
    "RepoSnapshot",
    "SymbolIndex",
    "load_repo",
    "build_index",
    "resolve_import",
]
