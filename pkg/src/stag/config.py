"""Minimal TOML-subset config parsing and pipeline configuration.

Supports the subset the pipeline config needs: ``[section]`` headers,
string / integer / float / boolean values, flat string arrays, and ``#``
comments. (The runtime targets Python 3.10, which has no stdlib TOML
reader.)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.\-]+)\]$")
_KEY_RE = re.compile(r"^([A-Za-z0-9_\-]+)\s*=\s*(.+)$")


def _parse_value(raw: str, where: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(x, where) for x in inner.split(",")]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    raise ConfigError(f"{where}: cannot parse value {raw!r}")


def parse_toml(text: str, where: str = "<config>") -> dict:
    """Parse the supported TOML subset into nested dicts."""
    root: dict = {}
    section = root
    for line_no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "#" in stripped and not stripped.startswith('"'):
            # Strip trailing comments outside quoted strings.
            quote_count = 0
            cut = len(stripped)
            for i, ch in enumerate(stripped):
                if ch == '"':
                    quote_count += 1
                elif ch == "#" and quote_count % 2 == 0:
                    cut = i
                    break
            stripped = stripped[:cut].strip()
            if not stripped:
                continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = root.setdefault(m.group(1), {})
            continue
        m = _KEY_RE.match(stripped)
        if not m:
            raise ConfigError(f"{where}:{line_no}: cannot parse line {line!r}")
        section[m.group(1)] = _parse_value(m.group(2), f"{where}:{line_no}")
    return root


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_toml(path.read_text(encoding="utf-8"), str(path))


@dataclass
class PipelineConfig:
    """Validated pipeline configuration with spec-stated defaults."""

    corpus: Path
    venue_kb: Path
    institution_registry: Path
    venue_labels: Path
    snapshot_dir: Path
    release_id: str
    stage_dir: Path | None = None
    dedup_threshold: float = 0.8
    dedup_min_positives: int = 50
    dedup_model_path: Path | None = None
    citelink_threshold: float = 0.7
    author_threshold: float = 0.75
    author_scorer_path: Path | None = None
    affiliation_threshold: float = 0.5
    embedding_dim: int = 256
    seed: int = 0
    now: str = ""
    workers: int = 1
    api_keys: list[str] = field(default_factory=list)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        raw = load_toml(path)
        base = Path(path).parent

        def need(section: str, key: str) -> str:
            try:
                return raw[section][key]
            except KeyError:
                raise ConfigError(f"{path}: missing required key [{section}] {key}")

        def optional(section: str, key: str, default):
            return raw.get(section, {}).get(key, default)

        def path_of(value: str) -> Path:
            p = Path(value)
            return p if p.is_absolute() else base / p

        config = cls(
            corpus=path_of(need("input", "corpus")),
            venue_kb=path_of(need("input", "venue_kb")),
            institution_registry=path_of(need("input", "institution_registry")),
            venue_labels=path_of(need("input", "venue_labels")),
            snapshot_dir=path_of(need("output", "snapshot_dir")),
            release_id=str(need("output", "release_id")),
            stage_dir=(
                path_of(optional("output", "stage_dir", ""))
                if optional("output", "stage_dir", "")
                else None
            ),
            dedup_threshold=float(optional("dedup", "threshold", 0.8)),
            dedup_min_positives=int(optional("dedup", "min_positives", 50)),
            dedup_model_path=(
                path_of(optional("dedup", "model_path", ""))
                if optional("dedup", "model_path", "")
                else None
            ),
            citelink_threshold=float(optional("citelink", "threshold", 0.7)),
            author_threshold=float(optional("authors", "threshold", 0.75)),
            author_scorer_path=(
                path_of(optional("authors", "scorer_path", ""))
                if optional("authors", "scorer_path", "")
                else None
            ),
            affiliation_threshold=float(optional("affiliation", "threshold", 0.5)),
            embedding_dim=int(optional("embedding", "dim", 256)),
            seed=int(optional("run", "seed", 0)),
            now=str(optional("run", "now", "")),
            workers=int(optional("run", "workers", 1)),
            api_keys=[str(k) for k in optional("service", "api_keys", [])],
        )
        for name, p in [
            ("corpus", config.corpus),
            ("venue_kb", config.venue_kb),
            ("institution_registry", config.institution_registry),
            ("venue_labels", config.venue_labels),
        ]:
            if not p.exists():
                raise ConfigError(f"{path}: input {name} does not exist: {p}")
        if config.workers < 1:
            raise ConfigError("workers must be >= 1")
        if config.embedding_dim < 16:
            raise ConfigError("embedding dim must be >= 16")
        return config
