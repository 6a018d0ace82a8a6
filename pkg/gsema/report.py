from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import pandas as pd

from .const import DOMAIN, FLOAT_FORMAT
from .effects import StudyEffect
from .meta import MetaResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True)
class ColumnDescription:
    key: str
    name: str
    value: Callable[[Any], Any] | None = None

    def read(self, row: Any) -> Any:
        return self.value(row) if self.value is not None else getattr(row, self.key)


def _joined(values: Iterable[float]) -> str:
    return ";".join(FLOAT_FORMAT % v for v in values)


RESULT_COLUMNS: list[ColumnDescription] = [
    ColumnDescription(key="pathway", name="pathway"),
    ColumnDescription(key="k_studies", name="k_studies"),
    ColumnDescription(key="ces", name="ces"),
    ColumnDescription(key="var_ces", name="var_ces"),
    ColumnDescription(key="tau2", name="tau2"),
    ColumnDescription(key="q", name="q"),
    ColumnDescription(key="i2", name="i2"),
    ColumnDescription(key="z", name="z"),
    ColumnDescription(key="p", name="pvalue"),
    ColumnDescription(key="fdr", name="fdr"),
    ColumnDescription(key="significant", name="significant"),
    ColumnDescription(key="study_ids", name="studies", value=lambda r: ";".join(r.study_ids)),
    ColumnDescription(key="per_study_g", name="per_study_g", value=lambda r: _joined(r.per_study_g)),
]

EFFECT_COLUMNS: list[ColumnDescription] = [
    ColumnDescription(key="study_id", name="study"),
    ColumnDescription(key="pathway", name="pathway"),
    ColumnDescription(key="t", name="t"),
    ColumnDescription(key="df", name="df"),
    ColumnDescription(key="p_value", name="pvalue"),
    ColumnDescription(key="d", name="d"),
    ColumnDescription(key="g", name="g"),
    ColumnDescription(key="j_factor", name="j_factor"),
    ColumnDescription(key="var_raw", name="var_raw"),
    ColumnDescription(key="n_e", name="n_e"),
    ColumnDescription(key="n_c", name="n_c"),
]


def frame_from(rows: Iterable[Any], columns: Sequence[ColumnDescription]) -> pd.DataFrame:
    records = [{c.name: c.read(row) for c in columns} for row in rows]
    return pd.DataFrame.from_records(records, columns=[c.name for c in columns])


def write_tsv(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_results_tsv(results: Sequence[MetaResult], path: str | Path) -> Path:
    return write_tsv(frame_from(results, RESULT_COLUMNS), path)


def write_effects_tsv(effects: Iterable[StudyEffect], path: str | Path) -> Path:
    return write_tsv(frame_from(effects, EFFECT_COLUMNS), path)


def save_json(data: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in (DOMAIN, "numpy", "pandas", "scipy", "voluptuous"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_run_metadata(
    path: str | Path,
    *,
    config: dict[str, Any],
    seed: int,
    timings: dict[str, float],
    outputs: Sequence[Path],
    extra: dict[str, Any] | None = None,
) -> Path:
    base = Path(path).parent
    record = {
        "config": config,
        "seed": seed,
        "versions": package_versions(),
        "timings_seconds": timings,
        "checksums": {_name(p, base): sha256_file(p) for p in outputs},
    }
    if extra:
        record.update(extra)
    logger.debug("run metadata with %d checksums", len(outputs))
    return save_json(record, path)


def _name(p: Path, base: Path) -> str:
    try:
        return str(Path(p).relative_to(base))
    except ValueError:
        return str(p)
