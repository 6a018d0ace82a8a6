"""Readers and writers for expression matrices, class labels, GMT catalogs and manifests."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Protocol, Sequence

import numpy as np
import pandas as pd

from .const import CASE_TOKEN, CONTROL_TOKEN, FLOAT_FORMAT
from .errors import (
    DataError,
    DegenerateDesign,
    DuplicateGene,
    DuplicateSet,
    EmptyInput,
    GsemaError,
    IoError,
    MissingLabel,
    ParseError,
)

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["study_id", "expression_path", "labels_path"]


class Group(Enum):
    EXPERIMENTAL = CASE_TOKEN
    CONTROL = CONTROL_TOKEN


@dataclass(frozen=True, eq=False)
class ExpressionMatrix:
    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    values: np.ndarray
    study_id: str = ""

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape != (len(self.gene_ids), len(self.sample_ids)):
            raise DataError(
                f"matrix shape {values.shape} does not match {len(self.gene_ids)} genes x {len(self.sample_ids)} samples",
                study_id=self.study_id or None,
            )
        _check_unique(self.gene_ids, DuplicateGene, self.study_id)
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ParseError("duplicate sample ids", study_id=self.study_id or None)
        if not np.all(np.isfinite(values)):
            raise ParseError("non-finite expression value", study_id=self.study_id or None)
        values.setflags(write=False)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "values", values)

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.gene_ids), columns=list(self.sample_ids))


@dataclass(frozen=True, eq=False)
class ClassLabels:
    sample_ids: tuple[str, ...]
    is_case: np.ndarray

    def __post_init__(self) -> None:
        is_case = np.array(self.is_case, dtype=bool)
        if is_case.shape != (len(self.sample_ids),):
            raise DataError("label vector does not match sample count")
        n_e = int(is_case.sum())
        n_c = int(is_case.size - n_e)
        if n_e < 2 or n_c < 2:
            raise DegenerateDesign(f"need at least 2 samples per group, got {n_e} case and {n_c} control")
        is_case.setflags(write=False)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "is_case", is_case)

    @property
    def n_e(self) -> int:
        return int(self.is_case.sum())

    @property
    def n_c(self) -> int:
        return int(self.is_case.size - self.is_case.sum())

    @property
    def assignments(self) -> dict[str, Group]:
        return {
            sample: Group.EXPERIMENTAL if case else Group.CONTROL
            for sample, case in zip(self.sample_ids, self.is_case)
        }

    def mask_for(self, sample_ids: Sequence[str]) -> np.ndarray:
        if tuple(sample_ids) == self.sample_ids:
            return np.array(self.is_case)
        lookup = dict(zip(self.sample_ids, self.is_case))
        mask = []
        for sample in sample_ids:
            if sample not in lookup:
                raise MissingLabel(sample)
            mask.append(lookup[sample])
        return np.array(mask, dtype=bool)

    def swapped(self) -> ClassLabels:
        return ClassLabels(self.sample_ids, ~self.is_case)

    def with_assignment(self, is_case: np.ndarray) -> ClassLabels:
        return ClassLabels(self.sample_ids, is_case)


@dataclass(frozen=True)
class GeneSet:
    name: str
    description: str
    genes: tuple[str, ...]


@dataclass(frozen=True)
class GeneSetCollection:
    sets: tuple[GeneSet, ...]
    duplicate_genes: int = 0

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for gene_set in self.sets:
            if gene_set.name in seen:
                raise DuplicateSet(gene_set.name)
            if not gene_set.genes:
                raise DataError(f"gene set {gene_set.name!r} is empty")
            seen.add(gene_set.name)

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self) -> Iterator[GeneSet]:
        return iter(self.sets)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.sets]

    def get(self, name: str) -> GeneSet | None:
        return next((s for s in self.sets if s.name == name), None)


class SampleAxis(Protocol):
    @property
    def sample_ids(self) -> tuple[str, ...]: ...


@dataclass(frozen=True)
class ManifestEntry:
    study_id: str
    expression_path: Path
    labels_path: Path
    # scoring method of a score manifest written by ``gsema score``
    method: str | None = None


@dataclass(frozen=True)
class StudyManifest:
    entries: tuple[ManifestEntry, ...]
    gmt_path: Path | None = None
    config_path: Path | None = None

    @property
    def k(self) -> int:
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class Study:
    study_id: str
    matrix: ExpressionMatrix
    labels: ClassLabels


def _check_unique(ids: Sequence[str], error: type[DataError], study_id: str = "") -> None:
    seen: set[str] = set()
    for ident in ids:
        if ident in seen:
            raise error(ident, study_id=study_id or None)
        seen.add(ident)


def _read_table(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    try:
        return pd.read_csv(
            path,
            sep="\t",
            header=None,
            dtype=str,
            keep_default_na=False,
            quoting=csv.QUOTE_NONE,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise EmptyInput(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"{path}: ragged row ({e})") from e
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not utf-8") from e


def parse_expression_tsv(path: str | Path, study_id: str = "", id_header: str | None = None) -> ExpressionMatrix:
    """Read a genes x samples TSV.

    Rows and columns of ``ParseError`` are 1-based data coordinates: row 1 is
    the first gene row, column 1 the first sample column.
    """
    path = Path(path)
    frame = _read_table(path)
    if frame.shape[0] < 2 or frame.shape[1] < 2:
        raise EmptyInput(f"{path} has no expression values", study_id=study_id or None)

    header = frame.iloc[0].tolist()
    if id_header is not None and str(header[0]).strip() != id_header:
        raise ParseError(
            f"{path}: first header cell is {header[0]!r}, expected {id_header!r}",
            row=0,
            column=0,
            study_id=study_id or None,
        )
    sample_ids = [str(s) for s in header[1:]]
    body = frame.iloc[1:]

    ragged = body.isna().any(axis=1).to_numpy()
    if ragged.any():
        row = int(np.flatnonzero(ragged)[0]) + 1
        raise ParseError(f"{path}: ragged row {row}", row=row, study_id=study_id or None)

    gene_ids = [str(g) for g in body.iloc[:, 0]]
    _check_unique(gene_ids, DuplicateGene, study_id)

    cells = body.iloc[:, 1:].to_numpy(dtype=object)
    try:
        values = np.asarray(cells, dtype=np.float64)
    except ValueError:
        values = None
    if values is None or not np.all(np.isfinite(values)):
        row, column = _first_bad_cell(cells)
        raise ParseError(
            f"{path}: non-numeric or non-finite value {cells[row - 1, column - 1]!r} at row {row}, column {column}",
            row=row,
            column=column,
            study_id=study_id or None,
        )

    return ExpressionMatrix(tuple(gene_ids), tuple(sample_ids), values, study_id)


def _first_bad_cell(cells: np.ndarray) -> tuple[int, int]:
    for i in range(cells.shape[0]):
        for j in range(cells.shape[1]):
            try:
                value = float(cells[i, j])
            except ValueError:
                return i + 1, j + 1
            if not np.isfinite(value):
                return i + 1, j + 1
    return 0, 0


def write_expression_tsv(matrix: ExpressionMatrix, path: str | Path, id_header: str = "gene_id") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix.to_frame().to_csv(
        path,
        sep="\t",
        index_label=id_header,
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
        quoting=csv.QUOTE_NONE,
    )
    return path


def parse_gmt(path: str | Path) -> GeneSetCollection:
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not utf-8") from e

    sets: list[GeneSet] = []
    names: set[str] = set()
    duplicates = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise ParseError(f"{path}: line {lineno} has fewer than 3 fields", row=lineno)
        name = fields[0].strip()
        if not name:
            raise ParseError(f"{path}: line {lineno} has no set name", row=lineno)
        if name in names:
            raise DuplicateSet(name)

        genes: list[str] = []
        seen: set[str] = set()
        for gene in (g.strip() for g in fields[2:]):
            if not gene:
                continue
            if gene in seen:
                duplicates += 1
                continue
            seen.add(gene)
            genes.append(gene)
        if not genes:
            raise ParseError(f"{path}: gene set {name!r} on line {lineno} is empty", row=lineno)

        names.add(name)
        sets.append(GeneSet(name, fields[1].strip(), tuple(genes)))

    if not sets:
        raise EmptyInput(f"{path} holds no gene sets")
    if duplicates:
        logger.warning("removed %d duplicate genes while reading %s", duplicates, path.name)
    return GeneSetCollection(tuple(sets), duplicates)


def write_gmt(collection: GeneSetCollection, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for gene_set in collection:
            out.write("\t".join([gene_set.name, gene_set.description or "na", *gene_set.genes]) + "\n")
    return path


def parse_labels(path: str | Path, matrix: SampleAxis) -> ClassLabels:
    path = Path(path)
    frame = _read_table(path)
    if frame.shape[1] != 2:
        raise ParseError(f"{path}: expected 2 columns (sample_id, class), found {frame.shape[1]}")

    rows = frame.to_numpy(dtype=object).tolist()
    if rows and str(rows[0][0]).strip().lower() == "sample_id":
        rows = rows[1:]
        offset = 2
    else:
        offset = 1

    known = set(matrix.sample_ids)
    lookup: dict[str, bool] = {}
    for lineno, (sample, token) in enumerate(rows, start=offset):
        if not isinstance(sample, str) or not isinstance(token, str):
            raise ParseError(f"{path}: line {lineno} is incomplete", row=lineno)
        sample = sample.strip()
        token = token.strip().lower()
        if token not in (CASE_TOKEN, CONTROL_TOKEN):
            raise ParseError(f"{path}: unknown class {token!r} on line {lineno}", row=lineno)
        if sample not in known:
            raise ParseError(f"{path}: sample {sample!r} on line {lineno} is not in the matrix", row=lineno)
        if sample in lookup:
            raise ParseError(f"{path}: sample {sample!r} labelled twice", row=lineno)
        lookup[sample] = token == CASE_TOKEN

    for sample in matrix.sample_ids:
        if sample not in lookup:
            raise MissingLabel(sample)

    return ClassLabels(matrix.sample_ids, np.array([lookup[s] for s in matrix.sample_ids], dtype=bool))


def write_labels_tsv(labels: ClassLabels, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "sample_id": list(labels.sample_ids),
            "class": [CASE_TOKEN if c else CONTROL_TOKEN for c in labels.is_case],
        }
    )
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n")
    return path


def _load_study(entry: ManifestEntry) -> Study:
    try:
        for p in (entry.expression_path, entry.labels_path):
            if not p.is_file():
                raise IoError(f"no such file: {p}")
        matrix = parse_expression_tsv(entry.expression_path, study_id=entry.study_id)
        labels = parse_labels(entry.labels_path, matrix)
    except GsemaError as e:
        raise e.for_study(entry.study_id)
    logger.info(
        "loaded %s: %d genes, %d case, %d control",
        entry.study_id, matrix.n_genes, labels.n_e, labels.n_c,
    )
    return Study(entry.study_id, matrix, labels)


def read_manifest(path: str | Path, gmt_path: str | Path | None = None, config_path: str | Path | None = None) -> StudyManifest:
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such manifest: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, quoting=csv.QUOTE_NONE, comment="#")
    except pd.errors.EmptyDataError as e:
        raise EmptyInput(f"manifest {path} is empty") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"manifest {path}: {e}") from e

    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"manifest {path} lacks columns: {', '.join(missing)}")
    if frame.empty:
        raise EmptyInput(f"manifest {path} lists no studies")

    base = path.parent
    entries = []
    for row in frame.itertuples(index=False):
        study_id = str(row.study_id).strip()
        entries.append(
            ManifestEntry(
                study_id=study_id,
                expression_path=base / str(row.expression_path).strip(),
                labels_path=base / str(row.labels_path).strip(),
                method=str(getattr(row, "method", "")).strip().lower() or None,
            )
        )
    ids = [e.study_id for e in entries]
    if len(set(ids)) != len(ids) or "" in ids:
        raise ParseError(f"manifest {path} has empty or duplicate study ids")

    return StudyManifest(
        tuple(entries),
        Path(gmt_path) if gmt_path is not None else None,
        Path(config_path) if config_path is not None else None,
    )


def load_manifest(
    path: str | Path,
    gmt_path: str | Path | None = None,
    config_path: str | Path | None = None,
    threads: int = 1,
) -> tuple[StudyManifest, list[Study]]:
    manifest = read_manifest(path, gmt_path, config_path)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        studies = list(pool.map(_load_study, manifest.entries))
    return manifest, studies


def write_manifest(entries: Sequence[ManifestEntry], path: str | Path) -> Path:
    path = Path(path)
    base = path.parent
    frame = pd.DataFrame(
        {
            "study_id": [e.study_id for e in entries],
            "expression_path": [_relative(e.expression_path, base) for e in entries],
            "labels_path": [_relative(e.labels_path, base) for e in entries],
        }
    )
    if any(e.method is not None for e in entries):
        frame["method"] = [e.method or "" for e in entries]
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n")
    return path


def _relative(p: Path, base: Path) -> str:
    try:
        return str(Path(p).relative_to(base))
    except ValueError:
        return str(p)
