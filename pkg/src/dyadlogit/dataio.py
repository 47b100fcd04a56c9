"""Data ingestion, config parsing, and result serialization.

CSV layout: attribute tables have a header row whose first column is the
unit id; remaining columns are numeric or categorical.  The edge list has
columns consumer_id, product_id.  Configuration (feature maps, graphon
blocks, study settings) lives in a single TOML format.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .design import DyadDesign
from .errors import ConfigError, DataError
from .features import AttributeTable, FeatureMap, FeatureSpec
from .simulator import DiscreteSpec, GraphonConfig

RESULT_SCHEMA_VERSION = "result-v1"


# -- CSV ----------------------------------------------------------------------

def load_attribute_table(path: str | Path) -> AttributeTable:
    """Attribute CSV -> AttributeTable; columns where every value parses as
    a number become numeric, all others stay categorical."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 1:
            raise DataError(f"{path}: header row has no columns")
        ids: list[str] = []
        raw: list[list[str]] = [[] for _ in header[1:]]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            ids.append(row[0])
            for k, v in enumerate(row[1:]):
                raw[k].append(v)
    if len(set(ids)) != len(ids):
        counts: dict[str, int] = {}
        for u in ids:
            counts[u] = counts.get(u, 0) + 1
        dupes = sorted(u for u, c in counts.items() if c > 1)
        raise DataError(f"{path}: duplicate ids: {', '.join(dupes[:5])}")
    cols: dict[str, np.ndarray] = {}
    for name, values in zip(header[1:], raw):
        try:
            cols[name] = np.array([float(v) for v in values])
        except ValueError:
            cols[name] = np.array(values, dtype=str)
    return AttributeTable(ids, cols)


def load_edges(path: str | Path, consumers: AttributeTable,
               products: AttributeTable) -> np.ndarray:
    """Edge CSV -> (E, 2) index array; rejects unknown ids and duplicates."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        try:
            ci, pi = header.index("consumer_id"), header.index("product_id")
        except ValueError:
            raise DataError(f"{path}: header must contain consumer_id and product_id, "
                            f"got {header}") from None
        seen: dict[tuple[int, int], int] = {}
        edges: list[tuple[int, int]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i = consumers.index_of(row[ci])
            except KeyError:
                raise DataError(f"{path}:{lineno}: unknown consumer id {row[ci]!r}") from None
            try:
                j = products.index_of(row[pi])
            except KeyError:
                raise DataError(f"{path}:{lineno}: unknown product id {row[pi]!r}") from None
            if (i, j) in seen:
                raise DataError(f"{path}:{lineno}: duplicate edge ({row[ci]}, {row[pi]}), "
                                f"first seen on line {seen[(i, j)]}")
            seen[(i, j)] = lineno
            edges.append((i, j))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def write_attribute_table(path: str | Path, table: AttributeTable, id_header: str) -> None:
    names = list(table.columns)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([id_header] + names)
        for k, unit in enumerate(table.ids):
            writer.writerow([unit] + [_csv_cell(table.columns[c][k]) for c in names])


def write_edges(path: str | Path, design: DyadDesign) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["consumer_id", "product_id"])
        for i, j in zip(design.edge_i, design.edge_j):
            writer.writerow([design.consumer_attrs.ids[i], design.product_attrs.ids[j]])


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- TOML ---------------------------------------------------------------------

def _read_toml(path: str | Path) -> dict:
    try:
        with Path(path).open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _feature_map_from(tables: list[dict], where: str) -> FeatureMap:
    if not tables:
        raise ConfigError(f"{where}: no [[features]] blocks")
    specs = []
    for k, block in enumerate(tables):
        unknown = set(block) - {"name", "transform", "consumer_column", "product_column"}
        if unknown:
            raise ConfigError(f"{where}: feature #{k + 1} has unknown keys {sorted(unknown)}")
        try:
            specs.append(FeatureSpec(
                name=block["name"], transform=block["transform"],
                consumer_column=block.get("consumer_column"),
                product_column=block.get("product_column")))
        except KeyError as exc:
            raise ConfigError(f"{where}: feature #{k + 1} missing key {exc}") from None
    return FeatureMap(tuple(specs))


def load_feature_map(path: str | Path) -> FeatureMap:
    doc = _read_toml(path)
    return _feature_map_from(doc.get("features", []), str(path))


def write_feature_map(path: str | Path, feature_map: FeatureMap) -> None:
    lines = []
    for s in feature_map.specs:
        lines.append("[[features]]")
        lines.append(f'name = "{s.name}"')
        lines.append(f'transform = "{s.transform}"')
        if s.consumer_column:
            lines.append(f'consumer_column = "{s.consumer_column}"')
        if s.product_column:
            lines.append(f'product_column = "{s.product_column}"')
        lines.append("")
    Path(path).write_text("\n".join(lines))


def _discrete_specs(tables: list[dict], where: str) -> tuple[DiscreteSpec, ...]:
    out = []
    for k, block in enumerate(tables):
        try:
            out.append(DiscreteSpec(name=block["name"], values=tuple(block["values"]),
                                    probs=tuple(block["probs"])))
        except KeyError as exc:
            raise ConfigError(f"{where} #{k + 1}: missing key {exc}") from None
    return tuple(out)


@dataclass
class StudyConfig:
    """One declarative file drives everything: either observed-data paths or
    a graphon block, plus fit/study settings."""

    graphon: GraphonConfig | None
    data_paths: dict | None
    feature_map: FeatureMap
    level: float
    seed: int
    n_grid: list[int]
    replications: int
    threads: int
    aggregate_x: dict | None
    simulate_n: int | None


def load_study_config(path: str | Path) -> StudyConfig:
    doc = _read_toml(path)
    where = str(path)
    feature_map = _feature_map_from(doc.get("features", []), where)

    graphon = None
    if "graphon" in doc:
        g = doc["graphon"]
        try:
            graphon = GraphonConfig(
                alpha0=float(g["alpha0"]), beta0=tuple(g["beta0"]), phi=float(g["phi"]),
                rho_a=float(g.get("rho_a", 0.0)), rho_b=float(g.get("rho_b", 0.0)),
                consumer_attrs=_discrete_specs(g.get("consumer_attrs", []),
                                               f"{where} [[graphon.consumer_attrs]]"),
                product_attrs=_discrete_specs(g.get("product_attrs", []),
                                              f"{where} [[graphon.product_attrs]]"),
                feature_map=feature_map)
        except KeyError as exc:
            raise ConfigError(f"{where}: [graphon] missing key {exc}") from None

    data_paths = None
    if "data" in doc:
        d = doc["data"]
        missing = {"edges", "consumers", "products"} - set(d)
        if missing:
            raise ConfigError(f"{where}: [data] missing {sorted(missing)}")
        base = Path(path).parent
        data_paths = {k: str(base / d[k]) for k in ("edges", "consumers", "products")}

    if (graphon is None) == (data_paths is None):
        raise ConfigError(f"{where}: exactly one of [graphon] or [data] must be present")

    study = doc.get("study", {})
    mc = doc.get("mc", {})
    sim = doc.get("simulate", {})
    return StudyConfig(
        graphon=graphon,
        data_paths=data_paths,
        feature_map=feature_map,
        level=float(study.get("level", 0.95)),
        seed=int(study.get("seed", 0)),
        n_grid=[int(v) for v in mc.get("n_grid", [])],
        replications=int(mc.get("replications", 0)),
        threads=int(mc.get("threads", 1)),
        aggregate_x=dict(mc["aggregate_x"]) if "aggregate_x" in mc else None,
        simulate_n=int(sim["n"]) if "n" in sim else None,
    )


def load_design(edges_csv, consumers_csv, products_csv, features_toml) -> DyadDesign:
    """Validated design from the four on-disk pieces."""
    consumers = load_attribute_table(consumers_csv)
    products = load_attribute_table(products_csv)
    feature_map = load_feature_map(features_toml)
    edges = load_edges(edges_csv, consumers, products)
    return DyadDesign(consumers, products, feature_map, edges)


# -- results ------------------------------------------------------------------

def jsonable(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def dump_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n")


def config_digest(obj) -> str:
    return hashlib.sha256(
        json.dumps(jsonable(obj), sort_keys=True).encode()).hexdigest()[:16]


def write_csv_rows(path: str | Path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    names = list(rows[0])
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(v) if isinstance(v, float) else v
                             for k, v in row.items()})


def mc_coefficient_rows(report) -> list[dict]:
    """Flat per-(n, mode, coordinate) rows for plotting."""
    rows = []
    for cell in report.cells:
        p = len(cell["theta0_n"])
        names = ["alpha_n"] + [f"beta{k}" for k in range(1, p)]
        for mode, block in cell["modes"].items():
            for k in range(p):
                rows.append({
                    "n": cell["n"], "mode": mode, "coord": names[k],
                    "theta0": cell["theta0_n"][k],
                    "bias": cell["estimates"]["bias"][k],
                    "empirical_sd": cell["estimates"]["empirical_sd"][k],
                    "rmse": cell["estimates"]["rmse"][k],
                    "mean_se": block["mean_se"][k],
                    "coverage": block["coverage"][k],
                })
    return rows


def mc_effect_rows(report) -> list[dict]:
    rows = []
    for cell in report.cells:
        if "ape" in cell:
            for k, (m, ev, mv) in enumerate(zip(cell["ape"]["mean"],
                                                cell["ape"]["empirical_var"],
                                                cell["ape"]["mean_estimated_var"])):
                rows.append({"n": cell["n"], "effect": f"ape_beta{k + 1}", "mean": m,
                             "empirical_var": ev, "mean_estimated_var": mv})
        if "aggregate" in cell:
            agg = cell["aggregate"]
            rows.append({"n": cell["n"], "effect": "aggregate", "mean": agg["mean"],
                         "empirical_var": agg["empirical_sd"] ** 2,
                         "mean_estimated_var": agg["mean_se"] ** 2})
    return rows
