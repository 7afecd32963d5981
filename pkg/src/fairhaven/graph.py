"""Metadata graph: custom-schema models, records, relationships, file links.

Records validate against their model on every write, relationships are bare
named edges between records of the same dataset, and file links may only
point at live file nodes. ``serialize_graph`` flattens the whole graph into
a byte-deterministic set of tabular files (one CSV per model + edge tables +
a schema manifest) and ``parse_serialized`` is its exact inverse.

CSV notes: RFC-4180 quoting with CRLF row endings, rows sorted by id. An
absent optional value is an empty cell; a present-but-empty string is a
quoted empty cell (``""``) so the round trip can tell them apart.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date

from .core import CoreStore
from .errors import (
    CrossDataset,
    InvalidSchema,
    NameConflict,
    NotFound,
    SchemaViolation,
    TypeMismatch,
    UnknownModel,
    UnknownProperty,
)
from .ids import new_id

PROPERTY_TYPES = ("string", "integer", "number", "boolean", "date", "enum")

_SLUG_RE = re.compile(r"[^a-z0-9_]+")


def slugify(name: str) -> str:
    slug = _SLUG_RE.sub("_", name.strip().lower().replace(" ", "_")).strip("_")
    return slug or "model"


@dataclass
class PropertySpec:
    name: str
    type: str
    required: bool = False
    values: list[str] = field(default_factory=list)  # enum only

    def to_dict(self) -> dict:
        out: dict = {"name": self.name, "type": self.type, "required": self.required}
        if self.type == "enum":
            out["values"] = list(self.values)
        return out


@dataclass
class ModelSchema:
    id: str
    dataset_id: str
    name: str
    properties: list[PropertySpec]

    @property
    def slug(self) -> str:
        return slugify(self.name)

    def property(self, name: str) -> PropertySpec | None:
        return next((p for p in self.properties if p.name == name), None)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "name": self.name,
            "properties": [p.to_dict() for p in self.properties],
        }


@dataclass
class Record:
    id: str
    model_id: str
    values: dict
    file_links: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "model_id": self.model_id,
            "values": dict(self.values),
            "file_links": sorted(self.file_links),
        }


@dataclass
class Relationship:
    id: str
    dataset_id: str
    name: str
    from_record: str
    to_record: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "name": self.name,
            "from_record": self.from_record,
            "to_record": self.to_record,
        }


# -- value validation -------------------------------------------------------------


def _value_ok(spec: PropertySpec, value) -> bool:
    if spec.type == "string":
        return isinstance(value, str)
    if spec.type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if spec.type == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if spec.type == "boolean":
        return isinstance(value, bool)
    if spec.type == "date":
        if not isinstance(value, str):
            return False
        try:
            date.fromisoformat(value)
            return True
        except ValueError:
            return False
    if spec.type == "enum":
        return isinstance(value, str) and value in spec.values
    return False


# -- RFC-4180 (hand-rolled so absent vs empty-string cells stay distinct) ----------


def _csv_cell(text: str | None, force_quote: bool = False) -> str:
    if text is None:
        return ""
    if force_quote or text == "" or any(ch in text for ch in (",", '"', "\r", "\n")):
        return '"' + text.replace('"', '""') + '"'
    return text


def csv_bytes(rows: list[list[str | None]]) -> bytes:
    return "".join(",".join(_csv_cell(cell) for cell in row) + "\r\n" for row in rows).encode("utf-8")


def parse_csv(data: bytes) -> tuple[list[str], list[list[str | None]]]:
    """Parse RFC-4180 bytes; unquoted empty cells come back as None."""
    text = data.decode("utf-8")
    rows: list[list[str | None]] = []
    cell: list[str] = []
    row: list[str | None] = []
    quoted = was_quoted = False
    i = 0
    n = len(text)

    def flush_cell() -> None:
        nonlocal was_quoted
        value = "".join(cell)
        row.append(value if (value or was_quoted) else None)
        cell.clear()
        was_quoted = False

    while i < n:
        ch = text[i]
        if quoted:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    cell.append('"')
                    i += 2
                    continue
                quoted = False
            else:
                cell.append(ch)
        elif ch == '"':
            quoted = True
            was_quoted = True
        elif ch == ",":
            flush_cell()
        elif ch == "\r" and i + 1 < n and text[i + 1] == "\n":
            flush_cell()
            rows.append(list(row))
            row.clear()
            i += 1
        elif ch == "\n":
            flush_cell()
            rows.append(list(row))
            row.clear()
        else:
            cell.append(ch)
        i += 1
    if cell or row:
        flush_cell()
        rows.append(list(row))
    if not rows:
        return [], []
    header = [c or "" for c in rows[0]]
    return header, rows[1:]


def _render_value(spec: PropertySpec, value) -> str | None:
    if value is None:
        return None
    if spec.type == "boolean":
        return "true" if value else "false"
    if spec.type in ("integer", "number"):
        return repr(value) if isinstance(value, float) else str(value)
    return str(value)


_INT_RE = re.compile(r"^-?\d+$")


def _parse_value(spec: PropertySpec, cell: str | None):
    if cell is None:
        return None
    if spec.type == "boolean":
        if cell not in ("true", "false"):
            raise ValueError(f"bad boolean cell {cell!r}")
        return cell == "true"
    if spec.type == "integer":
        return int(cell)
    if spec.type == "number":
        return int(cell) if _INT_RE.match(cell) else float(cell)
    return cell  # string / date / enum stay textual


class GraphStore:
    """Per-platform metadata graph, partitioned by dataset."""

    def __init__(self, core: CoreStore):
        self.core = core
        self.models: dict[str, ModelSchema] = {}
        self.records: dict[str, Record] = {}
        self.relationships: dict[str, Relationship] = {}

    # -- lookups ------------------------------------------------------------------

    def model(self, model_id: str) -> ModelSchema:
        try:
            return self.models[model_id]
        except KeyError:
            raise UnknownModel(f"no model {model_id}") from None

    def model_by_name(self, dataset_id: str, name: str) -> ModelSchema:
        for m in self.models.values():
            if m.dataset_id == dataset_id and m.name == name:
                return m
        raise UnknownModel(f"no model named {name!r} in dataset")

    def record(self, record_id: str) -> Record:
        try:
            return self.records[record_id]
        except KeyError:
            raise NotFound(f"no record {record_id}") from None

    def dataset_models(self, dataset_id: str) -> list[ModelSchema]:
        return sorted(
            (m for m in self.models.values() if m.dataset_id == dataset_id),
            key=lambda m: m.id,
        )

    def dataset_records(self, dataset_id: str) -> list[Record]:
        model_ids = {m.id for m in self.dataset_models(dataset_id)}
        return sorted(
            (r for r in self.records.values() if r.model_id in model_ids),
            key=lambda r: r.id,
        )

    def dataset_relationships(self, dataset_id: str) -> list[Relationship]:
        return sorted(
            (r for r in self.relationships.values() if r.dataset_id == dataset_id),
            key=lambda r: r.id,
        )

    def record_count(self, dataset_id: str) -> int:
        return len(self.dataset_records(dataset_id))

    # -- model / record writes ------------------------------------------------------

    def define_model(self, dataset_id: str, user_id: str, schema: dict) -> ModelSchema:
        self.core.dataset(dataset_id)
        name = (schema.get("name") or "").strip()
        if not name:
            raise InvalidSchema("model name must be non-empty")
        raw_props = schema.get("properties") or []
        if not raw_props:
            raise InvalidSchema("a model needs at least one property")
        properties: list[PropertySpec] = []
        seen: set[str] = set()
        for raw in raw_props:
            pname = (raw.get("name") or "").strip()
            ptype = raw.get("type")
            if not pname:
                raise InvalidSchema("property names must be non-empty")
            if pname in seen:
                raise InvalidSchema(f"duplicate property {pname!r}")
            if pname == "id":
                raise InvalidSchema("'id' is reserved for the record identifier column")
            if ptype not in PROPERTY_TYPES:
                raise InvalidSchema(f"unknown property type {ptype!r}")
            values = list(raw.get("values") or [])
            if ptype == "enum" and not values:
                raise InvalidSchema(f"enum property {pname!r} needs at least one value")
            seen.add(pname)
            properties.append(PropertySpec(pname, ptype, bool(raw.get("required")), values))
        slug = slugify(name)
        for other in self.dataset_models(dataset_id):
            if other.name == name:
                raise NameConflict(f"model {name!r} already exists in dataset")
            if other.slug == slug:
                raise NameConflict(f"model name {name!r} collides with {other.name!r} after slugification")
        model = ModelSchema(id=new_id(), dataset_id=dataset_id, name=name, properties=properties)
        self.models[model.id] = model
        self.core.touch(dataset_id)
        self.core.log(dataset_id, user_id, "record_changed", f"model {name!r} defined")
        return model

    def _validate_values(self, model: ModelSchema, values: dict) -> dict:
        offending: list[str] = []
        known = {p.name for p in model.properties}
        for key in values:
            if key not in known:
                offending.append(key)
        for spec in model.properties:
            if spec.name in values and values[spec.name] is not None:
                if not _value_ok(spec, values[spec.name]):
                    offending.append(spec.name)
            elif spec.required:
                offending.append(spec.name)
        if offending:
            raise SchemaViolation(
                f"values do not conform to model {model.name!r}",
                properties=sorted(set(offending)),
            )
        return {k: v for k, v in values.items() if v is not None}

    def create_record(self, model_id: str, user_id: str, values: dict) -> Record:
        model = self.model(model_id)
        clean = self._validate_values(model, values)
        record = Record(id=new_id(), model_id=model.id, values=clean)
        self.records[record.id] = record
        self.core.touch(model.dataset_id)
        self.core.log(model.dataset_id, user_id, "record_changed", f"record created in {model.name!r}")
        return record

    def update_record(self, record_id: str, user_id: str, values: dict) -> Record:
        record = self.record(record_id)
        model = self.model(record.model_id)
        merged = dict(record.values)
        merged.update(values)
        record.values = self._validate_values(model, merged)
        self.core.touch(model.dataset_id)
        self.core.log(model.dataset_id, user_id, "record_changed", f"record updated in {model.name!r}")
        return record

    def delete_record(self, record_id: str, user_id: str) -> None:
        record = self.record(record_id)
        model = self.model(record.model_id)
        for rel_id in [
            rid
            for rid, rel in self.relationships.items()
            if rel.from_record == record_id or rel.to_record == record_id
        ]:
            del self.relationships[rel_id]
        del self.records[record_id]
        self.core.touch(model.dataset_id)
        self.core.log(model.dataset_id, user_id, "record_changed", f"record deleted from {model.name!r}")

    # -- edges -----------------------------------------------------------------------

    def _record_dataset(self, record: Record) -> str:
        return self.model(record.model_id).dataset_id

    def link_records(self, dataset_id: str, user_id: str, name: str, from_id: str, to_id: str) -> Relationship:
        name = name.strip()
        if not name:
            raise InvalidSchema("relationship name must be non-empty")
        src, dst = self.record(from_id), self.record(to_id)
        for rec in (src, dst):
            if self._record_dataset(rec) != dataset_id:
                raise CrossDataset("relationships must stay within one dataset")
        for rel in self.relationships.values():
            if (rel.name, rel.from_record, rel.to_record) == (name, from_id, to_id):
                return rel
        rel = Relationship(id=new_id(), dataset_id=dataset_id, name=name, from_record=from_id, to_record=to_id)
        self.relationships[rel.id] = rel
        self.core.touch(dataset_id)
        self.core.log(dataset_id, user_id, "record_changed", f"relationship {name!r} added")
        return rel

    def link_file(self, dataset_id: str, user_id: str, record_id: str, node_id: str) -> Record:
        record = self.record(record_id)
        if self._record_dataset(record) != dataset_id:
            raise CrossDataset("record belongs to another dataset")
        node = self.core.node(node_id)
        if node.dataset_id != dataset_id:
            raise CrossDataset("file belongs to another dataset")
        if node.kind != "file" or not node.live:
            raise NotFound("file links must target a live file node")
        if node_id not in record.file_links:
            record.file_links.add(node_id)
            self.core.touch(dataset_id)
            self.core.log(dataset_id, user_id, "record_changed", "file linked to record")
        return record

    def unlink_file(self, dataset_id: str, user_id: str, record_id: str, node_id: str) -> Record:
        record = self.record(record_id)
        if node_id in record.file_links:
            record.file_links.discard(node_id)
            self.core.touch(dataset_id)
            self.core.log(dataset_id, user_id, "record_changed", "file unlinked from record")
        return record

    def detach_file(self, dataset_id: str, user_id: str, node_ids: list[str]) -> list[str]:
        """Drop file links to the given nodes (soft-delete hook). Returns the
        ids of records that changed; each detachment is logged."""
        affected: list[str] = []
        targets = set(node_ids)
        for record in self.dataset_records(dataset_id):
            hit = record.file_links & targets
            if hit:
                record.file_links -= hit
                affected.append(record.id)
        if affected:
            self.core.log(
                dataset_id, user_id, "record_changed",
                f"file links detached from {len(affected)} record(s) after deletion",
            )
        return affected

    # -- queries ------------------------------------------------------------------------

    def query_records(
        self,
        dataset_id: str,
        model_name: str,
        predicate: list[dict] | None = None,
        traverse: dict | None = None,
    ) -> list[Record]:
        model = self.model_by_name(dataset_id, model_name)
        matched = [r for r in self.dataset_records(dataset_id) if r.model_id == model.id]
        for clause in predicate or []:
            prop = model.property(clause.get("property", ""))
            if prop is None:
                raise UnknownProperty(f"model {model.name!r} has no property {clause.get('property')!r}")
            op = clause.get("op")
            if op not in ("eq", "lt", "gt", "contains"):
                raise TypeMismatch(f"unknown predicate op {op!r}")
            value = clause.get("value")
            if op == "contains":
                if prop.type not in ("string", "enum", "date") or not isinstance(value, str):
                    raise TypeMismatch("contains applies to text properties and a text value")
            elif not _value_ok(prop, value):
                raise TypeMismatch(f"predicate value {value!r} does not fit property type {prop.type}")
            matched = [r for r in matched if _clause_hit(r.values.get(prop.name), op, value)]
        if traverse:
            rel_name = traverse.get("relationship_name")
            target = self.model_by_name(dataset_id, traverse.get("target_model", ""))
            seen: dict[str, Record] = {}
            source_ids = {r.id for r in matched}
            for rel in self.dataset_relationships(dataset_id):
                if rel.name != rel_name:
                    continue
                # edges are matched in either direction: the schema names the
                # link, not which side happened to be "from" at creation time
                for here, there in ((rel.from_record, rel.to_record), (rel.to_record, rel.from_record)):
                    if here in source_ids:
                        neighbour = self.records.get(there)
                        if neighbour and neighbour.model_id == target.id:
                            seen[neighbour.id] = neighbour
            matched = list(seen.values())
        return sorted(matched, key=lambda r: r.id)

    def graph_dump(self, dataset_id: str) -> dict:
        """Node/edge view for visualization clients."""
        models = {m.id: m for m in self.dataset_models(dataset_id)}
        return {
            "models": [m.to_dict() for m in models.values()],
            "records": [
                dict(r.to_dict(), model_name=models[r.model_id].name)
                for r in self.dataset_records(dataset_id)
            ],
            "relationships": [r.to_dict() for r in self.dataset_relationships(dataset_id)],
        }

    # -- serialization ---------------------------------------------------------------------

    def serialize_graph(self, dataset_id: str) -> dict[str, bytes]:
        """Flatten the dataset's graph to `metadata/...` files, byte-deterministically."""
        self.core.dataset(dataset_id, include_deleted=True)
        files: dict[str, bytes] = {}
        models = self.dataset_models(dataset_id)
        schema_doc = {
            "models": [
                {"name": m.name, "properties": [p.to_dict() for p in m.properties]}
                for m in sorted(models, key=lambda m: m.slug)
            ]
        }
        files["metadata/schema.json"] = (
            json.dumps(schema_doc, indent=2, sort_keys=True) + "\n"
        ).encode("utf-8")
        for model in models:
            rows: list[list[str | None]] = [["id"] + [p.name for p in model.properties]]
            records = [r for r in self.dataset_records(dataset_id) if r.model_id == model.id]
            for record in sorted(records, key=lambda r: r.id):
                row: list[str | None] = [record.id]
                for spec in model.properties:
                    row.append(_render_value(spec, record.values.get(spec.name)))
                rows.append(row)
            files[f"metadata/{model.slug}.csv"] = csv_bytes(rows)
        rel_rows: list[list[str | None]] = [["id", "name", "from", "to"]]
        for rel in sorted(self.dataset_relationships(dataset_id), key=lambda r: r.id):
            rel_rows.append([rel.id, rel.name, rel.from_record, rel.to_record])
        files["metadata/relationships.csv"] = csv_bytes(rel_rows)
        link_rows: list[list[str | None]] = [["record_id", "file_path"]]
        pairs: list[tuple[str, str]] = []
        for record in self.dataset_records(dataset_id):
            for node_id in record.file_links:
                pairs.append((record.id, self.core.node_path(node_id)))
        for record_id, path in sorted(pairs):
            link_rows.append([record_id, path])
        files["metadata/file_links.csv"] = csv_bytes(link_rows)
        return files

    # -- persistence -------------------------------------------------------------------------

    def dump(self) -> dict:
        return {
            "models": [m.to_dict() for m in self.models.values()],
            "records": [r.to_dict() for r in self.records.values()],
            "relationships": [r.to_dict() for r in self.relationships.values()],
        }

    def load(self, data: dict) -> None:
        self.models = {
            m["id"]: ModelSchema(
                id=m["id"], dataset_id=m["dataset_id"], name=m["name"],
                properties=[
                    PropertySpec(p["name"], p["type"], p["required"], list(p.get("values") or []))
                    for p in m["properties"]
                ],
            )
            for m in data.get("models", [])
        }
        self.records = {
            r["id"]: Record(
                id=r["id"], model_id=r["model_id"], values=dict(r["values"]),
                file_links=set(r.get("file_links") or []),
            )
            for r in data.get("records", [])
        }
        self.relationships = {
            r["id"]: Relationship(
                id=r["id"], dataset_id=r["dataset_id"], name=r["name"],
                from_record=r["from_record"], to_record=r["to_record"],
            )
            for r in data.get("relationships", [])
        }


def _clause_hit(stored, op: str, value) -> bool:
    if stored is None:
        return False
    if op == "eq":
        return stored == value
    if op == "contains":
        return isinstance(stored, str) and value in stored
    try:
        if op == "lt":
            return stored < value
        if op == "gt":
            return stored > value
    except TypeError:
        return False
    return False


def parse_serialized(files: dict[str, bytes]) -> dict:
    """Inverse of serialize_graph: rebuild a plain graph description.

    Returns {models, records, relationships, file_links} where records carry
    typed values again (via the schema manifest) and file links are
    (record_id, file_path) pairs.
    """
    schema_doc = json.loads(files["metadata/schema.json"].decode("utf-8"))
    models = []
    records = []
    for entry in schema_doc["models"]:
        specs = [
            PropertySpec(p["name"], p["type"], p["required"], list(p.get("values") or []))
            for p in entry["properties"]
        ]
        models.append({"name": entry["name"], "properties": [s.to_dict() for s in specs]})
        slug = slugify(entry["name"])
        header, rows = parse_csv(files[f"metadata/{slug}.csv"])
        expected = ["id"] + [s.name for s in specs]
        if header != expected:
            raise ValueError(f"unexpected header in {slug}.csv: {header}")
        for row in rows:
            values = {}
            for spec, cell in zip(specs, row[1:]):
                parsed = _parse_value(spec, cell)
                if parsed is not None:
                    values[spec.name] = parsed
            records.append({"id": row[0], "model": entry["name"], "values": values})
    _, rel_rows = parse_csv(files["metadata/relationships.csv"])
    relationships = [
        {"id": r[0], "name": r[1], "from": r[2], "to": r[3]} for r in rel_rows
    ]
    _, link_rows = parse_csv(files["metadata/file_links.csv"])
    file_links = [(r[0], r[1]) for r in link_rows]
    return {
        "models": models,
        "records": records,
        "relationships": relationships,
        "file_links": file_links,
    }
