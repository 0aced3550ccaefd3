"""Readers and writers for the on-disk node, edge, post, manifest, lexicon and gazetteer files.

All formats are UTF-8 comma-separated text with a header row, except the
manifest/config files (``key = value`` lines) and the topic lexicon
(``[topic]`` sections with one pattern per line).
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from triarch.errors import (
    BadCoordinate,
    BadStance,
    BadTimestamp,
    BadValue,
    DanglingEdge,
    DuplicateId,
    MissingHeader,
    SelfLoop,
    ValidationError,
    ValidationWarning,
)
from triarch.graph import NEUTRAL_SUBCATEGORIES, FollowEdge, PageNode, Snapshot, Stance, build_snapshot

NODE_COLUMNS = ("id", "stance", "subcategory", "fan_count", "title", "location", "lat", "lon")
EDGE_COLUMNS = ("source", "target")
POST_COLUMNS = ("page_id", "timestamp", "text")
GAZETTEER_COLUMNS = ("toponym", "scale")


@dataclass(frozen=True)
class PostRecord:
    page_id: str
    timestamp: datetime
    text: str


@dataclass(frozen=True)
class Manifest:
    label: str
    nodes: Path
    edges: Path
    posts: Path | None = None


def _open_table(path, required):
    """Yield (line_number, row dict) after validating the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise MissingHeader(f"{path}: empty file, expected header {','.join(required)}")
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingHeader(f"{path}: header lacks column(s) {', '.join(missing)}")
        extra = [c for c in header if c not in required]
        if extra:
            warnings.warn(f"{path}: ignoring extra column(s) {', '.join(extra)}", ValidationWarning, stacklevel=3)
        for row in reader:
            if None in row:
                raise BadValue("too many fields", reader.line_num)
            if any(row[c] is None for c in required):
                raise BadValue("too few fields", reader.line_num)
            yield reader.line_num, row


def _opt(text):
    text = text.strip()
    return text or None


def _parse_coord(text, lo, hi, row):
    try:
        value = float(text)
    except ValueError:
        raise BadCoordinate(f"not a number: {text!r}", row) from None
    if not math.isfinite(value) or not lo <= value <= hi:
        raise BadCoordinate(f"{value} outside [{lo}, {hi}]", row)
    return value


def parse_node_row(row: dict, line: int) -> PageNode:
    try:
        stance = Stance.parse(row["stance"])
    except ValueError:
        raise BadStance(f"unknown stance {row['stance']!r}", line) from None
    sub = _opt(row["subcategory"])
    if sub is not None:
        sub = sub.lower()
        if stance is not Stance.NEUTRAL:
            raise BadValue(f"subcategory {sub!r} on a {stance.value} page", line)
        if sub not in NEUTRAL_SUBCATEGORIES:
            raise BadValue(f"unknown subcategory {sub!r}", line)
    elif stance is Stance.NEUTRAL:
        warnings.warn(f"row {line}: neutral page {row['id']!r} has no subcategory", ValidationWarning, stacklevel=2)
    fan_text = row["fan_count"].strip()
    if not fan_text.isdigit():
        raise BadValue(f"fan_count must be a non-negative integer, got {fan_text!r}", line)
    lat_text, lon_text = row["lat"].strip(), row["lon"].strip()
    if bool(lat_text) != bool(lon_text):
        raise BadCoordinate("lat and lon must both be present or both empty", line)
    lat = _parse_coord(lat_text, -90.0, 90.0, line) if lat_text else None
    lon = _parse_coord(lon_text, -180.0, 180.0, line) if lon_text else None
    node_id = row["id"].strip()
    if not node_id:
        raise BadValue("empty id", line)
    return PageNode(
        id=node_id,
        stance=stance,
        subcategory=sub,
        fan_count=int(fan_text),
        title=row["title"],
        location_text=_opt(row["location"]),
        lat=lat,
        lon=lon,
    )


def load_nodes(path) -> list[PageNode]:
    nodes = []
    seen = set()
    for line, row in _open_table(path, NODE_COLUMNS):
        node = parse_node_row(row, line)
        if node.id in seen:
            raise DuplicateId(f"duplicate id {node.id!r}", line)
        seen.add(node.id)
        nodes.append(node)
    return nodes


def load_edges(path, nodes) -> list[FollowEdge]:
    """Edges in file order; repeated pairs are kept once."""
    ids = {n.id for n in nodes}
    edges = []
    seen = set()
    for line, row in _open_table(path, EDGE_COLUMNS):
        src, dst = row["source"].strip(), row["target"].strip()
        if src == dst:
            raise SelfLoop(src, line)
        if src not in ids or dst not in ids:
            raise DanglingEdge(src, dst, line)
        e = FollowEdge(src, dst)
        if e not in seen:
            seen.add(e)
            edges.append(e)
    return edges


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_posts(path) -> list[PostRecord]:
    posts = []
    for line, row in _open_table(path, POST_COLUMNS):
        try:
            ts = parse_timestamp(row["timestamp"])
        except ValueError:
            raise BadTimestamp(f"unparseable timestamp {row['timestamp']!r}", line) from None
        posts.append(PostRecord(row["page_id"].strip(), ts, row["text"]))
    return posts


def _fmt_float(x):
    return "" if x is None else repr(float(x))


def write_nodes(path, nodes) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODE_COLUMNS)
        for n in nodes:
            w.writerow([
                n.id,
                n.stance.value,
                n.subcategory or "",
                n.fan_count,
                n.title,
                n.location_text or "",
                _fmt_float(n.lat),
                _fmt_float(n.lon),
            ])


def write_edges(path, edges) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_COLUMNS)
        w.writerows(edges)


def write_posts(path, posts) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POST_COLUMNS)
        for p in posts:
            w.writerow([p.page_id, p.timestamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"), p.text])


# -- key = value documents (manifests and configs) --------------------------


def parse_kv(text: str, source="<string>") -> dict[str, str | int | float | bool | list]:
    """Parse ``key = value`` lines. Values are JSON literals or bare strings; ``#`` starts a comment line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValidationError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def read_kv(path) -> dict:
    return parse_kv(Path(path).read_text(encoding="utf-8"), str(path))


def format_kv(data: dict) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in data.items())


def load_manifest(path) -> Manifest:
    path = Path(path)
    kv = read_kv(path)
    for key in ("label", "nodes", "edges"):
        if key not in kv:
            raise ValidationError(f"{path}: manifest lacks {key!r}")
    unknown = set(kv) - {"label", "nodes", "edges", "posts"}
    if unknown:
        warnings.warn(f"{path}: ignoring manifest key(s) {', '.join(sorted(unknown))}", ValidationWarning, stacklevel=2)
    base = path.parent
    posts = kv.get("posts")
    return Manifest(
        label=str(kv["label"]),
        nodes=base / str(kv["nodes"]),
        edges=base / str(kv["edges"]),
        posts=base / str(posts) if posts else None,
    )


def write_manifest(path, label, nodes="nodes.csv", edges="edges.csv", posts=None) -> None:
    data = {"label": label, "nodes": str(nodes), "edges": str(edges)}
    if posts:
        data["posts"] = str(posts)
    Path(path).write_text(format_kv(data), encoding="utf-8")


def load_snapshot(manifest_path) -> Snapshot:
    m = load_manifest(manifest_path)
    nodes = load_nodes(m.nodes)
    return build_snapshot(m.label, nodes, load_edges(m.edges, nodes))


def save_snapshot(s: Snapshot, directory, stem="") -> Path:
    """Write ``<stem>nodes.csv``, ``<stem>edges.csv`` and ``<stem>snapshot.manifest``; return the manifest path."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    write_nodes(directory / f"{stem}nodes.csv", s.nodes)
    write_edges(directory / f"{stem}edges.csv", s.edges)
    manifest = directory / f"{stem}snapshot.manifest"
    write_manifest(manifest, s.label, f"{stem}nodes.csv", f"{stem}edges.csv")
    return manifest


# -- lexicon and gazetteer ----------------------------------------------------


def load_lexicon_file(path) -> dict[str, list[str]]:
    """``[topic]`` headers followed by one keyword pattern per line."""
    topics: dict[str, list[str]] = {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if not current:
                    raise ValidationError(f"{path}:{lineno}: empty topic name")
                if current in topics:
                    raise ValidationError(f"{path}:{lineno}: duplicate topic {current!r}")
                topics[current] = []
            elif current is None:
                raise ValidationError(f"{path}:{lineno}: pattern before any [topic] header")
            else:
                topics[current].append(line)
    return topics


def load_gazetteer_file(path) -> dict[str, str]:
    """toponym -> scale family name, as written in the file."""
    out = {}
    for line, row in _open_table(path, GAZETTEER_COLUMNS):
        name = " ".join(row["toponym"].split())
        if not name:
            raise BadValue("empty toponym", line)
        out[name] = row["scale"].strip().lower()
    return out
