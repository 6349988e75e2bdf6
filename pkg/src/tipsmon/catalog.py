"""Simlet database: loading, case-insensitive prefix completion, scene composition."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Union

from .model import ModelError, Simlet, ToolSpec


class CatalogError(ValueError):
    """Catalog file problems, reported with their location."""

    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}")


class _TrieNode:
    __slots__ = ("children", "names")

    def __init__(self):
        self.children: dict = {}
        self.names: list = []  # display names terminating here


class NameIndex:
    """Case-insensitive prefix lookup over display names, backed by a trie."""

    def __init__(self):
        self._root = _TrieNode()
        self._count = 0

    def insert(self, name: str) -> None:
        node = self._root
        for ch in name.casefold():
            node = node.children.setdefault(ch, _TrieNode())
        node.names.append(name)
        self._count += 1

    def __len__(self) -> int:
        return self._count

    def complete(self, prefix: str) -> list:
        node = self._root
        for ch in prefix.casefold():
            node = node.children.get(ch)
            if node is None:
                return []
        out: list = []
        stack = [node]
        while stack:
            n = stack.pop()
            out.extend(n.names)
            stack.extend(n.children.values())
        out.sort(key=lambda name: (name.casefold(), name))
        return out


@dataclass(frozen=True)
class Catalog:
    simlets: dict  # id -> Simlet
    tools: dict  # id -> ToolSpec
    name_index: NameIndex = field(compare=False, repr=False, default_factory=NameIndex)

    def entries_by_name(self, name: str) -> list:
        """All simlets/tools whose display name equals `name` case-insensitively."""
        key = name.casefold()
        hits = [s for s in self.simlets.values() if s.name.casefold() == key]
        hits += [t for t in self.tools.values() if t.name.casefold() == key]
        return hits


def load_catalog(source: Union[str, bytes, IO]) -> Catalog:
    """Parse and validate a catalog document (JSON text, bytes, or a file object)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as err:
        raise CatalogError("catalog", f"malformed document: {err}") from err
    if not isinstance(doc, dict):
        raise CatalogError("catalog", "malformed document: expected a JSON object")

    simlets: dict = {}
    tools: dict = {}
    raw_simlets = doc.get("simlets")
    raw_tools = doc.get("tools")
    if not isinstance(raw_simlets, list) or not isinstance(raw_tools, list):
        raise CatalogError("catalog", "malformed document: 'simlets' and 'tools' arrays required")
    for i, raw in enumerate(raw_simlets):
        loc = f"simlets[{i}]"
        try:
            simlet = Simlet.from_dict(raw, loc)
        except ModelError as err:
            raise CatalogError(err.location, err.message) from err
        if simlet.id in simlets:
            raise CatalogError(loc, f"duplicate id '{simlet.id}'")
        simlets[simlet.id] = simlet
    for i, raw in enumerate(raw_tools):
        loc = f"tools[{i}]"
        try:
            tool = ToolSpec.from_dict(raw, loc)
        except ModelError as err:
            raise CatalogError(err.location, err.message) from err
        if tool.id in tools or tool.id in simlets:
            raise CatalogError(loc, f"duplicate id '{tool.id}'")
        tools[tool.id] = tool

    for sid, simlet in simlets.items():
        for ref in simlet.attachments:
            if ref not in simlets:
                raise CatalogError(
                    f"simlets[{sid}].attachments", f"dangling attachment '{ref}'"
                )

    index = NameIndex()
    for simlet in simlets.values():
        index.insert(simlet.name)
    for tool in tools.values():
        index.insert(tool.name)
    return Catalog(simlets=simlets, tools=tools, name_index=index)


def load_catalog_file(path) -> Catalog:
    with open(path, "rb") as fh:
        return load_catalog(fh)


def complete(catalog: Catalog, prefix: str) -> list:
    """All display names starting (case-insensitively) with `prefix`, sorted.

    An empty prefix returns every name. Ordering is the lexicographic byte
    order of the case-folded names, so results are deterministic.
    """
    return catalog.name_index.complete(prefix)


@dataclass(frozen=True)
class Scene:
    instances: dict  # id -> Simlet
    attachment_edges: frozenset  # of frozenset({childId, parentId})

    def has_edge(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.attachment_edges


def compose(catalog: Catalog, ids) -> Scene:
    """Instantiate the selected simlets and the attachment graph they induce."""
    ids = list(ids)
    if not ids:
        raise CatalogError("scene", "at least one simlet id is required")
    seen: set = set()
    instances: dict = {}
    for sid in ids:
        if sid in seen:
            raise CatalogError("scene", f"duplicate id '{sid}' in selection")
        seen.add(sid)
        simlet = catalog.simlets.get(sid)
        if simlet is None:
            raise CatalogError("scene", f"unknown id '{sid}'")
        instances[sid] = simlet
    edges = set()
    for simlet in instances.values():
        for ref in simlet.attachments:
            if ref in instances:
                edges.add(frozenset((simlet.id, ref)))
    return Scene(instances=instances, attachment_edges=frozenset(edges))
