"""Rule-based map refinement: the step between raw clusters and a map.

Small connected components get absorbed into the dominant label around
them, surplus clusters are remapped into their region of interest, and
the survivors get a legend. All transforms are deterministic: smallest
component first, ties to the lowest label id.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .labelmap import HabitatMap, LabelMap

_CONNECTIVITY = {4: ((-1, 0), (0, -1)), 8: ((-1, -1), (-1, 0), (-1, 1), (0, -1))}


@dataclass
class ComponentInfo:
    label: int
    size: int
    bbox: tuple[int, int, int, int]  # min_row, min_col, max_row, max_col


@dataclass
class ComponentMap:
    component_ids: np.ndarray  # int32 per pixel; -1 on sentinel pixels
    components: list[ComponentInfo]


@dataclass
class LegendEntry:
    label: int
    name: str
    color: tuple[int, int, int]


# Presets matching the habitat classes the mapping loop targets.
BENTHIC_PRESET = [
    ("ocean", (16, 64, 160)),
    ("sand", (255, 235, 80)),
    ("rock/rubble", (120, 116, 90)),
]
GEOMORPHIC_PRESET = [
    ("reef flat", (245, 200, 120)),
    ("lagoon/plateau", (90, 200, 190)),
    ("reef slope", (200, 90, 70)),
    ("ocean", (16, 64, 160)),
]


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:  # path compression
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def connected_components(lm: LabelMap, connectivity: int = 8) -> ComponentMap:
    """Group same-label neighbors; sentinel pixels are excluded.

    Component ids are dense from 0 in order of each component's first
    pixel in the row-major scan.
    """
    if connectivity not in _CONNECTIVITY:
        raise ValueError("connectivity must be 4 or 8")
    offsets = _CONNECTIVITY[connectivity]
    h, w = lm.height, lm.width
    labels = lm.labels
    uf = _UnionFind(h * w)
    for r in range(h):
        row = labels[r]
        for c in range(w):
            v = row[c]
            if v < 0:
                continue
            for dr, dc in offsets:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and labels[nr, nc] == v:
                    uf.union(nr * w + nc, r * w + c)

    component_ids = np.full((h, w), -1, dtype=np.int32)
    components: list[ComponentInfo] = []
    root_to_id: dict[int, int] = {}
    for r in range(h):
        for c in range(w):
            if labels[r, c] < 0:
                continue
            root = uf.find(r * w + c)
            cid = root_to_id.get(root)
            if cid is None:
                cid = len(components)
                root_to_id[root] = cid
                components.append(ComponentInfo(int(labels[r, c]), 0, (r, c, r, c)))
            component_ids[r, c] = cid
            info = components[cid]
            r0, c0, r1, c1 = info.bbox
            info.bbox = (min(r0, r), min(c0, c), max(r1, r), max(c1, c))
            info.size += 1
    return ComponentMap(component_ids, components)


def merge_small_components(
    lm: LabelMap, min_size: int, connectivity: int = 8
) -> LabelMap:
    """Absorb undersized components into their dominant neighbor label.

    One component is relabeled per step, smallest first (ties to the
    earliest component in scan order); its pixels take the modal label
    of the surrounding border pixels (ties to the lowest label id),
    which fuses it with the adjacent components of that label. This
    repeats until every component either meets min_size or touches
    nothing but sentinels; such sentinel-enclosed islands are left
    alone.

    Equivalent to recomputing all components after every merge, but
    incremental: component membership is maintained across steps with
    small-to-large unions, so heavily speckled maps (thousands of tiny
    clusters) stay near-linear instead of quadratic.
    """
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    out = lm.copy()
    if min_size == 1:
        return out
    labels = out.labels
    h, w = labels.shape
    if connectivity == 4:
        neigh = ((-1, 0), (1, 0), (0, -1), (0, 1))
    else:
        neigh = tuple(
            (dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)
        )

    cm = connected_components(out, connectivity)
    comp_ids = cm.component_ids.copy()
    comp_flat = comp_ids.reshape(-1)
    n_comps = len(cm.components)

    # Pixel lists per component, grouped in one vectorized pass.
    order = np.argsort(comp_flat, kind="stable")
    sorted_ids = comp_flat[order]
    starts = np.searchsorted(sorted_ids, np.arange(n_comps))
    ends = np.searchsorted(sorted_ids, np.arange(n_comps), side="right")
    pixels: list[np.ndarray] = [order[s:e] for s, e in zip(starts, ends)]
    sizes = [info.size for info in cm.components]
    first_px = [int(p[0]) if p.size else 0 for p in pixels]

    # Heap entries are (size, first scan-order pixel, component id); the
    # first-pixel key reproduces the scan-order tie-break a full
    # recompute would give. Stale entries are dropped on pop.
    heap = [
        (sizes[cid], first_px[cid], cid)
        for cid in range(n_comps)
        if sizes[cid] < min_size
    ]
    heapq.heapify(heap)
    dead = np.zeros(n_comps, dtype=bool)
    dormant = np.zeros(n_comps, dtype=bool)
    lab_flat = labels.reshape(-1)

    while heap:
        size, _, cid = heapq.heappop(heap)
        if dead[cid] or dormant[cid] or sizes[cid] != size:
            continue
        # Modal label over border-adjacent pixels; track which
        # components carry each label so the winners can be fused.
        counts: dict[int, int] = {}
        touching: dict[int, set[int]] = {}
        for p in pixels[cid].tolist():
            r, c = divmod(p, w)
            for dr, dc in neigh:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w:
                    ncid = comp_ids[nr, nc]
                    if ncid >= 0 and ncid != cid:
                        lab = int(labels[nr, nc])
                        counts[lab] = counts.get(lab, 0) + 1
                        touching.setdefault(lab, set()).add(int(ncid))
        if not counts:
            dormant[cid] = True  # sentinel-enclosed island, preserved
            continue
        target = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]

        lab_flat[pixels[cid]] = target
        group = [cid, *sorted(touching[target])]
        survivor = max(group, key=lambda g: pixels[g].size)
        merged_size = sum(sizes[g] for g in group)
        merged_first = min(first_px[g] for g in group)
        chunks = [pixels[g] for g in group]
        for g in group:
            if g == survivor:
                continue
            comp_flat[pixels[g]] = survivor
            dead[g] = True
            pixels[g] = np.empty(0, dtype=np.int64)
        pixels[survivor] = np.concatenate(chunks)
        sizes[survivor] = merged_size
        first_px[survivor] = merged_first
        if merged_size < min_size:
            heapq.heappush(heap, (merged_size, merged_first, survivor))
    return out


def remap_labels(lm: LabelMap, mapping: list[tuple[int, int]]) -> LabelMap:
    """Apply (from -> to) substitutions in one simultaneous pass."""
    present = set(lm.present_labels())
    seen_from = set()
    table = {}
    for src, dst in mapping:
        if src == dst:
            raise ValueError(f"remap {src}->{dst} maps a label to itself")
        if src in seen_from:
            raise ValueError(f"duplicate remap source {src}")
        if src not in present:
            raise ValueError(f"remap source {src} not present in the label map")
        if src < 0 or dst < 0:
            raise ValueError("sentinel labels cannot be remapped")
        seen_from.add(src)
        table[src] = dst
    # Cycles would make one-step application order-dependent.
    for start in table:
        seen = {start}
        cur = table[start]
        while cur in table:
            if cur in seen:
                raise ValueError(f"remap mapping contains a cycle through {cur}")
            seen.add(cur)
            cur = table[cur]
        if cur in seen:
            raise ValueError(f"remap mapping contains a cycle through {cur}")
    out = lm.copy()
    flat = out.labels
    masks = {src: flat == src for src in table}  # simultaneous substitution
    for src, dst in table.items():
        flat[masks[src]] = dst
    return out


def compact(lm: LabelMap) -> tuple[LabelMap, dict[int, int]]:
    """Renumber surviving labels densely by first row-major occurrence."""
    flat = lm.labels.reshape(-1)
    vals, first = np.unique(flat, return_index=True)
    keep = vals >= 0
    order = np.argsort(first[keep], kind="stable")
    table = {int(v): i for i, v in enumerate(vals[keep][order])}
    new = flat.copy()
    for old, fresh in table.items():
        new[flat == old] = fresh
    return LabelMap(lm.width, lm.height, new.reshape(lm.height, lm.width)), table


def assign_legend(
    lm: LabelMap,
    entries: list[LegendEntry],
    provenance: dict | None = None,
) -> HabitatMap:
    """Attach class names and colors to every surviving label."""
    ids = [e.label for e in entries]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"legend repeats label ids {dupes}")
    covered = set(ids)
    uncovered = [l for l in lm.present_labels() if l not in covered]
    if uncovered:
        raise ValueError(f"legend does not cover labels {uncovered}")
    return HabitatMap(lm.copy(), list(entries), dict(provenance or {}))


def preset_legend(preset: str, labels: list[int]) -> list[LegendEntry]:
    """Bind a named preset's classes to concrete label ids in order."""
    table = {"benthic": BENTHIC_PRESET, "geomorphic": GEOMORPHIC_PRESET}
    if preset not in table:
        raise ValueError(f"unknown legend preset {preset!r}")
    classes = table[preset]
    if len(labels) != len(classes):
        raise ValueError(
            f"preset {preset!r} names {len(classes)} classes but the map has "
            f"{len(labels)} labels; remap or merge first"
        )
    return [
        LegendEntry(lab, name, color)
        for lab, (name, color) in zip(sorted(labels), classes)
    ]


def legend_to_json(entries: list[LegendEntry]) -> str:
    payload = [
        {"label": e.label, "class": e.name, "color": "#%02X%02X%02X" % e.color}
        for e in entries
    ]
    return json.dumps(payload, indent=2) + "\n"


def legend_from_json(text: str) -> list[LegendEntry]:
    raw = json.loads(text)
    out = []
    for item in raw:
        color = item["color"].lstrip("#")
        rgb = tuple(int(color[i : i + 2], 16) for i in (0, 2, 4))
        out.append(LegendEntry(int(item["label"]), str(item["class"]), rgb))
    return out
