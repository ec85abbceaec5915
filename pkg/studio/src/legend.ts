// Legend drafting: the in-progress cluster -> (class, color) table the
// user edits before posting a refinement. Drafts are plain objects so
// they serialize straight into localStorage.

import { hexToRgb } from "./palette.js";
import type { ColorTable } from "./recolor.js";
import type { LegendEntryJson } from "./types.js";

export interface DraftEntry {
  className: string;
  color: string; // #RRGGBB
}

export type LegendDraft = Record<number, DraftEntry>;

// Class sets and colors track the server's bundled presets.
export const BENTHIC_PRESET: Array<[string, string]> = [
  ["ocean", "#1040A0"],
  ["sand", "#FFEB50"],
  ["rock/rubble", "#78745A"],
];

export const GEOMORPHIC_PRESET: Array<[string, string]> = [
  ["reef flat", "#F5C878"],
  ["lagoon/plateau", "#5AC8BE"],
  ["reef slope", "#C85A46"],
  ["ocean", "#1040A0"],
];

export function applyPreset(
  labels: number[],
  preset: Array<[string, string]>,
): LegendDraft {
  if (labels.length !== preset.length) {
    throw new Error(
      `preset names ${preset.length} classes but the map has ${labels.length} clusters; merge or remap first`,
    );
  }
  const draft: LegendDraft = {};
  const sorted = [...labels].sort((a, b) => a - b);
  sorted.forEach((label, i) => {
    draft[label] = { className: preset[i][0], color: preset[i][1] };
  });
  return draft;
}

export function setEntry(
  draft: LegendDraft,
  label: number,
  className: string,
  color: string,
): LegendDraft {
  hexToRgb(color); // validate early
  return { ...draft, [label]: { className, color } };
}

export function completeness(
  draft: LegendDraft,
  labels: number[],
): { complete: boolean; missing: number[] } {
  const missing = labels.filter(
    (l) => !(l in draft) || draft[l].className.trim() === "",
  );
  return { complete: missing.length === 0, missing };
}

// Two clusters sharing one class name is a merge the user probably
// wants; surface it as a remap suggestion (higher label into lower).
export function mergeSuggestions(
  draft: LegendDraft,
): Array<{ from: number; to: number; className: string }> {
  const byClass = new Map<string, number[]>();
  for (const [label, entry] of Object.entries(draft)) {
    const name = entry.className.trim();
    if (name === "") continue;
    const group = byClass.get(name) ?? [];
    group.push(Number(label));
    byClass.set(name, group);
  }
  const out: Array<{ from: number; to: number; className: string }> = [];
  for (const [className, labels] of byClass) {
    labels.sort((a, b) => a - b);
    for (const from of labels.slice(1)) {
      out.push({ from, to: labels[0], className });
    }
  }
  return out.sort((a, b) => a.from - b.from);
}

export function draftToColorTable(draft: LegendDraft): ColorTable {
  const table: ColorTable = new Map();
  for (const [label, entry] of Object.entries(draft)) {
    table.set(Number(label), hexToRgb(entry.color));
  }
  return table;
}

export function draftToPayload(draft: LegendDraft): LegendEntryJson[] {
  return Object.entries(draft)
    .map(([label, entry]) => ({
      label: Number(label),
      class: entry.className,
      color: entry.color,
    }))
    .sort((a, b) => a.label - b.label);
}

export function draftFromLegendJson(entries: LegendEntryJson[]): LegendDraft {
  const draft: LegendDraft = {};
  for (const e of entries) {
    draft[e.label] = { className: e.class, color: e.color.toUpperCase() };
  }
  return draft;
}
