/** Read-only dialogue-state inspector: one collapsible section per state key,
 * entries changed since the previous turn highlighted. */

import { changedPaths } from "./diff.js";
import type { DialogueStateJson, StateKey } from "./types.js";
import { STATE_KEYS } from "./types.js";

function entryRow(doc: Document, path: string, label: string, changed: Set<string>): HTMLLIElement {
  const row = doc.createElement("li");
  row.className = "state-entry";
  row.dataset.path = path;
  if (changed.has(path)) {
    row.classList.add("changed");
  }
  row.textContent = label;
  return row;
}

function sectionEntries(
  doc: Document,
  key: StateKey,
  state: DialogueStateJson,
  changed: Set<string>,
): HTMLLIElement[] {
  if (key === "hard_constraints" || key === "soft_constraints") {
    return Object.entries(state[key]).map(([subkey, values]) =>
      entryRow(doc, `${key}.${subkey}`, `${subkey}: ${values.join(", ")}`, changed),
    );
  }
  return state[key].map((itemId) => entryRow(doc, `${key}.${itemId}`, itemId, changed));
}

/** Replace `container`'s contents with a rendering of `state`; entries that
 * differ from `previous` get the "changed" class. */
export function renderStatePanel(
  container: HTMLElement,
  state: DialogueStateJson,
  previous: DialogueStateJson | null,
): void {
  const doc = container.ownerDocument;
  const changed = changedPaths(previous, state);
  container.textContent = "";
  for (const key of STATE_KEYS) {
    const section = doc.createElement("details");
    section.className = "state-section";
    section.dataset.key = key;
    section.open = true;
    const summary = doc.createElement("summary");
    summary.textContent = key;
    section.appendChild(summary);
    const list = doc.createElement("ul");
    const rows = sectionEntries(doc, key, state, changed);
    if (rows.length === 0) {
      const empty = doc.createElement("li");
      empty.className = "state-entry empty";
      empty.textContent = "(empty)";
      list.appendChild(empty);
    } else {
      for (const row of rows) {
        list.appendChild(row);
      }
    }
    section.appendChild(list);
    container.appendChild(section);
  }
}
