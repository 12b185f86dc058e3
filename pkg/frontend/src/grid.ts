/**
 * Grid rendering: a plain table per sheet. Editable cells get a class and
 * a title hint; everything else is read-only display text. No formula
 * evaluation happens here or anywhere in the client: the server is the
 * only evaluator, and display strings arrive precomputed.
 */

import type { RedactedView, SheetView, CellView } from "./protocol.js";

const COLUMNS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

export function columnLabel(index: number): string {
  let n = index;
  let label = "";
  while (n > 0) {
    const rem = (n - 1) % 26;
    label = COLUMNS[rem] + label;
    n = Math.floor((n - 1) / 26);
  }
  return label;
}

export function parseA1(addr: string): { col: number; row: number } {
  const match = /^([A-Z]+)([0-9]+)$/.exec(addr);
  if (!match) {
    throw new Error(`not an A1 address: ${addr}`);
  }
  let col = 0;
  for (const ch of match[1]) {
    col = col * 26 + (ch.charCodeAt(0) - 64);
  }
  return { col, row: parseInt(match[2], 10) };
}

export interface GridCallbacks {
  onSelect(sheet: string, cell: CellView): void;
}

function sheetExtent(sheet: SheetView): { cols: number; rows: number } {
  let cols = 1;
  let rows = 1;
  for (const cell of sheet.cells) {
    const { col, row } = parseA1(cell.addr);
    cols = Math.max(cols, col);
    rows = Math.max(rows, row);
  }
  return { cols, rows };
}

export function renderSheet(
  doc: Document,
  sheet: SheetView,
  callbacks: GridCallbacks,
): HTMLTableElement {
  const byAddr = new Map(sheet.cells.map((c) => [c.addr, c]));
  const { cols, rows } = sheetExtent(sheet);
  const table = doc.createElement("table");
  table.className = "grid";
  table.dataset.sheet = sheet.name;

  const header = doc.createElement("tr");
  header.appendChild(doc.createElement("th"));
  for (let c = 1; c <= cols; c++) {
    const th = doc.createElement("th");
    th.textContent = columnLabel(c);
    header.appendChild(th);
  }
  table.appendChild(header);

  for (let r = 1; r <= rows; r++) {
    const tr = doc.createElement("tr");
    const rowHead = doc.createElement("th");
    rowHead.textContent = String(r);
    tr.appendChild(rowHead);
    for (let c = 1; c <= cols; c++) {
      const addr = `${columnLabel(c)}${r}`;
      const cell = byAddr.get(addr);
      const td = doc.createElement("td");
      td.dataset.addr = addr;
      if (cell) {
        td.textContent = cell.display;
        if (cell.editable) {
          td.classList.add("editable");
          td.title = "editable";
        }
        td.addEventListener("click", () => callbacks.onSelect(sheet.name, cell));
      } else {
        td.classList.add("void");
      }
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  return table;
}

export function renderView(
  doc: Document,
  container: HTMLElement,
  view: RedactedView,
  callbacks: GridCallbacks,
): void {
  container.textContent = "";
  for (const sheet of view.sheets) {
    const caption = doc.createElement("h2");
    caption.textContent = sheet.name;
    container.appendChild(caption);
    container.appendChild(renderSheet(doc, sheet, callbacks));
  }
}
