/**
 * The single-page app: login, render the redacted view, edit editable
 * cells, and poll for other users' changes every two seconds.
 *
 * The formula bar mirrors the selected cell's `contents` field and is
 * empty whenever the server withheld contents; the client never
 * reconstructs or evaluates formulas.
 */

import { ApiClient, CellView, RedactedView, Delta } from "./protocol.js";
import { renderView } from "./grid.js";

export const POLL_INTERVAL_MS = 2_000;

export interface AppElements {
  loginForm: HTMLElement;
  userInput: HTMLInputElement;
  passwordInput: HTMLInputElement;
  loginButton: HTMLElement;
  workspace: HTMLElement;
  gridContainer: HTMLElement;
  formulaBar: HTMLInputElement;
  selectionLabel: HTMLElement;
  status: HTMLElement;
}

/** Builds the static page skeleton; index.html calls this via main.ts and
 * the tests call it against a jsdom document. */
export function createAppDom(doc: Document, root: HTMLElement): AppElements {
  root.innerHTML = `
    <section id="login">
      <label>user <input id="user" autocomplete="username"></label>
      <label>password <input id="password" type="password"></label>
      <button id="login-button">sign in</button>
    </section>
    <section id="workspace" hidden>
      <div id="toolbar">
        <span id="selection"></span>
        <input id="formula-bar" disabled>
      </div>
      <div id="grid"></div>
    </section>
    <div id="status" role="status"></div>
  `;
  const get = (id: string) => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  };
  return {
    loginForm: get("login"),
    userInput: get("user") as HTMLInputElement,
    passwordInput: get("password") as HTMLInputElement,
    loginButton: get("login-button"),
    workspace: get("workspace"),
    gridContainer: get("grid"),
    formulaBar: get("formula-bar") as HTMLInputElement,
    selectionLabel: get("selection"),
    status: get("status"),
  };
}

export class App {
  readonly api: ApiClient;
  private readonly doc: Document;
  private readonly el: AppElements;
  session: string | null = null;
  revision = 0;
  view: RedactedView | null = null;
  selected: { sheet: string; cell: CellView } | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(doc: Document, elements: AppElements, api: ApiClient) {
    this.doc = doc;
    this.el = elements;
    this.api = api;
    this.el.loginButton.addEventListener("click", () => {
      void this.login(this.el.userInput.value, this.el.passwordInput.value);
    });
    this.el.formulaBar.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter" && this.selected) {
        void this.submitEdit(this.selected.sheet, this.selected.cell.addr, this.el.formulaBar.value);
      }
    });
  }

  setStatus(text: string): void {
    this.el.status.textContent = text;
  }

  async login(user: string, password: string): Promise<boolean> {
    const response = await this.api.post({ kind: "login", user, password });
    if (!response.ok) {
      this.setStatus(`login failed: ${response.error}`);
      return false;
    }
    this.session = response.session as string;
    this.revision = response.revision as number;
    this.el.loginForm.setAttribute("hidden", "");
    this.el.workspace.removeAttribute("hidden");
    this.setStatus(`signed in as ${user} (${String(response.role)})`);
    await this.refresh();
    return true;
  }

  /** Full view fetch; used after login and whenever a poll sees news. */
  async refresh(): Promise<void> {
    if (!this.session) return;
    const response = await this.api.post({ kind: "get_view", session: this.session });
    if (!response.ok) {
      this.setStatus(`view failed: ${response.error}`);
      return;
    }
    this.revision = response.revision as number;
    this.view = response.view as RedactedView;
    this.renderGrid();
  }

  private renderGrid(): void {
    if (!this.view) return;
    renderView(this.doc, this.el.gridContainer, this.view, {
      onSelect: (sheet, cell) => this.select(sheet, cell),
    });
    if (this.selected) {
      const sheetView = this.view.sheets.find((s) => s.name === this.selected!.sheet);
      const cell = sheetView?.cells.find((c) => c.addr === this.selected!.cell.addr);
      if (cell) {
        this.select(this.selected.sheet, cell);
      } else {
        this.selected = null;
        this.el.formulaBar.value = "";
        this.el.formulaBar.disabled = true;
        this.el.selectionLabel.textContent = "";
      }
    }
  }

  select(sheet: string, cell: CellView): void {
    this.selected = { sheet, cell };
    this.el.selectionLabel.textContent = `${sheet}!${cell.addr}`;
    // Contents only when the server granted them; otherwise the bar stays
    // empty no matter what the cell computes to.
    this.el.formulaBar.value = cell.contents ?? "";
    this.el.formulaBar.disabled = !cell.editable;
  }

  async submitEdit(sheet: string, addr: string, content: string): Promise<boolean> {
    if (!this.session || this.api.busy("edit")) return false;
    const response = await this.api.post({
      kind: "edit",
      session: this.session,
      addr: `${sheet}!${addr}`,
      content,
    });
    if (!response.ok) {
      this.setStatus(`edit rejected: ${response.error}`);
      return false;
    }
    this.revision = response.revision as number;
    this.applyDeltas(response.deltas as Delta[], sheet, addr, content);
    this.setStatus(`saved ${sheet}!${addr}`);
    return true;
  }

  private applyDeltas(deltas: Delta[], editedSheet: string, editedAddr: string, content: string): void {
    if (!this.view) return;
    for (const delta of deltas) {
      const [sheetName, a1] = splitAddress(delta.addr);
      const sheetView = this.view.sheets.find((s) => s.name === sheetName);
      if (!sheetView) continue;
      const cell = sheetView.cells.find((c) => c.addr === a1);
      if (cell) {
        cell.display = delta.display;
        if (sheetName === editedSheet && a1 === editedAddr && cell.contents !== undefined) {
          cell.contents = content;
        }
      }
    }
    this.renderGrid();
  }

  /** One poll step: cheap no-op while nothing changed on the server. */
  async pollOnce(): Promise<void> {
    if (!this.session || this.api.busy("get_view")) return;
    const response = await this.api.post({
      kind: "get_view",
      session: this.session,
      since: this.revision,
    });
    if (!response.ok) {
      this.setStatus(`poll failed: ${response.error}`);
      return;
    }
    if (response.unchanged) return;
    this.revision = response.revision as number;
    this.view = response.view as RedactedView;
    this.renderGrid();
  }

  startPolling(): void {
    if (this.pollTimer === null) {
      this.pollTimer = setInterval(() => void this.pollOnce(), POLL_INTERVAL_MS);
    }
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }
}

export function splitAddress(full: string): [string, string] {
  const bang = full.lastIndexOf("!");
  if (bang < 0) return ["", full];
  let sheet = full.slice(0, bang);
  if (sheet.startsWith("'") && sheet.endsWith("'")) {
    sheet = sheet.slice(1, -1);
  }
  return [sheet, full.slice(bang + 1)];
}
