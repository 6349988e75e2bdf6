import { ApiClient } from "./api.js";
import { debounce, Debounced } from "./debounce.js";

export const COMPLETION_DEBOUNCE_MS = 150;

/** Live auto-completion against the catalog for one text input.
 *
 * Keystrokes are debounced; responses arriving out of order are dropped
 * (last request wins). A field whose text has zero completions and no exact
 * case-insensitive match is marked `unresolved`.
 */
export class AutoComplete {
  readonly list: HTMLUListElement;
  private request = 0;
  private readonly query: Debounced<[string]>;

  constructor(
    private readonly input: HTMLInputElement,
    private readonly api: ApiClient,
    private readonly onOffline?: () => void,
  ) {
    this.list = document.createElement("ul");
    this.list.className = "suggestions";
    this.list.hidden = true;
    input.insertAdjacentElement("afterend", this.list);
    this.query = debounce((text: string) => void this.fetchSuggestions(text), COMPLETION_DEBOUNCE_MS);
    input.addEventListener("input", () => this.query(this.input.value));
  }

  private async fetchSuggestions(text: string): Promise<void> {
    const id = ++this.request;
    let names: string[];
    try {
      names = await this.api.complete(text);
    } catch {
      this.onOffline?.();
      return; // offline: keep editing, no suggestions
    }
    if (id !== this.request) {
      return; // a newer request already resolved
    }
    this.render(text, names);
  }

  private render(text: string, names: string[]): void {
    this.list.textContent = "";
    const exact = names.some((n) => n.toLowerCase() === text.toLowerCase());
    this.input.classList.toggle("unresolved", text.length > 0 && names.length === 0 && !exact);
    if (names.length === 0 || text.length === 0) {
      this.list.hidden = true;
      return;
    }
    for (const name of names) {
      const item = document.createElement("li");
      item.textContent = name;
      item.addEventListener("mousedown", (ev) => {
        ev.preventDefault();
        this.select(name);
      });
      this.list.appendChild(item);
    }
    this.list.hidden = false;
  }

  select(name: string): void {
    this.input.value = name;
    this.input.classList.remove("unresolved");
    this.list.hidden = true;
    this.input.dispatchEvent(new Event("change", { bubbles: true }));
  }

  suggestions(): string[] {
    return Array.from(this.list.querySelectorAll("li"), (li) => li.textContent ?? "");
  }
}
