import { ApiClient, Finding, SpecDocument } from "./api.js";
import { AutoComplete } from "./autocomplete.js";
import { debounce, Debounced } from "./debounce.js";

export const VALIDATE_DEBOUNCE_MS = 150;

const FIELDS = ["action", "anatomy", "tool", "safety", "comment"] as const;
type FieldName = (typeof FIELDS)[number];

interface StepRow {
  root: HTMLElement;
  inputs: Record<FieldName, HTMLInputElement>;
  findingsBox: HTMLElement;
}

/** The five-field step editor with live validation and page preview.
 *
 * Anatomy and tool fields complete against the catalog; editing any safety
 * field posts the whole draft spec for validation and renders each finding
 * under its step at the reported column. Everything shown is a service
 * response.
 */
export class StepEditor {
  readonly root: HTMLElement;
  readonly offlineBanner: HTMLElement;
  readonly previewBox: HTMLElement;
  private readonly headerFindings: HTMLElement;
  private rows: StepRow[] = [];
  private readonly validateSoon: Debounced<[]>;
  readonly title: HTMLInputElement;
  readonly completion: HTMLInputElement;

  constructor(
    container: HTMLElement,
    private readonly api: ApiClient,
    private readonly catalogRef: string = "golden_catalog.json",
  ) {
    this.root = container;
    this.offlineBanner = el("div", "offline-banner");
    this.offlineBanner.textContent =
      "Service unreachable: suggestions and validation paused, editing continues.";
    this.offlineBanner.hidden = true;
    this.root.appendChild(this.offlineBanner);

    const header = el("div", "spec-header");
    this.title = input("title", "Procedure title");
    this.completion = input("completion", "free and retrieve ... via pouch");
    header.append(label("Title", this.title), label("Completion", this.completion));
    this.headerFindings = el("div", "findings header-findings");
    header.appendChild(this.headerFindings);
    this.root.appendChild(header);

    const controls = el("div", "controls");
    const addButton = el("button", "add-step") as HTMLButtonElement;
    addButton.textContent = "Add step";
    addButton.addEventListener("click", () => this.addStep());
    const previewButton = el("button", "preview") as HTMLButtonElement;
    previewButton.textContent = "Preview";
    previewButton.addEventListener("click", () => void this.preview());
    controls.append(addButton, previewButton);
    this.root.appendChild(controls);

    this.previewBox = el("div", "preview-pages");
    this.root.appendChild(this.previewBox);

    this.validateSoon = debounce(() => void this.validate(), VALIDATE_DEBOUNCE_MS);
    this.title.addEventListener("input", () => this.validateSoon());
    this.completion.addEventListener("input", () => this.validateSoon());
    this.addStep();
  }

  addStep(): StepRow {
    const index = this.rows.length + 1;
    const root = el("section", "step");
    root.dataset.step = String(index);
    const heading = el("h3");
    heading.textContent = `Step ${index}`;
    root.appendChild(heading);
    const inputs = {} as Record<FieldName, HTMLInputElement>;
    for (const field of FIELDS) {
      const box = input(`${field}-${index}`, field);
      box.dataset.field = field;
      inputs[field] = box;
      root.appendChild(label(field, box));
      if (field === "anatomy" || field === "tool") {
        new AutoComplete(box, this.api, () => this.showOffline());
      }
      box.addEventListener("input", () => this.validateSoon());
      box.addEventListener("change", () => this.validateSoon());
    }
    const findingsBox = el("div", "findings");
    root.appendChild(findingsBox);
    const row: StepRow = { root, inputs, findingsBox };
    this.rows.push(row);
    this.root.insertBefore(root, this.previewBox);
    return row;
  }

  document(): SpecDocument {
    return {
      title: this.title.value,
      catalog: this.catalogRef,
      completion: this.completion.value,
      steps: this.rows.map((row) => ({
        action: row.inputs.action.value,
        anatomy: row.inputs.anatomy.value,
        tool: row.inputs.tool.value,
        safety: row.inputs.safety.value,
        comment: row.inputs.comment.value,
      })),
    };
  }

  async validate(): Promise<Finding[]> {
    let findings: Finding[];
    try {
      findings = await this.api.validateSpec(this.document());
    } catch {
      this.showOffline();
      return [];
    }
    this.offlineBanner.hidden = true;
    this.renderFindings(findings);
    return findings;
  }

  private renderFindings(findings: Finding[]): void {
    this.headerFindings.textContent = "";
    for (const row of this.rows) {
      row.findingsBox.textContent = "";
    }
    for (const finding of findings) {
      const item = el("div", "finding");
      item.textContent =
        finding.position != null
          ? `column ${finding.position}: ${finding.message}`
          : finding.message;
      if (finding.position != null) {
        item.dataset.column = String(finding.position);
      }
      if (finding.step != null && finding.step >= 1 && finding.step <= this.rows.length) {
        item.dataset.step = String(finding.step);
        this.rows[finding.step - 1].findingsBox.appendChild(item);
      } else {
        this.headerFindings.appendChild(item);
      }
    }
  }

  async preview(): Promise<void> {
    this.previewBox.textContent = "";
    let pages;
    try {
      pages = await this.api.instructionPages(this.document());
    } catch {
      this.showOffline();
      return;
    }
    this.offlineBanner.hidden = true;
    for (const page of pages) {
      const section = el("section", "page");
      section.dataset.step = String(page.stepIndex);
      const h = el("h4");
      h.textContent = page.heading;
      const body = el("p");
      body.textContent = page.body;
      section.append(h, body);
      for (const callout of page.callouts) {
        const quote = el("blockquote", "callout");
        quote.textContent = callout;
        section.appendChild(quote);
      }
      this.previewBox.appendChild(section);
    }
  }

  private showOffline(): void {
    this.offlineBanner.hidden = false;
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  return node;
}

function input(id: string, placeholder: string): HTMLInputElement {
  const node = document.createElement("input");
  node.type = "text";
  node.id = id;
  node.placeholder = placeholder;
  return node;
}

function label(text: string, control: HTMLElement): HTMLElement {
  const wrap = el("label", "field");
  const caption = el("span");
  caption.textContent = text;
  wrap.append(caption, control);
  return wrap;
}
