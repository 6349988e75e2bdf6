import { ApiClient, ApiError, SessionReport } from "./api.js";
import { galleryLabel, parseSnapshotName } from "./snapshotName.js";

/** Session review: proficiency banner, achievements, snapshot gallery.
 *
 * Gallery cards are ordered by violation time and labeled purely by parsing
 * the snapshot file name (time, error type, measured value).
 */
export class ReportView {
  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async load(sessionId: string): Promise<void> {
    this.root.textContent = "";
    let report: SessionReport;
    try {
      report = await this.api.report(sessionId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.renderNotFound(sessionId);
        return;
      }
      this.renderUnavailable();
      return;
    }
    this.render(sessionId, report);
  }

  private renderNotFound(sessionId: string): void {
    const box = el("div", "not-found");
    box.textContent = `No session '${sessionId}' was found.`;
    this.root.appendChild(box);
  }

  private renderUnavailable(): void {
    const box = el("div", "offline-banner");
    box.textContent = "Service unreachable: the report cannot be loaded right now.";
    this.root.appendChild(box);
  }

  private render(sessionId: string, report: SessionReport): void {
    const banner = el("div", report.proficient ? "banner proficient" : "banner not-proficient");
    banner.textContent = report.proficient
      ? "Proficient: no safety violations and a complete list of achievements."
      : `Not yet proficient: ${report.violations.length} violation(s), ` +
        `${report.achievements.length} achievement(s).`;
    this.root.appendChild(banner);

    const title = el("h2");
    title.textContent = report.specTitle;
    this.root.appendChild(title);

    const achievements = el("ul", "achievements");
    for (const a of report.achievements) {
      const item = el("li");
      item.textContent = `[${(a.t / 1000).toFixed(1)} s] ${a.label}`;
      achievements.appendChild(item);
    }
    this.root.appendChild(achievements);

    const gallery = el("div", "gallery");
    const ordered = [...report.violations].sort((a, b) => a.t - b.t);
    for (const violation of ordered) {
      const svgName = `${violation.snapshotBaseName}.svg`;
      const parsed = parseSnapshotName(svgName);
      if (!parsed) {
        continue; // names outside the convention are never displayed
      }
      const card = el("figure", "card");
      card.dataset.errorType = parsed.errorType;
      const img = document.createElement("img");
      img.src = this.api.snapshotUrl(sessionId, svgName);
      img.alt = svgName;
      const caption = el("figcaption");
      caption.textContent = galleryLabel(parsed);
      card.append(img, caption);
      gallery.appendChild(card);
    }
    this.root.appendChild(gallery);
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  return node;
}
