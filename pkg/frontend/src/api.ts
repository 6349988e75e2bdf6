/** Typed client for the tipsmon HTTP service. Every piece of data the UI
 * displays comes through this module; nothing is synthesized client-side. */

export interface Finding {
  message: string;
  step: number | null;
  position: number | null;
}

export interface InstructionPage {
  stepIndex: number;
  heading: string;
  body: string;
  callouts: string[];
}

export interface Achievement {
  stepIndex: number;
  t: number;
  label: string;
}

export interface Violation {
  t: number;
  errorType: string;
  measured: number | number[];
  threshold: number | number[];
  unit: string;
  subjectIds: string[];
  snapshotBaseName: string;
}

export interface SessionReport {
  sessionId: string;
  specTitle: string;
  achievements: Achievement[];
  violations: Violation[];
  proficient: boolean;
  snapshotDir: string;
  messageText: string;
}

export interface SpecDocument {
  title: string;
  catalog: string;
  completion: string;
  steps: Array<{
    action: string;
    anatomy: string;
    tool: string;
    safety: string;
    comment: string;
  }>;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    throw new ApiError(resp.status, `${resp.status} ${resp.statusText}`);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async complete(prefix: string): Promise<string[]> {
    const url = `${this.baseUrl}/catalog/complete?prefix=${encodeURIComponent(prefix)}`;
    return asJson<string[]>(await fetch(url));
  }

  async validateSpec(doc: SpecDocument): Promise<Finding[]> {
    const resp = await fetch(`${this.baseUrl}/spec/validate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    const body = await asJson<{ findings: Finding[] }>(resp);
    return body.findings;
  }

  async instructionPages(doc: SpecDocument): Promise<InstructionPage[]> {
    const resp = await fetch(`${this.baseUrl}/spec/instructions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    const body = await asJson<{ pages: InstructionPage[] }>(resp);
    return body.pages;
  }

  async report(sessionId: string): Promise<SessionReport> {
    const url = `${this.baseUrl}/session/${encodeURIComponent(sessionId)}/report`;
    return asJson<SessionReport>(await fetch(url));
  }

  snapshotUrl(sessionId: string, name: string): string {
    return `${this.baseUrl}/session/${encodeURIComponent(sessionId)}/snapshots/${name}`;
  }
}
