/** Recording fetch mock: tests declare exactly what the service would say,
 * so anything the UI renders is traceable to a mocked response. */

import { vi } from "vitest";

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export type Handler = (url: string, init?: RequestInit) => { status?: number; json?: unknown } | undefined;

export function installFetchMock(handler: Handler): RecordedCall[] {
  const calls: RecordedCall[] = [];
  const mock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    let body: unknown = undefined;
    if (typeof init?.body === "string") {
      try {
        body = JSON.parse(init.body);
      } catch {
        body = init.body;
      }
    }
    calls.push({ url, method, body });
    const result = handler(url, init);
    if (result === undefined) {
      throw new TypeError(`unhandled request: ${method} ${url}`);
    }
    const status = result.status ?? 200;
    return {
      ok: status >= 200 && status < 300,
      status,
      statusText: String(status),
      json: async () => result.json,
    } as Response;
  });
  vi.stubGlobal("fetch", mock);
  return calls;
}

export const GOLDEN_NAMES = [
  "Clip Applier",
  "Common bile duct",
  "Curved Maryland Dissector",
  "Cystic artery",
  "Cystic duct",
  "Fatty tissue over the cystic ductus and cystic artery",
  "Gallbladder",
  "Grasper",
  "Scissors",
  "Specimen pouch",
];

export function completionsFor(prefix: string): string[] {
  const p = prefix.toLowerCase();
  return GOLDEN_NAMES.filter((n) => n.toLowerCase().startsWith(p)).sort((a, b) =>
    a.toLowerCase() < b.toLowerCase() ? -1 : 1,
  );
}
