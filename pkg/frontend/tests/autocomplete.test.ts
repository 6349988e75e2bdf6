import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { AutoComplete, COMPLETION_DEBOUNCE_MS } from "../src/autocomplete.js";
import { completionsFor, installFetchMock, RecordedCall } from "./mockService.js";

function setup(handler?: Parameters<typeof installFetchMock>[0]): {
  input: HTMLInputElement;
  ac: AutoComplete;
  calls: RecordedCall[];
  offline: () => void;
} {
  const calls = installFetchMock(
    handler ??
      ((url) => {
        const prefix = decodeURIComponent(url.split("prefix=")[1] ?? "");
        return { json: completionsFor(prefix) };
      }),
  );
  document.body.innerHTML = "";
  const input = document.createElement("input");
  document.body.appendChild(input);
  const offline = vi.fn();
  const ac = new AutoComplete(input, new ApiClient(""), offline);
  return { input, ac, calls, offline };
}

function type(input: HTMLInputElement, text: string): void {
  input.value = text;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

async function settle(ms = COMPLETION_DEBOUNCE_MS): Promise<void> {
  await vi.advanceTimersByTimeAsync(ms);
  await vi.waitFor(() => {}); // flush pending microtasks
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
  vi.unstubAllGlobals();
});

describe("autocomplete", () => {
  it("typing 'Com' surfaces 'Common bile duct'", async () => {
    const { input, ac } = setup();
    type(input, "Com");
    await settle();
    expect(ac.suggestions()).toEqual(["Common bile duct"]);
    expect(ac.list.hidden).toBe(false);
  });

  it("debounces keystrokes into one request", async () => {
    const { input, calls } = setup();
    type(input, "C");
    await vi.advanceTimersByTimeAsync(50);
    type(input, "Co");
    await vi.advanceTimersByTimeAsync(50);
    type(input, "Com");
    await settle();
    expect(calls.length).toBe(1);
    expect(calls[0].url).toContain("prefix=Com");
  });

  it("selecting a suggestion fills the field", async () => {
    const { input, ac } = setup();
    type(input, "Com");
    await settle();
    ac.select("Common bile duct");
    expect(input.value).toBe("Common bile duct");
    expect(ac.list.hidden).toBe(true);
  });

  it("marks a field with no completions and no exact match as unresolved", async () => {
    const { input } = setup();
    type(input, "Gallblader");
    await settle();
    expect(input.classList.contains("unresolved")).toBe(true);
    type(input, "Gallbladder");
    await settle();
    expect(input.classList.contains("unresolved")).toBe(false);
  });

  it("drops out-of-order responses (last write wins)", async () => {
    let release: (() => void) | null = null;
    const slowFirst = new Promise<void>((resolve) => {
      release = resolve;
    });
    let count = 0;
    const calls = installFetchMock(() => undefined);
    const mock = vi.fn(async (input: RequestInfo | URL) => {
      const url = String(input);
      const prefix = decodeURIComponent(url.split("prefix=")[1] ?? "");
      count += 1;
      if (count === 1) {
        await slowFirst; // first request resolves after the second
      }
      return {
        ok: true,
        status: 200,
        statusText: "200",
        json: async () => completionsFor(prefix),
      } as Response;
    });
    vi.stubGlobal("fetch", mock);
    void calls;

    document.body.innerHTML = "";
    const input = document.createElement("input");
    document.body.appendChild(input);
    const ac = new AutoComplete(input, new ApiClient(""));

    type(input, "Cy");
    await vi.advanceTimersByTimeAsync(COMPLETION_DEBOUNCE_MS);
    type(input, "Cystic d");
    await vi.advanceTimersByTimeAsync(COMPLETION_DEBOUNCE_MS);
    release!();
    await vi.waitFor(() => {
      expect(ac.suggestions()).toEqual(["Cystic duct"]);
    });
  });

  it("signals offline and keeps editing when the service is unreachable", async () => {
    const { input, ac, offline } = setup(() => undefined);
    type(input, "Com");
    await settle();
    expect(offline).toHaveBeenCalled();
    expect(ac.suggestions()).toEqual([]);
    type(input, "Common bile duct"); // editing continues
    expect(input.value).toBe("Common bile duct");
  });
});
