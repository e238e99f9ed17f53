// Scripted end-to-end run against the real mock-backed service: patient
// selection, a three-turn interview, a fallback badge, and a post-refresh
// history match, all within the 30-second budget.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController, type ChatViewState, type View } from "../src/state.js";

const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");

class RenderLog implements View {
  snapshots: ChatViewState[] = [];
  render(state: ChatViewState): void {
    this.snapshots.push(structuredClone(state));
  }
  get last(): ChatViewState {
    const snapshot = this.snapshots.at(-1);
    if (!snapshot) throw new Error("nothing rendered");
    return snapshot;
  }
}

function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolvePort(port));
      } else {
        reject(new Error("no port assigned"));
      }
    });
  });
}

async function waitForServer(base: string, deadlineMs: number): Promise<void> {
  const started = Date.now();
  while (Date.now() - started < deadlineMs) {
    try {
      const response = await fetch(`${base}/patients`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not come up in time");
}

let server: ChildProcess | null = null;
let base = "";
const startedAt = Date.now();

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  const configDir = mkdtempSync(join(tmpdir(), "aipatient-e2e-"));
  const configPath = join(configDir, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      kg_path: join(REPO_ROOT, "fixtures", "cohort.aipkg"),
      adapter: { kind: "mock" },
      listen_host: "127.0.0.1",
      listen_port: port,
      expose_trace: true,
      random_seed: 7,
    }),
  );
  server = spawn("aipatient", ["serve", "--config", configPath], {
    cwd: REPO_ROOT,
    stdio: "ignore",
  });
  await waitForServer(base, 20_000);
}, 25_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("webchat against the live mock-backed service", () => {
  it("completes selection, a 3-turn interview, a fallback, and a refresh match", async () => {
    const view = new RenderLog();
    const controller = new ChatController(new ApiClient(base), view);

    // Patient selection from the live roster.
    await controller.loadPatients();
    expect(view.last.patients.length).toBe(20);
    const patient = view.last.patients.find((row) => row.subject_id === 23709);
    expect(patient).toBeDefined();
    controller.selectPatient(patient!);
    expect(controller.canStart).toBe(true);
    await controller.startInterview();
    expect(view.last.session).not.toBeNull();

    // Three-turn interview; every patient bubble is the server's bytes.
    const questions = [
      "Do you have any allergies?",
      "What symptoms do you have?",
      "How old are you?",
    ];
    for (const question of questions) {
      await controller.send(question);
      expect(view.last.sendDisabled).toBe(false);
    }
    const messages = view.last.messages;
    expect(messages).toHaveLength(6);
    expect(messages[1]!.text).toContain("SSRI medications");
    expect(messages[3]!.text).toContain("black and bloody stools");
    expect(messages[5]!.text).toContain("67");
    expect(view.last.inspector?.final_query).toContain("SUBJECT_ID: 23709");

    // Send was disabled at some point during each in-flight turn.
    const disabledSnapshots = view.snapshots.filter((s) => s.sendDisabled).length;
    expect(disabledSnapshots).toBeGreaterThanOrEqual(questions.length);

    // Post-refresh: a fresh controller resuming the session must mirror the
    // server history exactly.
    const reloadedView = new RenderLog();
    const reloaded = new ChatController(new ApiClient(base), reloadedView);
    await reloaded.resumeSession(view.last.session!);
    expect(reloadedView.last.messages).toEqual(messages);
  }, 20_000);

  it("renders a fallback badge when the patient has no grounded answer", async () => {
    const view = new RenderLog();
    const controller = new ChatController(new ApiClient(base), view);
    await controller.loadPatients();
    // Patient 20012 has no recorded allergies, so an open allergy question
    // exhausts the checker loop.
    const patient = view.last.patients.find((row) => row.subject_id === 20012);
    controller.selectPatient(patient!);
    await controller.startInterview();
    await controller.send("What are you allergic to?");
    const last = view.last.messages.at(-1)!;
    expect(last.text).toBe("I don't know");
    expect(last.fallback).toBe(true);
    expect(view.last.inspector?.final_query).toBeNull();
    expect(view.last.inspector?.iterations_used).toBe(3);
  }, 15_000);

  it("finished inside the time budget", () => {
    expect(Date.now() - startedAt).toBeLessThan(30_000);
  });
});
