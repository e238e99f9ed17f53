import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController, type ChatViewState, type View } from "../src/state.js";
import type { PatientRow } from "../src/types.js";

const ROW: PatientRow = {
  subject_id: 1,
  hadm_id: 2,
  gender: "F",
  age: 60,
  ethnicity: "White",
  religion: "Christian",
  marital_status: "Single",
  admission_type: "Emergency",
  admission_location: "Referral",
  discharge_location: "Home",
  insurance: "Private",
  duration_days: 3,
};

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

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

type Route = (url: string, init?: RequestInit) => Response | Promise<Response>;

function makeController(route: Route): { controller: ChatController; view: RenderLog } {
  const view = new RenderLog();
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) =>
    route(String(input), init)) as typeof fetch;
  const controller = new ChatController(new ApiClient("http://test", fetchFn), view);
  return { controller, view };
}

const SESSION = {
  session_id: "abc",
  subject_id: 1,
  hadm_id: 2,
  personality: {
    openness: false, conscientiousness: false, extraversion: false,
    agreeableness: false, neuroticism: false, index: 0, descriptors: [],
  },
};

describe("patient picker", () => {
  it("loads the roster and enables start after selection", async () => {
    const { controller, view } = makeController((url) => {
      if (url.endsWith("/patients")) return jsonResponse([ROW]);
      throw new Error(`unexpected ${url}`);
    });
    await controller.loadPatients();
    expect(view.last.patients).toHaveLength(1);
    expect(controller.canStart).toBe(false);
    controller.selectPatient(ROW);
    expect(controller.canStart).toBe(true);
  });

  it("reports an empty roster distinctly from an error", async () => {
    const { controller, view } = makeController(() => jsonResponse([]));
    await controller.loadPatients();
    expect(view.last.rosterLoaded).toBe(true);
    expect(view.last.patients).toHaveLength(0);
    expect(view.last.rosterError).toBeNull();
  });

  it("shows a banner with retry on network failure, then recovers", async () => {
    let failing = true;
    const { controller, view } = makeController(() => {
      if (failing) throw new Error("connection refused");
      return jsonResponse([ROW]);
    });
    await controller.loadPatients();
    expect(view.last.rosterError).toContain("network failure");
    failing = false;
    await controller.loadPatients();
    expect(view.last.rosterError).toBeNull();
    expect(view.last.patients).toHaveLength(1);
  });
});

describe("sending messages", () => {
  function interviewController(onMessage: Route) {
    return makeController((url, init) => {
      if (url.endsWith("/patients")) return jsonResponse([ROW]);
      if (url.endsWith("/sessions")) return jsonResponse(SESSION, 201);
      if (url.endsWith("/message")) return onMessage(url, init);
      if (url.endsWith("/history")) return jsonResponse({ summary: "", turns: [] });
      throw new Error(`unexpected ${url}`);
    });
  }

  async function startedController(onMessage: Route) {
    const made = interviewController(onMessage);
    made.controller.selectPatient(ROW);
    await made.controller.startInterview();
    return made;
  }

  it("renders the optimistic bubble, then the patient's exact bytes", async () => {
    const utterance = "Speaking plainly: chest pain; nausea. That's it.";
    const { controller, view } = await startedController(() =>
      jsonResponse({ utterance, fallback: false, trace: null }),
    );
    await controller.send("What symptoms do you have?");
    const messages = view.last.messages;
    expect(messages).toHaveLength(2);
    expect(messages[0]).toMatchObject({ who: "investigator", text: "What symptoms do you have?" });
    expect(messages[1]!.who).toBe("patient");
    expect(messages[1]!.text).toBe(utterance); // byte-identical to the server response
  });

  it("disables send exactly while the turn is in flight", async () => {
    let release!: (value: Response) => void;
    const gate = new Promise<Response>((resolve) => (release = resolve));
    const { controller, view } = await startedController(() => gate);
    const pending = controller.send("hello?");
    const during = view.last;
    expect(during.sendDisabled).toBe(true);
    // A second send while in flight is ignored entirely.
    await controller.send("second");
    expect(view.last.messages.filter((m) => m.who === "investigator")).toHaveLength(1);
    release(jsonResponse({ utterance: "hi", fallback: false, trace: null }));
    await pending;
    expect(view.last.sendDisabled).toBe(false);
    expect(view.last.messages).toHaveLength(2);
  });

  it("marks fallback turns with a badge flag", async () => {
    const { controller, view } = await startedController(() =>
      jsonResponse({ utterance: "I don't know", fallback: true, trace: null }),
    );
    await controller.send("What are you allergic to?");
    const patient = view.last.messages[1]!;
    expect(patient.fallback).toBe(true);
    expect(patient.text).toBe("I don't know");
  });

  it("handles a 409 busy turn by dropping the optimistic bubble", async () => {
    const { controller, view } = await startedController(() =>
      jsonResponse({ code: "session_busy", detail: "turn in flight" }, 409),
    );
    await controller.send("too fast");
    expect(view.last.messages).toHaveLength(0);
    expect(view.last.banner).toContain("still answering");
    expect(view.last.sendDisabled).toBe(false);
  });
});

describe("inspector", () => {
  const trace = {
    abstraction: "What symptoms does the patient have?",
    schema_subset: { nodes: ["Symptom"], relationships: ["HAS_SYMPTOM"] },
    final_query: "MATCH ...",
    iterations_used: 1,
  };

  it("toggles when a trace is present", async () => {
    const { controller, view } = makeController((url) => {
      if (url.endsWith("/sessions")) return jsonResponse(SESSION, 201);
      if (url.endsWith("/message"))
        return jsonResponse({ utterance: "x", fallback: false, trace });
      return jsonResponse([ROW]);
    });
    controller.selectPatient(ROW);
    await controller.startInterview();
    await controller.send("q");
    expect(view.last.inspector).toEqual(trace);
    controller.toggleInspector();
    expect(view.last.inspectorVisible).toBe(true);
    controller.toggleInspector();
    expect(view.last.inspectorVisible).toBe(false);
  });

  it("stays hidden when the server suppresses traces", async () => {
    const { controller, view } = makeController((url) => {
      if (url.endsWith("/sessions")) return jsonResponse(SESSION, 201);
      if (url.endsWith("/message"))
        return jsonResponse({ utterance: "x", fallback: false, trace: null });
      return jsonResponse([ROW]);
    });
    controller.selectPatient(ROW);
    await controller.startInterview();
    await controller.send("q");
    controller.toggleInspector();
    expect(view.last.inspectorVisible).toBe(false);
  });
});

describe("history refresh", () => {
  it("rebuilds the message list from the server verbatim", async () => {
    const turns = [
      {
        question: "Do you have any allergies?",
        patient_response: "Only penicillin.",
        fallback: false,
        graph_query: "MATCH ...",
        result_columns: ["al.NAME"],
        result_rows: [["penicillin"]],
        checker_iterations: 1,
      },
      {
        question: "Anything else?",
        patient_response: "I don't know",
        fallback: true,
        graph_query: null,
        result_columns: null,
        result_rows: null,
        checker_iterations: 3,
      },
    ];
    const { controller, view } = makeController((url) => {
      if (url.endsWith("/history")) return jsonResponse({ summary: "s", turns });
      if (url.endsWith("/sessions")) return jsonResponse(SESSION, 201);
      return jsonResponse([ROW]);
    });
    controller.selectPatient(ROW);
    await controller.startInterview();
    await controller.refreshHistory();
    const messages = view.last.messages;
    expect(messages.map((m) => m.text)).toEqual([
      "Do you have any allergies?",
      "Only penicillin.",
      "Anything else?",
      "I don't know",
    ]);
    expect(messages[3]!.fallback).toBe(true);
  });
});
