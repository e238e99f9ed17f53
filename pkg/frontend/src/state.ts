// View-model for the chat UI. All state changes flow through the controller
// and are pushed to a View after every mutation; the server is the source of
// truth for conversation content, and patient bubbles always carry the
// server's utterance bytes unchanged.

import { ApiClient, ApiRequestError } from "./api.js";
import type {
  PatientRow,
  PersonalityTraits,
  SessionDescriptor,
  Trace,
} from "./types.js";

export interface ChatMessage {
  who: "investigator" | "patient";
  text: string;
  fallback: boolean;
}

export interface ChatViewState {
  patients: PatientRow[];
  rosterLoaded: boolean;
  rosterError: string | null;
  selected: PatientRow | null;
  personality: PersonalityTraits;
  session: SessionDescriptor | null;
  messages: ChatMessage[];
  sendDisabled: boolean;
  inspectorVisible: boolean;
  inspector: Trace | null;
  banner: string | null;
}

export interface View {
  render(state: ChatViewState): void;
}

const NEUTRAL_TRAITS: PersonalityTraits = {
  openness: false,
  conscientiousness: false,
  extraversion: false,
  agreeableness: false,
  neuroticism: false,
};

export class ChatController {
  readonly state: ChatViewState = {
    patients: [],
    rosterLoaded: false,
    rosterError: null,
    selected: null,
    personality: { ...NEUTRAL_TRAITS },
    session: null,
    messages: [],
    sendDisabled: false,
    inspectorVisible: false,
    inspector: null,
    banner: null,
  };

  private inFlight = false;

  constructor(
    private readonly api: ApiClient,
    private readonly view: View,
  ) {}

  private push(): void {
    this.view.render(this.state);
  }

  get canStart(): boolean {
    return this.state.selected !== null && this.state.session === null;
  }

  async loadPatients(): Promise<void> {
    this.state.rosterError = null;
    this.push();
    try {
      this.state.patients = await this.api.listPatients();
      this.state.rosterLoaded = true;
    } catch (error) {
      this.state.rosterError = describe(error);
    }
    this.push();
  }

  selectPatient(row: PatientRow): void {
    this.state.selected = row;
    this.push();
  }

  setTrait(trait: keyof PersonalityTraits, high: boolean): void {
    this.state.personality[trait] = high;
    this.push();
  }

  async startInterview(): Promise<void> {
    if (!this.state.selected) {
      return;
    }
    this.state.banner = null;
    try {
      this.state.session = await this.api.createSession(
        this.state.selected.subject_id,
        this.state.selected.hadm_id,
        this.state.personality,
      );
      this.state.messages = [];
      this.state.inspector = null;
      this.state.inspectorVisible = false;
    } catch (error) {
      this.state.banner = describe(error);
    }
    this.push();
  }

  /** Reattach to an existing session (page reload). The message list is
   * rebuilt from the server history, which is authoritative. */
  async resumeSession(session: SessionDescriptor): Promise<void> {
    this.state.session = session;
    await this.refreshHistory();
  }

  async send(text: string): Promise<void> {
    const session = this.state.session;
    const trimmed = text.trim();
    if (!session || !trimmed || this.inFlight) {
      return;
    }
    this.inFlight = true;
    this.state.sendDisabled = true;
    this.state.banner = null;
    this.state.messages.push({ who: "investigator", text: trimmed, fallback: false });
    this.push();
    try {
      const response = await this.api.sendMessage(session.session_id, trimmed);
      this.state.messages.push({
        who: "patient",
        text: response.utterance,
        fallback: response.fallback,
      });
      this.state.inspector = response.trace;
      if (response.trace === null) {
        this.state.inspectorVisible = false;
      }
    } catch (error) {
      if (error instanceof ApiRequestError && error.status === 409) {
        // Another turn is still resolving server-side; drop the optimistic
        // bubble and keep the content server-authoritative.
        this.state.messages.pop();
        this.state.banner = "The patient is still answering; wait for the turn to finish.";
      } else {
        this.state.messages.pop();
        this.state.banner = describe(error);
      }
    } finally {
      this.inFlight = false;
      this.state.sendDisabled = false;
      this.push();
    }
  }

  /** Replace the message list with the server's history verbatim. */
  async refreshHistory(): Promise<void> {
    const session = this.state.session;
    if (!session) {
      return;
    }
    try {
      const history = await this.api.getHistory(session.session_id);
      const messages: ChatMessage[] = [];
      for (const turn of history.turns) {
        messages.push({ who: "investigator", text: turn.question, fallback: false });
        messages.push({
          who: "patient",
          text: turn.patient_response,
          fallback: turn.fallback,
        });
      }
      this.state.messages = messages;
    } catch (error) {
      this.state.banner = describe(error);
    }
    this.push();
  }

  toggleInspector(): void {
    if (this.state.inspector === null) {
      // Trace suppressed by the server: the panel stays hidden.
      this.state.inspectorVisible = false;
    } else {
      this.state.inspectorVisible = !this.state.inspectorVisible;
    }
    this.push();
  }

  async endSession(): Promise<void> {
    const session = this.state.session;
    if (!session) {
      return;
    }
    try {
      await this.api.deleteSession(session.session_id);
    } catch {
      // Session may have been evicted already; leaving is still fine.
    }
    this.state.session = null;
    this.state.messages = [];
    this.state.inspector = null;
    this.state.inspectorVisible = false;
    this.push();
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiRequestError) {
    return error.message;
  }
  if (error instanceof Error) {
    return `network failure: ${error.message}`;
  }
  return String(error);
}
