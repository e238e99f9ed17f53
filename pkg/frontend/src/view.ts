// DOM rendering. Every render rebuilds the three regions (picker, chat,
// inspector) from the view state; content comes from the state alone.

import type { ChatController, ChatViewState } from "./state.js";
import { TRAIT_NAMES } from "./types.js";

const TRAIT_LABELS: Record<string, [string, string]> = {
  openness: ["practical", "curious"],
  conscientiousness: ["impulsive", "organized"],
  extraversion: ["reserved", "outgoing"],
  agreeableness: ["critical", "friendly"],
  neuroticism: ["calm", "nervous"],
};

export class DomView {
  private controller!: ChatController;

  constructor(private readonly root: HTMLElement) {}

  bind(controller: ChatController): void {
    this.controller = controller;
  }

  render(state: ChatViewState): void {
    this.root.replaceChildren(
      this.banner(state),
      state.session ? this.chat(state) : this.picker(state),
    );
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private banner(state: ChatViewState): HTMLElement {
    const box = this.el("div", "banner");
    if (state.banner) {
      box.classList.add("visible");
      box.append(this.el("span", undefined, state.banner));
    }
    return box;
  }

  private picker(state: ChatViewState): HTMLElement {
    const panel = this.el("section", "picker");
    panel.append(this.el("h1", undefined, "Choose a patient"));

    if (state.rosterError) {
      const error = this.el("div", "roster-error", state.rosterError);
      const retry = this.el("button", undefined, "Retry");
      retry.onclick = () => void this.controller.loadPatients();
      error.append(retry);
      panel.append(error);
      return panel;
    }
    if (state.rosterLoaded && state.patients.length === 0) {
      panel.append(this.el("p", "empty-state", "No patients in the loaded cohort."));
      return panel;
    }

    const table = this.el("table", "roster");
    const head = this.el("tr");
    for (const column of ["Subject", "Admission", "Gender", "Age", "Ethnicity", "Insurance"]) {
      head.append(this.el("th", undefined, column));
    }
    table.append(head);
    for (const row of state.patients) {
      const tr = this.el("tr", "roster-row");
      if (
        state.selected &&
        state.selected.subject_id === row.subject_id &&
        state.selected.hadm_id === row.hadm_id
      ) {
        tr.classList.add("selected");
      }
      for (const cell of [
        String(row.subject_id),
        String(row.hadm_id),
        row.gender,
        String(row.age),
        row.ethnicity,
        row.insurance,
      ]) {
        tr.append(this.el("td", undefined, cell));
      }
      tr.onclick = () => this.controller.selectPatient(row);
      table.append(tr);
    }
    panel.append(table);

    const traits = this.el("div", "traits");
    traits.append(this.el("h2", undefined, "Personality"));
    for (const trait of TRAIT_NAMES) {
      const [low, high] = TRAIT_LABELS[trait] ?? ["low", "high"];
      const label = this.el("label", "trait");
      const box = this.el("input");
      box.type = "checkbox";
      box.checked = state.personality[trait];
      box.onchange = () => this.controller.setTrait(trait, box.checked);
      label.append(box, this.el("span", undefined, `${trait}: ${low} / ${high}`));
      traits.append(label);
    }
    panel.append(traits);

    const start = this.el("button", "start", "Start interview");
    start.disabled = !this.controller.canStart;
    start.onclick = () => void this.controller.startInterview();
    panel.append(start);
    return panel;
  }

  private chat(state: ChatViewState): HTMLElement {
    const panel = this.el("section", "chat");
    const header = this.el("header");
    const who = state.session
      ? `Patient ${state.session.subject_id} / admission ${state.session.hadm_id}`
      : "";
    header.append(this.el("h1", undefined, who));
    const leave = this.el("button", undefined, "End interview");
    leave.onclick = () => void this.controller.endSession();
    header.append(leave);
    panel.append(header);

    const log = this.el("div", "messages");
    for (const message of state.messages) {
      const bubble = this.el("div", `bubble ${message.who}`, message.text);
      if (message.fallback) {
        bubble.append(this.el("span", "fallback-badge", "no grounded answer"));
      }
      log.append(bubble);
    }
    panel.append(log);

    const form = this.el("form", "composer");
    const input = this.el("input");
    input.type = "text";
    input.placeholder = "Ask the patient...";
    const send = this.el("button", undefined, "Send");
    send.disabled = state.sendDisabled;
    form.onsubmit = (event) => {
      event.preventDefault();
      const text = input.value;
      input.value = "";
      void this.controller.send(text);
    };
    form.append(input, send);
    panel.append(form);

    const toggle = this.el("button", "inspector-toggle", "Inspector");
    toggle.disabled = state.inspector === null;
    toggle.onclick = () => this.controller.toggleInspector();
    panel.append(toggle);

    if (state.inspectorVisible && state.inspector) {
      const inspector = this.el("aside", "inspector");
      inspector.append(this.el("h2", undefined, "Last turn"));
      inspector.append(
        this.el("p", undefined, `abstraction: ${state.inspector.abstraction ?? "(off)"} `),
      );
      const subset = state.inspector.schema_subset;
      inspector.append(
        this.el(
          "p",
          undefined,
          subset
            ? `schema subset: ${subset.nodes.join(", ")} | ${subset.relationships.join(", ")}`
            : "schema subset: (off)",
        ),
      );
      inspector.append(
        this.el("pre", undefined, state.inspector.final_query ?? "(no approved query)"),
      );
      inspector.append(
        this.el("p", undefined, `checker iterations: ${state.inspector.iterations_used}`),
      );
      panel.append(inspector);
    }
    return panel;
  }
}
