/** DOM rendering of a session: derivation view, badges, input, controls. */

import { LabelScore } from "./api.js";
import { SessionState, StepAnnotation } from "./session.js";

/** A second operation badge appears from this probability upward. */
export const SECOND_BADGE_MIN_PROB = 0.2;

export interface Handlers {
  onSubmit(input: string): void;
  onReset(): void;
  onRetry(input: string): void;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function badge(kind: string, score: LabelScore): HTMLElement {
  return el("span", `badge ${kind}`, `${score.label} ${score.prob.toFixed(2)}`);
}

function stepRow(index: number, ann: StepAnnotation): HTMLElement {
  const row = el("li", ann.valid ? "step valid" : "step invalid");
  row.appendChild(el("span", "expr", ann.expression));
  if (ann.operations.length > 0) {
    row.appendChild(badge("op", ann.operations[0]));
  }
  const second = ann.operations[1];
  if (second && second.prob >= SECOND_BADGE_MIN_PROB) {
    row.appendChild(badge("op secondary", second));
  }
  if (!ann.valid) {
    row.appendChild(el("span", "badge verdict", "INVALID"));
    if (ann.feedback && ann.feedback.length > 0) {
      row.appendChild(badge("feedback", ann.feedback[0]));
    }
  }
  row.dataset.step = String(index + 1);
  return row;
}

/** Rebuild the whole view from state; cheap at session scale. */
export function render(
  state: SessionState,
  root: HTMLElement,
  handlers: Handlers,
): void {
  root.textContent = "";

  const list = el("ol", "derivation");
  if (state.expressions.length === 0) {
    root.appendChild(el("p", "prompt", "Enter the equation to solve."));
  } else {
    const seed = el("li", "step seed");
    seed.appendChild(el("span", "expr", state.expressions[0]));
    list.appendChild(seed);
    state.annotations.forEach((ann, i) => list.appendChild(stepRow(i, ann)));
    root.appendChild(list);
  }

  const form = el("form", "entry") as HTMLFormElement;
  const input = el("input", "step-input") as HTMLInputElement;
  input.type = "text";
  input.placeholder =
    state.expressions.length === 0 ? "e.g. 7x+9=7-x" : "next step";
  input.value = state.buffer;
  input.disabled = state.pending;
  const button = el("button", "submit") as HTMLButtonElement;
  button.type = "submit";
  button.textContent = state.pending ? "…" : "check";
  button.disabled = state.pending;
  form.appendChild(input);
  form.appendChild(button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSubmit(input.value);
  });
  root.appendChild(form);

  if (state.inputError) {
    root.appendChild(el("p", "input-error", state.inputError));
  }
  if (state.retryInput !== null) {
    const retry = el("button", "retry", "retry") as HTMLButtonElement;
    const attempted = state.retryInput;
    retry.addEventListener("click", () => handlers.onRetry(attempted));
    root.appendChild(el("p", "network-error", "could not reach the server"));
    root.appendChild(retry);
  }

  const reset = el("button", "new-session", "new session") as HTMLButtonElement;
  reset.addEventListener("click", () => handlers.onReset());
  root.appendChild(reset);

  input.focus();
}
