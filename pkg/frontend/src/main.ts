/** Page wiring: state lives here, every transition triggers a re-render. */

import { makeClient } from "./api.js";
import { submitStep } from "./controller.js";
import { render } from "./render.js";
import { SessionState, beginSubmit, newSession } from "./session.js";

const api = makeClient("");
const root = document.getElementById("app");

if (root) {
  let state: SessionState = newSession();

  const update = (next: SessionState): void => {
    state = next;
    render(state, root, handlers);
  };

  const submit = (input: string): void => {
    if (state.pending) {
      return;
    }
    const settled = submitStep(state, input, api);
    if (state.expressions.length > 0 && input.trim()) {
      // show the disabled in-flight view while the request runs
      update(beginSubmit(state, input.trim()));
    }
    void settled.then(update);
  };

  const handlers = {
    onSubmit: submit,
    onReset: () => update(newSession()),
    onRetry: submit,
  };

  render(state, root, handlers);
}
