/** Submission flow: one entry point turning user input into a new state. */

import { ApiClient, ApiError, FeedbackResponse } from "./api.js";
import {
  SessionState,
  applyAnnotation,
  applyNetworkError,
  applyParseError,
  beginSubmit,
  seedEquation,
} from "./session.js";

/**
 * Submit one input line. The first line seeds the session; later lines are
 * classified against the previous expression, and invalid steps additionally
 * fetch a feedback ranking. Parse errors (422) and network failures leave
 * the history unchanged.
 */
export async function submitStep(
  state: SessionState,
  input: string,
  api: ApiClient,
): Promise<SessionState> {
  const trimmed = input.trim();
  if (!trimmed || state.pending) {
    return state;
  }
  if (state.expressions.length === 0) {
    return seedEquation(state, trimmed);
  }
  const before = state.expressions[state.expressions.length - 1];
  const inFlight = beginSubmit(state, trimmed);
  try {
    const classify = await api.classify(before, trimmed);
    let feedback: FeedbackResponse | null = null;
    if (!classify.valid) {
      try {
        feedback = await api.feedback(before, trimmed);
      } catch (err) {
        if (!(err instanceof ApiError && err.status === 503)) {
          throw err;
        }
        feedback = null; // no feedback model loaded; the verdict still stands
      }
    }
    return applyAnnotation(inFlight, trimmed, classify, feedback);
  } catch (err) {
    if (err instanceof ApiError) {
      return applyParseError(inFlight, err.body.error);
    }
    return applyNetworkError(inFlight, trimmed);
  }
}
