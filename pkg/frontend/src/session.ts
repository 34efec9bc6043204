/** Session state and pure transitions; all mutation happens by replacement. */

import { ClassifyResponse, FeedbackResponse, LabelScore } from "./api.js";

/** One annotated step: the entered expression plus the server's verdicts. */
export interface StepAnnotation {
  expression: string;
  operations: LabelScore[];
  valid: boolean;
  /** Present only when the step was invalid and feedback was fetched. */
  feedback: LabelScore[] | null;
}

export interface SessionState {
  /** Entered expressions, append-only within a session. */
  expressions: string[];
  /** Always expressions.length - 1 entries (or 0 for a fresh session). */
  annotations: StepAnnotation[];
  /** True while one request is in flight; input stays disabled. */
  pending: boolean;
  /** Pending input buffer: kept on errors so the entry can be fixed. */
  buffer: string;
  /** Inline parse error for the last rejected input, if any. */
  inputError: string | null;
  /** Set after a network failure so the UI can offer a retry. */
  retryInput: string | null;
}

export function newSession(): SessionState {
  return {
    expressions: [],
    annotations: [],
    pending: false,
    buffer: "",
    inputError: null,
    retryInput: null,
  };
}

/** First entry seeds the session without calling the server. */
export function seedEquation(state: SessionState, expr: string): SessionState {
  return {
    ...state,
    expressions: [expr],
    buffer: "",
    inputError: null,
    retryInput: null,
  };
}

/** Mark a request in flight; the UI must not submit again until it settles. */
export function beginSubmit(state: SessionState, input: string): SessionState {
  return {
    ...state,
    pending: true,
    buffer: input,
    inputError: null,
    retryInput: null,
  };
}

/** Append a classified step; annotations stay aligned with expressions. */
export function applyAnnotation(
  state: SessionState,
  expr: string,
  classify: ClassifyResponse,
  feedback: FeedbackResponse | null,
): SessionState {
  const annotation: StepAnnotation = {
    expression: expr,
    operations: classify.operations,
    valid: classify.valid,
    feedback: feedback ? feedback.feedback : null,
  };
  return {
    ...state,
    expressions: [...state.expressions, expr],
    annotations: [...state.annotations, annotation],
    pending: false,
    buffer: "",
  };
}

/** A 422: show the diagnostic, leave the history untouched. */
export function applyParseError(
  state: SessionState,
  message: string,
): SessionState {
  return { ...state, pending: false, inputError: message };
}

/** A network failure: state unchanged except for the retry affordance. */
export function applyNetworkError(
  state: SessionState,
  attempted: string,
): SessionState {
  return { ...state, pending: false, retryInput: attempted };
}
