import { STEP1_FIELDS, STEP2_FIELDS } from "./types.js";
import type { Step1Field, Step1Response, Step2Field, Step2Response } from "./types.js";

/**
 * The session is event-sourced: every user action and service reply is a
 * timestamped entry in the log, and the rendered state is a pure fold over
 * that log. Replaying a log therefore reproduces the exact same state.
 */

export type SessionEvent =
  | { kind: "step1_edited"; field: Step1Field; value: number | null; at: number }
  | { kind: "step1_submitted"; at: number }
  | { kind: "step1_result"; result: Step1Response; at: number }
  | { kind: "step1_failed"; message: string; fields: string[]; at: number }
  | { kind: "step2_edited"; field: Step2Field; value: number | null; at: number }
  | { kind: "step2_submitted"; at: number }
  | { kind: "step2_result"; result: Step2Response; at: number }
  | { kind: "step2_failed"; message: string; fields: string[]; at: number }
  | { kind: "step2_override"; at: number }
  | { kind: "validation_failed"; step: 1 | 2; fields: string[]; at: number }
  | { kind: "reset"; at: number };

export interface SessionState {
  step1Form: Record<Step1Field, number | null>;
  step2Form: Record<Step2Field, number | null>;
  step1Result: Step1Response | null;
  step2Result: Step2Response | null;
  step1Pending: boolean;
  step2Pending: boolean;
  error: { step: 1 | 2; message: string; fields: string[] } | null;
  invalidFields: string[];
  /** user explicitly opened the lab form despite a confident step 1 */
  overridden: boolean;
  /** step-1 inputs were edited after the last result; step 2 is blocked */
  stale: boolean;
  log: SessionEvent[];
}

function emptyStep1Form(): Record<Step1Field, number | null> {
  const form = {} as Record<Step1Field, number | null>;
  for (const field of STEP1_FIELDS) form[field] = field === "age" ? null : 0;
  return form;
}

function emptyStep2Form(): Record<Step2Field, number | null> {
  const form = {} as Record<Step2Field, number | null>;
  for (const field of STEP2_FIELDS) {
    form[field] = field === "lung_abnormalities_cxr" || field === "white_spots_cxr" ? 0 : null;
  }
  return form;
}

export function initialState(): SessionState {
  return {
    step1Form: emptyStep1Form(),
    step2Form: emptyStep2Form(),
    step1Result: null,
    step2Result: null,
    step1Pending: false,
    step2Pending: false,
    error: null,
    invalidFields: [],
    overridden: false,
    stale: false,
    log: [],
  };
}

export function applyEvent(state: SessionState, event: SessionEvent): SessionState {
  const next: SessionState = { ...state, log: [...state.log, event] };
  switch (event.kind) {
    case "step1_edited":
      next.step1Form = { ...state.step1Form, [event.field]: event.value };
      next.invalidFields = state.invalidFields.filter((f) => f !== event.field);
      // a result computed from different inputs is stale until re-submitted
      if (state.step1Result !== null) next.stale = true;
      return next;
    case "step1_submitted":
      next.step1Pending = true;
      next.error = null;
      next.invalidFields = [];
      return next;
    case "step1_result":
      next.step1Pending = false;
      next.step1Result = event.result;
      next.step2Result = null;
      next.stale = false;
      next.overridden = false;
      return next;
    case "step1_failed":
      next.step1Pending = false;
      next.error = { step: 1, message: event.message, fields: event.fields };
      next.invalidFields = event.fields;
      return next;
    case "step2_edited":
      next.step2Form = { ...state.step2Form, [event.field]: event.value };
      next.invalidFields = state.invalidFields.filter((f) => f !== event.field);
      return next;
    case "step2_submitted":
      next.step2Pending = true;
      next.error = null;
      next.invalidFields = [];
      return next;
    case "step2_result":
      next.step2Pending = false;
      next.step2Result = event.result;
      return next;
    case "step2_failed":
      next.step2Pending = false;
      next.error = { step: 2, message: event.message, fields: event.fields };
      next.invalidFields = event.fields;
      return next;
    case "step2_override":
      next.overridden = true;
      return next;
    case "validation_failed":
      next.error = {
        step: event.step,
        message: "fill the highlighted fields first",
        fields: event.fields,
      };
      next.invalidFields = event.fields;
      return next;
    case "reset":
      return { ...initialState(), log: [...state.log, event] };
  }
}

export function replay(events: SessionEvent[]): SessionState {
  let state = initialState();
  for (const event of events) state = applyEvent(state, event);
  return state;
}

/** The lab form opens only for routed sessions, or on explicit override. */
export function labFormEnabled(state: SessionState): boolean {
  if (state.stale || state.step1Result === null) return false;
  return state.step1Result.routed || state.overridden;
}

export function missingStep1Fields(state: SessionState): Step1Field[] {
  return STEP1_FIELDS.filter((f) => state.step1Form[f] === null);
}

export function missingStep2Fields(state: SessionState): Step2Field[] {
  return STEP2_FIELDS.filter((f) => state.step2Form[f] === null);
}
