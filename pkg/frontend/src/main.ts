import { TriageApiClient } from "./api.js";
import {
  applyEvent,
  initialState,
  missingStep1Fields,
  missingStep2Fields,
  type SessionEvent,
  type SessionState,
} from "./state.js";
import { STEP1_FIELDS, STEP2_FIELDS } from "./types.js";
import type { ApiError, ModelInfo } from "./types.js";
import { render, type ViewHandlers } from "./view.js";

export interface App {
  state(): SessionState;
  /** resolves when no request is in flight (used by tests) */
  idle(): Promise<void>;
}

function asApiError(error: unknown): ApiError {
  if (typeof error === "object" && error !== null && "status" in error && "message" in error) {
    return error as ApiError;
  }
  return { status: 0, message: `service unreachable: ${String(error)}`, fields: [] };
}

/**
 * Wires the event log, the pure view and the API client together. The UI
 * never computes a diagnosis locally; every label and confidence value is
 * whatever the service returned.
 */
export async function mountApp(
  root: HTMLElement,
  options: { baseUrl: string; now?: () => number },
): Promise<App> {
  const client = new TriageApiClient(options.baseUrl);
  const now = options.now ?? (() => Date.now());
  const model: ModelInfo = await client.modelInfo();
  const manifestOk =
    JSON.stringify(model.step1_fields) === JSON.stringify([...STEP1_FIELDS]) &&
    JSON.stringify(model.step2_fields) === JSON.stringify([...STEP2_FIELDS]);
  if (!manifestOk) {
    throw new Error("service manifest does not match this console's field order");
  }

  let state = initialState();
  let inflight: Promise<void> = Promise.resolve();

  const dispatch = (event: SessionEvent): void => {
    state = applyEvent(state, event);
    render(root, state, model, handlers);
  };

  const handlers: ViewHandlers = {
    onStep1Edit(field, value) {
      dispatch({ kind: "step1_edited", field, value, at: now() });
    },
    onStep2Edit(field, value) {
      dispatch({ kind: "step2_edited", field, value, at: now() });
    },
    onOverride() {
      dispatch({ kind: "step2_override", at: now() });
    },
    onReset() {
      dispatch({ kind: "reset", at: now() });
    },
    onStep1Submit() {
      const missing = missingStep1Fields(state);
      if (missing.length) {
        dispatch({ kind: "validation_failed", step: 1, fields: missing, at: now() });
        return;
      }
      const features: Record<string, number> = {};
      for (const field of STEP1_FIELDS) features[field] = state.step1Form[field] as number;
      dispatch({ kind: "step1_submitted", at: now() });
      inflight = client
        .step1(features)
        .then((result) => dispatch({ kind: "step1_result", result, at: now() }))
        .catch((error: unknown) => {
          const apiError = asApiError(error);
          dispatch({
            kind: "step1_failed",
            message: apiError.message,
            fields: apiError.fields,
            at: now(),
          });
        });
    },
    onStep2Submit() {
      const session = state.step1Result;
      if (!session) return;
      const missing = missingStep2Fields(state);
      if (missing.length) {
        dispatch({ kind: "validation_failed", step: 2, fields: missing, at: now() });
        return;
      }
      const features: Record<string, number> = {};
      for (const field of STEP2_FIELDS) features[field] = state.step2Form[field] as number;
      dispatch({ kind: "step2_submitted", at: now() });
      inflight = client
        .step2({ session_id: session.session_id }, features)
        .then((result) => dispatch({ kind: "step2_result", result, at: now() }))
        .catch(async (error: unknown) => {
          const apiError = asApiError(error);
          if (apiError.status === 404) {
            // session expired on the service: fall back to the inline
            // meta-features so the operator does not lose the workflow
            try {
              const result = await client.step2({ meta2: session.meta2 }, features);
              dispatch({ kind: "step2_result", result, at: now() });
              return;
            } catch (retryError) {
              dispatch({
                kind: "step2_failed",
                message: asApiError(retryError).message,
                fields: asApiError(retryError).fields,
                at: now(),
              });
              return;
            }
          }
          dispatch({
            kind: "step2_failed",
            message: apiError.message,
            fields: apiError.fields,
            at: now(),
          });
        });
    },
  };

  render(root, state, model, handlers);
  return {
    state: () => state,
    idle: async () => {
      // requests can chain (404 fallback), so settle twice
      await inflight;
      await inflight;
    },
  };
}
