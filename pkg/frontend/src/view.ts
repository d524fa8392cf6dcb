import { STEP1_FIELDS, STEP2_BINARY_FIELDS, STEP2_FIELDS } from "./types.js";
import type { ModelInfo, Step1Field, Step2Field } from "./types.js";
import { labFormEnabled, type SessionState } from "./state.js";

/**
 * Pure rendering: the whole console is rebuilt from (state, modelInfo) on
 * every change, so a replayed log renders to identical markup. Handlers are
 * plain callbacks wired by main.ts; nothing here computes a diagnosis.
 */

export interface ViewHandlers {
  onStep1Edit(field: Step1Field, value: number | null): void;
  onStep1Submit(): void;
  onStep2Edit(field: Step2Field, value: number | null): void;
  onStep2Submit(): void;
  onOverride(): void;
  onReset(): void;
}

const FIELD_TITLES: Record<string, string> = {
  age: "Age (years)",
  gender: "Gender",
  lung_sound_abnormal: "Lung sound",
  lung_abnormalities_cxr: "Lung abnormalities in CXR",
  white_spots_cxr: "White spots (infiltrates) in CXR",
  wbc: "WBC",
  mcv: "MCV",
  crp: "CRP",
  esr: "ESR",
};

function titleFor(field: string): string {
  const preset = FIELD_TITLES[field];
  if (preset) return preset;
  return field.replace(/_/g, " ").replace(/^./, (c) => c.toUpperCase());
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function binaryToggle(
  doc: Document,
  field: string,
  value: number | null,
  labels: [string, string],
  invalid: boolean,
  onChange: (value: number) => void,
): HTMLElement {
  const wrap = el(doc, "label", { class: `field binary${invalid ? " invalid" : ""}`, "data-field": field });
  wrap.append(el(doc, "span", { class: "field-name" }, titleFor(field)));
  const select = el(doc, "select", {});
  const optNo = el(doc, "option", { value: "0" }, labels[0]);
  const optYes = el(doc, "option", { value: "1" }, labels[1]);
  select.append(optNo, optYes);
  select.value = value === 1 ? "1" : "0";
  select.addEventListener("change", () => onChange(Number(select.value)));
  wrap.append(select);
  return wrap;
}

function numberInput(
  doc: Document,
  field: string,
  value: number | null,
  invalid: boolean,
  onChange: (value: number | null) => void,
): HTMLElement {
  const wrap = el(doc, "label", { class: `field numeric${invalid ? " invalid" : ""}`, "data-field": field });
  wrap.append(el(doc, "span", { class: "field-name" }, titleFor(field)));
  const input = el(doc, "input", { type: "number", step: "any" });
  if (value !== null) input.value = String(value);
  input.addEventListener("change", () => {
    input.value === "" ? onChange(null) : onChange(Number(input.value));
  });
  wrap.append(input);
  return wrap;
}

function csGauge(doc: Document, cs: number, threshold: number): HTMLElement {
  const gauge = el(doc, "div", { class: "cs-gauge", "data-cs": String(cs) });
  const fill = el(doc, "div", { class: "cs-fill" });
  fill.style.width = `${Math.round(100 * cs)}%`;
  const marker = el(doc, "div", { class: "cs-threshold", title: `routing threshold ${threshold}` });
  marker.style.left = `${Math.min(100, Math.round(100 * threshold))}%`;
  gauge.append(fill, marker);
  const caption = el(doc, "div", { class: "cs-caption" }, `confidence ${cs.toFixed(2)} / threshold ${threshold}`);
  const box = el(doc, "div", { class: "cs-box" });
  box.append(gauge, caption);
  return box;
}

function labelBadge(doc: Document, label: string): HTMLElement {
  const text = label === "TB" ? "Tuberculosis" : label === "P" ? "Pneumonia" : "Undetermined";
  return el(doc, "span", { class: `label-badge label-${label}`, "data-label": label }, text);
}

export function render(
  root: HTMLElement,
  state: SessionState,
  model: ModelInfo,
  handlers: ViewHandlers,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const page = el(doc, "div", { class: "console" });
  page.append(el(doc, "h1", {}, "TB / pneumonia triage console"));

  // ---- step 1: low-cost features -----------------------------------------
  const step1 = el(doc, "section", { id: "step1-section" });
  step1.append(el(doc, "h2", {}, "Step 1: symptoms and demographics"));
  const form1 = el(doc, "div", { class: "form-grid", id: "step1-form" });
  for (const field of STEP1_FIELDS) {
    const invalid = state.invalidFields.includes(field);
    if (field === "age") {
      form1.append(numberInput(doc, field, state.step1Form[field], invalid, (v) => handlers.onStep1Edit(field, v)));
    } else if (field === "gender") {
      form1.append(binaryToggle(doc, field, state.step1Form[field], ["Female", "Male"], invalid, (v) => handlers.onStep1Edit(field, v)));
    } else if (field === "lung_sound_abnormal") {
      form1.append(binaryToggle(doc, field, state.step1Form[field], ["Normal", "Abnormal"], invalid, (v) => handlers.onStep1Edit(field, v)));
    } else {
      form1.append(binaryToggle(doc, field, state.step1Form[field], ["No", "Yes"], invalid, (v) => handlers.onStep1Edit(field, v)));
    }
  }
  step1.append(form1);
  const submit1 = el(doc, "button", { id: "step1-submit" }, state.step1Pending ? "Diagnosing..." : "Run early diagnosis");
  if (state.step1Pending) submit1.setAttribute("disabled", "disabled");
  submit1.addEventListener("click", handlers.onStep1Submit);
  step1.append(submit1);
  if (state.error && state.error.step === 1) {
    step1.append(el(doc, "div", { class: "error-box", id: "step1-error" }, state.error.message));
  }
  page.append(step1);

  // ---- step-1 result ------------------------------------------------------
  if (state.step1Result && !state.stale) {
    const result = state.step1Result;
    const card = el(doc, "section", { id: "step1-result", class: "card" });
    card.append(el(doc, "h2", {}, "Early diagnosis"));
    card.append(labelBadge(doc, result.label));
    card.append(csGauge(doc, result.cs, model.route_threshold));
    if (result.routed) {
      card.append(
        el(
          doc,
          "div",
          { class: "routing-banner", id: "routing-banner" },
          "Low confidence: order laboratory tests + chest X-ray, then complete step 2 below.",
        ),
      );
    } else {
      card.append(
        el(
          doc,
          "div",
          { class: "final-note", id: "confident-note" },
          "Confident early diagnosis; supplementary testing not requested.",
        ),
      );
      if (!state.overridden) {
        const override = el(doc, "button", { id: "override-button" }, "Order tests anyway");
        override.addEventListener("click", handlers.onOverride);
        card.append(override);
      }
    }
    page.append(card);
  }
  if (state.stale) {
    page.append(
      el(
        doc,
        "div",
        { class: "stale-banner", id: "stale-banner" },
        "Step-1 inputs changed: re-run step 1 before continuing.",
      ),
    );
  }

  // ---- step 2: labs + CXR keywords ---------------------------------------
  if (labFormEnabled(state)) {
    const step2 = el(doc, "section", { id: "step2-section" });
    step2.append(el(doc, "h2", {}, "Step 2: laboratory tests and chest X-ray report"));
    const form2 = el(doc, "div", { class: "form-grid", id: "step2-form" });
    for (const field of STEP2_FIELDS) {
      const invalid = state.invalidFields.includes(field);
      if (STEP2_BINARY_FIELDS.includes(field)) {
        form2.append(binaryToggle(doc, field, state.step2Form[field], ["No", "Yes"], invalid, (v) => handlers.onStep2Edit(field, v)));
      } else {
        form2.append(numberInput(doc, field, state.step2Form[field], invalid, (v) => handlers.onStep2Edit(field, v)));
      }
    }
    step2.append(form2);
    const submit2 = el(doc, "button", { id: "step2-submit" }, state.step2Pending ? "Deciding..." : "Run final diagnosis");
    if (state.step2Pending) submit2.setAttribute("disabled", "disabled");
    submit2.addEventListener("click", handlers.onStep2Submit);
    step2.append(submit2);
    if (state.error && state.error.step === 2) {
      step2.append(el(doc, "div", { class: "error-box", id: "step2-error" }, state.error.message));
    }
    page.append(step2);
  }

  // ---- final result -------------------------------------------------------
  if (state.step2Result) {
    const final = state.step2Result;
    const card = el(doc, "section", { id: "final-result", class: "card" });
    card.append(el(doc, "h2", {}, "Final decision"));
    card.append(labelBadge(doc, final.final_label));
    if (final.warning) card.append(el(doc, "div", { class: "warning-box", id: "step2-warning" }, final.warning));
    const votes = el(doc, "ul", { id: "vote-breakdown" });
    final.votes.forEach((vote, index) => {
      const prob = final.probs?.[index];
      const detail = prob === undefined ? vote : `${vote} (P(TB) ${prob.toFixed(3)})`;
      votes.append(el(doc, "li", { "data-vote": vote }, `classifier ${index + 1}: ${detail}`));
    });
    card.append(votes);
    page.append(card);
  }

  const reset = el(doc, "button", { id: "reset-button", class: "secondary" }, "Start a new patient");
  reset.addEventListener("click", handlers.onReset);
  page.append(reset);

  root.append(page);
}
