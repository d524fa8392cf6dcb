// @vitest-environment jsdom
//
// End-to-end against the real service booted by global-setup: a
// low-confidence record must surface the lab form and render exactly the
// service's final label; a high-confidence record must never show it.

import { readFileSync } from "node:fs";
import { beforeAll, describe, expect, inject, it } from "vitest";

import { TriageApiClient } from "../src/api.js";
import { mountApp, type App } from "../src/main.js";
import { STEP1_FIELDS, STEP2_FIELDS } from "../src/types.js";

const baseUrl = inject("baseUrl");
const cohortCsv = inject("cohortCsv");

interface CohortRow {
  step1: Record<string, number>;
  step2: Record<string, number>;
}

function parseCohort(path: string): CohortRow[] {
  // the cohort CSV uses CRLF line endings
  const lines = readFileSync(path, "utf-8").trim().split(/\r?\n/);
  const header = lines[0]!.split(",");
  const rows: CohortRow[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    const byName: Record<string, string> = {};
    header.forEach((name, i) => (byName[name] = cells[i] ?? ""));
    const step1: Record<string, number> = {};
    const step2: Record<string, number> = {};
    for (const f of STEP1_FIELDS) step1[f] = Number(byName[f]);
    for (const f of STEP2_FIELDS) step2[f] = Number(byName[f]);
    rows.push({ step1, step2 });
  }
  return rows;
}

async function findProbeRecords(client: TriageApiClient, rows: CohortRow[]) {
  let routed: CohortRow | undefined;
  let confident: CohortRow | undefined;
  for (const row of rows) {
    const result = await client.step1(row.step1);
    if (result.routed && !routed) routed = row;
    if (!result.routed && !confident) confident = row;
    if (routed && confident) break;
  }
  if (!routed || !confident) throw new Error("cohort lacks a routed or a confident record");
  return { routed, confident };
}

function setField(root: HTMLElement, field: string, value: number): void {
  const wrap = root.querySelector(`[data-field="${field}"]`);
  if (!wrap) throw new Error(`field ${field} is not on screen`);
  const control = wrap.querySelector("input, select") as HTMLInputElement | HTMLSelectElement;
  control.value = String(value);
  control.dispatchEvent(new Event("change", { bubbles: false }));
}

function click(root: HTMLElement, selector: string): void {
  const button = root.querySelector(selector) as HTMLButtonElement | null;
  if (!button) throw new Error(`no element matches ${selector}`);
  button.click();
}

async function fillAndSubmitStep1(root: HTMLElement, app: App, row: CohortRow): Promise<void> {
  for (const field of STEP1_FIELDS) setField(root, field, row.step1[field]!);
  click(root, "#step1-submit");
  await app.idle();
}

describe("triage console against the live service", () => {
  let client: TriageApiClient;
  let routedRow: CohortRow;
  let confidentRow: CohortRow;

  beforeAll(async () => {
    client = new TriageApiClient(baseUrl);
    const info = await client.modelInfo();
    expect(info.layer_sizes).toEqual([5, 5, 5]);
    ({ routed: routedRow, confident: confidentRow } = await findProbeRecords(
      client,
      parseCohort(cohortCsv),
    ));
  });

  it("routes a low-confidence record through the lab form to the service's final label", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const app = await mountApp(root, { baseUrl });

    expect(root.querySelector("#step2-section")).toBeNull();
    await fillAndSubmitStep1(root, app, routedRow);

    // the routed session surfaces the banner and the lab form
    expect(app.state().step1Result?.routed).toBe(true);
    expect(root.querySelector("#routing-banner")).not.toBeNull();
    expect(root.querySelector("#step2-section")).not.toBeNull();

    for (const field of STEP2_FIELDS) setField(root, field, routedRow.step2[field]!);
    click(root, "#step2-submit");
    await app.idle();

    // the rendered final label is exactly what the service decided
    const direct1 = await client.step1(routedRow.step1);
    const direct2 = await client.step2({ session_id: direct1.session_id }, routedRow.step2);
    const badge = root.querySelector("#final-result [data-label]");
    expect(badge).not.toBeNull();
    expect(badge!.getAttribute("data-label")).toBe(direct2.final_label);
    const votes = root.querySelectorAll("#vote-breakdown li");
    expect(votes).toHaveLength(5);
  });

  it("never shows the lab form for a high-confidence record", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const app = await mountApp(root, { baseUrl });

    await fillAndSubmitStep1(root, app, confidentRow);

    expect(app.state().step1Result?.routed).toBe(false);
    expect(root.querySelector("#step2-section")).toBeNull();
    expect(root.querySelector("#routing-banner")).toBeNull();
    expect(root.querySelector("#confident-note")).not.toBeNull();
    expect(root.querySelector("#final-result")).toBeNull();
  });

  it("validates missing lab fields inline without calling the service", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const app = await mountApp(root, { baseUrl });
    await fillAndSubmitStep1(root, app, routedRow);

    // clear one numeric lab field, then submit: inline highlight, no final card
    const wbc = root.querySelector('#step2-form [data-field="wbc"] input') as HTMLInputElement;
    wbc.value = "";
    wbc.dispatchEvent(new Event("change"));
    click(root, "#step2-submit");
    await app.idle();

    expect(root.querySelector("#step2-error")).not.toBeNull();
    expect(root.querySelector('#step2-form [data-field="wbc"]')!.className).toContain("invalid");
    expect(root.querySelector("#final-result")).toBeNull();
  });

  it("prompts to re-run step 1 when inputs change afterwards", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const app = await mountApp(root, { baseUrl });
    await fillAndSubmitStep1(root, app, routedRow);

    setField(root, "fever", routedRow.step1.fever === 1 ? 0 : 1);
    expect(root.querySelector("#stale-banner")).not.toBeNull();
    expect(root.querySelector("#step2-section")).toBeNull();
  });
});
