// @vitest-environment jsdom
//
// The full acceptance path: a scripted browser session against the real
// service, then the stored record fed back through the metrics and
// calibration CLIs.

import { readFileSync, readdirSync } from "node:fs";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import type { Questionnaire } from "../src/api.js";
import type { App } from "../src/main.js";
import { createApp } from "../src/main.js";
import { type LiveService, runCli, startService } from "./service_harness.js";

const SRC_DIR = resolve(process.cwd(), "src");
const INDEX_HTML = resolve(process.cwd(), "index.html");

let service: LiveService;
let questionnaire: Questionnaire;

beforeAll(async () => {
  service = await startService();
  questionnaire = await (await fetch(`${service.baseUrl}/questionnaire`)).json();
});

afterAll(() => {
  service?.stop();
});

describe("scripted browser session", () => {
  let app: App;
  let root: HTMLElement;

  const el = <T extends HTMLElement>(id: string) => root.querySelector(`#${id}`) as T;

  async function click(id: string): Promise<void> {
    el<HTMLButtonElement>(id).click();
    await app.settle();
  }

  it("completes chat plus questionnaire with scoring locked early", async () => {
    document.body.innerHTML = '<div id="root"></div>';
    root = document.getElementById("root")!;
    app = createApp(root, { baseUrl: service.baseUrl });

    el<HTMLInputElement>("annotator-input").value = "browser-worker";
    await click("start-btn");
    expect(el("error").hidden).toBe(true);
    expect(app.view).not.toBeNull();
    const minTurns = app.view!.minTurns;
    expect([5, 6]).toContain(minTurns);

    const lines = [
      "hi there how are you today ?",
      "what do you do for work ?",
      "do you have any hobbies ?",
      "what did you eat today ?",
      "do you like to travel ?",
      "tell me about your family .",
    ];
    for (let pair = 0; pair < minTurns; pair += 1) {
      // locked until the service-reported count reaches min_turns
      expect(el<HTMLButtonElement>("finish-btn").disabled).toBe(true);
      expect(el("scoring").hidden).toBe(true);
      el<HTMLInputElement>("message-input").value = lines[pair % lines.length];
      await click("send-btn");
      expect(el("error").hidden).toBe(true);
      expect(app.view!.pairsCompleted).toBe(pair + 1);
      expect(root.querySelectorAll("#chat-log .pair")).toHaveLength(pair + 1);
    }

    expect(el<HTMLButtonElement>("finish-btn").disabled).toBe(false);
    await click("finish-btn");
    expect(app.view!.phase).toBe("scoring");
    expect(el("scoring").hidden).toBe(false);

    // prompts are exactly what the live service serves
    expect(el("overall-prompt").textContent).toBe(questionnaire.overall);
    expect(el("good-prompt").textContent).toBe(questionnaire.good);
    expect(el("bad-prompt").textContent).toBe(questionnaire.bad);

    const goodBoxes = root.querySelectorAll<HTMLInputElement>(".good-pair-box");
    const badBoxes = root.querySelectorAll<HTMLInputElement>(".bad-pair-box");
    expect(goodBoxes).toHaveLength(minTurns);
    expect(badBoxes).toHaveLength(minTurns);

    root.querySelector<HTMLButtonElement>('.overall-btn[data-value="4"]')!.click();
    goodBoxes[0].checked = true;
    badBoxes[1].checked = true;
    goodBoxes[2].checked = true;
    badBoxes[2].checked = true;
    await click("submit-btn");

    expect(el("error").hidden).toBe(true);
    expect(app.view!.phase).toBe("done");
    expect(el("done").hidden).toBe(false);
    expect(app.record).not.toBeNull();
    expect(["greedy", "beam", "iter-beam"]).toContain(app.record!.strategy);
  });

  it("renders prompts it could not know ahead of time", () => {
    const sources = readdirSync(SRC_DIR)
      .filter((name) => name.endsWith(".ts"))
      .map((name) => readFileSync(join(SRC_DIR, name), "utf8"));
    sources.push(readFileSync(INDEX_HTML, "utf8"));
    for (const prompt of [questionnaire.overall, questionnaire.good, questionnaire.bad]) {
      expect(prompt.length).toBeGreaterThan(20);
      for (const source of sources) {
        expect(source).not.toContain(prompt);
      }
    }
  });
});

describe("stored record round-trip", () => {
  it("is a single well-formed transcript line", () => {
    const lines = readFileSync(service.transcriptsPath, "utf8").trim().split("\n");
    expect(lines).toHaveLength(1);
    const record = JSON.parse(lines[0]);
    expect(record.annotator_id).toBe("browser-worker");
    expect(record.annotation.overall).toBe(4);
    expect(record.candidates_shown).toBe(false);
  });

  it("feeds the metrics report without error", () => {
    const record = JSON.parse(readFileSync(service.transcriptsPath, "utf8").trim());
    const result = runCli(["metrics", "--transcripts", service.transcriptsPath]);
    expect(result.status, result.stderr).toBe(0);
    expect(result.stdout).toContain(record.strategy);
    expect(result.stdout).toContain("log-p");
  });

  it("feeds star and binary calibration without error", () => {
    const record = JSON.parse(readFileSync(service.transcriptsPath, "utf8").trim());
    const star = runCli([
      "calibrate", "--kind", "star", "--transcripts", service.transcriptsPath,
      "--warmup", "50", "--draws", "150", "--seed", "1",
    ]);
    expect(star.status, star.stderr).toBe(0);
    const starResult = JSON.parse(star.stdout);
    expect(starResult.models).toHaveLength(1);
    expect(starResult.models[0].name).toBe(record.strategy);
    expect(starResult.models[0].mean).toBeGreaterThanOrEqual(1);
    expect(starResult.models[0].mean).toBeLessThanOrEqual(4);

    const binary = runCli([
      "calibrate", "--kind", "binary", "--transcripts", service.transcriptsPath,
      "--signal", "good", "--warmup", "50", "--draws", "150", "--seed", "1",
    ]);
    expect(binary.status, binary.stderr).toBe(0);
    const binaryResult = JSON.parse(binary.stdout);
    expect(binaryResult.models[0].mean).toBeGreaterThan(0);
    expect(binaryResult.models[0].mean).toBeLessThan(1);
  });
});
