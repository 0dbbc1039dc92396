// Single-page annotation client. One session per tab; every request runs
// sequentially on a promise chain so the service never sees interleaved
// calls from the same session.

import { ApiError, EvalClient } from "./api.js";
import type { Questionnaire, SessionView, TranscriptRecord } from "./api.js";
import { remainingLabel, scoringUnlocked, toUiView } from "./flow.js";
import type { UISessionView } from "./flow.js";
import {
  annotationVerdict,
  annotatorIdVerdict,
  finishVerdict,
  messageVerdict,
} from "./validate.js";

export interface AppConfig {
  baseUrl: string;
}

const SKELETON = `
<section id="connect">
  <h1>Conversation study</h1>
  <p>Chat with your partner, then score the conversation.</p>
  <label>Service URL <input id="service-input" type="text" spellcheck="false"></label>
  <label>Annotator id <input id="annotator-input" type="text" spellcheck="false"></label>
  <button id="start-btn" type="button">Start session</button>
</section>
<p id="error" role="alert" hidden></p>
<section id="session" hidden>
  <div id="persona-panel">
    <h2>Your persona</h2>
    <ul id="persona"></ul>
  </div>
  <p id="remaining"></p>
  <ol id="chat-log"></ol>
  <div id="composer">
    <input id="message-input" type="text" autocomplete="off"
           placeholder="say something to your partner">
    <button id="send-btn" type="button">Send</button>
    <button id="finish-btn" type="button" disabled>Finish and score</button>
  </div>
  <section id="scoring" hidden>
    <p id="overall-prompt" class="prompt"></p>
    <div id="overall-buttons"></div>
    <p id="good-prompt" class="prompt"></p>
    <div id="good-pairs" class="pair-list"></div>
    <p id="bad-prompt" class="prompt"></p>
    <div id="bad-pairs" class="pair-list"></div>
    <button id="submit-btn" type="button">Submit scores</button>
  </section>
  <section id="done" hidden>
    <h2>All done</h2>
    <p id="done-note"></p>
  </section>
</section>
`;

export class App {
  readonly root: HTMLElement;
  client: EvalClient;
  view: UISessionView | null = null;
  questionnaire: Questionnaire | null = null;
  record: TranscriptRecord | null = null;
  overall: number | null = null;

  private chain: Promise<void> = Promise.resolve();
  private busy = false;

  private readonly el: {
    connect: HTMLElement;
    serviceInput: HTMLInputElement;
    annotatorInput: HTMLInputElement;
    startBtn: HTMLButtonElement;
    error: HTMLElement;
    session: HTMLElement;
    persona: HTMLElement;
    remaining: HTMLElement;
    chatLog: HTMLElement;
    composer: HTMLElement;
    messageInput: HTMLInputElement;
    sendBtn: HTMLButtonElement;
    finishBtn: HTMLButtonElement;
    scoring: HTMLElement;
    overallPrompt: HTMLElement;
    overallButtons: HTMLElement;
    goodPrompt: HTMLElement;
    goodPairs: HTMLElement;
    badPrompt: HTMLElement;
    badPairs: HTMLElement;
    submitBtn: HTMLButtonElement;
    done: HTMLElement;
    doneNote: HTMLElement;
  };

  constructor(root: HTMLElement, config: AppConfig) {
    this.root = root;
    this.client = new EvalClient(config.baseUrl);
    root.innerHTML = SKELETON;
    const q = <T extends HTMLElement>(id: string) => root.querySelector(`#${id}`) as T;
    this.el = {
      connect: q("connect"),
      serviceInput: q<HTMLInputElement>("service-input"),
      annotatorInput: q<HTMLInputElement>("annotator-input"),
      startBtn: q<HTMLButtonElement>("start-btn"),
      error: q("error"),
      session: q("session"),
      persona: q("persona"),
      remaining: q("remaining"),
      chatLog: q("chat-log"),
      composer: q("composer"),
      messageInput: q<HTMLInputElement>("message-input"),
      sendBtn: q<HTMLButtonElement>("send-btn"),
      finishBtn: q<HTMLButtonElement>("finish-btn"),
      scoring: q("scoring"),
      overallPrompt: q("overall-prompt"),
      overallButtons: q("overall-buttons"),
      goodPrompt: q("good-prompt"),
      goodPairs: q("good-pairs"),
      badPrompt: q("bad-prompt"),
      badPairs: q("bad-pairs"),
      submitBtn: q<HTMLButtonElement>("submit-btn"),
      done: q("done"),
      doneNote: q("done-note"),
    };
    this.el.serviceInput.value = config.baseUrl;
    this.el.startBtn.addEventListener("click", () => this.enqueue(() => this.start()));
    this.el.sendBtn.addEventListener("click", () => this.enqueue(() => this.send()));
    this.el.messageInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") this.enqueue(() => this.send());
    });
    this.el.finishBtn.addEventListener("click", () => this.enqueue(() => this.finish()));
    this.el.submitBtn.addEventListener("click", () => this.enqueue(() => this.submit()));
  }

  // tests await this after dispatching clicks
  settle(): Promise<void> {
    return this.chain;
  }

  private enqueue(action: () => Promise<void>): void {
    this.chain = this.chain.then(async () => {
      if (this.busy) return;
      this.busy = true;
      try {
        await action();
        this.clearError();
      } catch (err) {
        this.showError(err);
      } finally {
        this.busy = false;
        this.render();
      }
    });
  }

  private showError(err: unknown): void {
    const text =
      err instanceof ApiError
        ? `the service refused that (${err.status}): ${err.detail}`
        : err instanceof Error
          ? err.message
          : String(err);
    this.el.error.textContent = text;
    this.el.error.hidden = false;
  }

  private clearError(): void {
    this.el.error.textContent = "";
    this.el.error.hidden = true;
  }

  private applyView(view: SessionView): void {
    this.view = toUiView(view);
  }

  private async start(): Promise<void> {
    const base = this.el.serviceInput.value.trim();
    if (base && base !== this.client.baseUrl) this.client = new EvalClient(base);
    const annotatorId = this.el.annotatorInput.value;
    const verdict = annotatorIdVerdict(annotatorId);
    if (!verdict.ok) throw new Error(verdict.reason!);
    // fetch the questionnaire first so the scoring prompts always come
    // from the service, never from this bundle
    this.questionnaire = await this.client.questionnaire();
    this.applyView(await this.client.createSession(annotatorId.trim()));
  }

  private async send(): Promise<void> {
    if (!this.view) return;
    const text = this.el.messageInput.value;
    const verdict = messageVerdict(this.view, text);
    if (!verdict.ok) throw new Error(verdict.reason!);
    this.applyView(await this.client.postMessage(this.view.sessionId, text));
    this.el.messageInput.value = "";
  }

  private async finish(): Promise<void> {
    if (!this.view) return;
    const verdict = finishVerdict(this.view);
    if (!verdict.ok) throw new Error(verdict.reason!);
    this.applyView(await this.client.finish(this.view.sessionId));
  }

  private async submit(): Promise<void> {
    if (!this.view) return;
    const good = this.flagValues(this.el.goodPairs);
    const bad = this.flagValues(this.el.badPairs);
    const verdict = annotationVerdict(this.view, this.overall, good, bad);
    if (!verdict.ok) throw new Error(verdict.reason!);
    this.record = await this.client.submitAnnotation(this.view.sessionId, {
      overall: this.overall!,
      good_pairs: good,
      bad_pairs: bad,
    });
    this.applyView(await this.client.getSession(this.view.sessionId));
  }

  private flagValues(container: HTMLElement): boolean[] {
    const boxes = container.querySelectorAll<HTMLInputElement>("input[type=checkbox]");
    return Array.from(boxes, (box) => box.checked);
  }

  private render(): void {
    const view = this.view;
    if (!view) return;
    this.el.connect.hidden = true;
    this.el.session.hidden = false;

    this.el.persona.replaceChildren(
      ...view.persona.map((line) => {
        const item = document.createElement("li");
        item.textContent = line;
        return item;
      }),
    );

    this.el.chatLog.replaceChildren(
      ...view.pairs.map((pair, index) => {
        const item = document.createElement("li");
        item.className = "pair";
        item.dataset.pair = String(index);
        const you = document.createElement("p");
        you.className = "you";
        you.textContent = `you: ${pair.human}`;
        const them = document.createElement("p");
        them.className = "them";
        them.textContent = `partner: ${pair.reply}`;
        item.append(you, them);
        return item;
      }),
    );

    this.el.remaining.textContent = remainingLabel(view);
    const chatting = view.phase === "chatting";
    this.el.composer.hidden = !chatting;
    this.el.messageInput.disabled = !chatting;
    this.el.sendBtn.disabled = !chatting;
    // locked until the service-reported pair count reaches min_turns
    this.el.finishBtn.disabled = !(chatting && scoringUnlocked(view));

    const scoring = view.phase === "scoring";
    this.el.scoring.hidden = !scoring;
    if (scoring) this.renderScoring(view);

    this.el.done.hidden = view.phase !== "done";
    if (view.phase === "done") {
      this.el.doneNote.textContent =
        `session ${view.sessionId} is closed and the record is stored. ` +
        "Thanks for taking part.";
    }
  }

  private renderScoring(view: UISessionView): void {
    const q = this.questionnaire;
    if (!q) return;
    this.el.overallPrompt.textContent = q.overall;
    this.el.goodPrompt.textContent = q.good;
    this.el.badPrompt.textContent = q.bad;

    if (this.el.overallButtons.childElementCount === 0) {
      for (const value of [1, 2, 3, 4]) {
        const button = document.createElement("button");
        button.type = "button";
        button.className = "overall-btn";
        button.dataset.value = String(value);
        button.textContent = String(value);
        button.setAttribute("aria-pressed", "false");
        button.addEventListener("click", () => {
          this.overall = value;
          for (const sibling of this.el.overallButtons.children) {
            sibling.setAttribute("aria-pressed", String(sibling === button));
          }
        });
        this.el.overallButtons.append(button);
      }
    }

    this.buildPairBoxes(this.el.goodPairs, "good", view.pairsCompleted);
    this.buildPairBoxes(this.el.badPairs, "bad", view.pairsCompleted);
  }

  // exactly one checkbox per completed pair; rebuilt only if the count moved
  private buildPairBoxes(container: HTMLElement, kind: string, count: number): void {
    if (container.childElementCount === count) return;
    container.replaceChildren();
    for (let index = 0; index < count; index += 1) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.className = `${kind}-pair-box`;
      box.dataset.pair = String(index);
      label.append(box, document.createTextNode(` pair ${index + 1}`));
      container.append(label);
    }
  }
}

export function createApp(root: HTMLElement, config: AppConfig): App {
  return new App(root, config);
}
