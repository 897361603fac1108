/** Page wiring: metadata form, lifecycle controls, live charts, summary.
 *
 * Rendering runs on the browser's single event loop. The live feed is the
 * only asynchronous input; its events queue inside LiveFeed and one
 * animation frame drains them, so charts keep pace with the 66.7 Hz event
 * rate without backlog growth.
 */

import { ApiClient } from "./api.js";
import { LiveFeed, type EventStream } from "./feed.js";
import { ACTIONS, LifecycleModel, type LifecycleAction } from "./lifecycle.js";
import { StripChart } from "./plot.js";
import { Dashboard, type SignalName } from "./store.js";
import type { MetadataFields } from "./form.js";

const WINDOW_S = 10;
const STALE_POLL_MS = 250;

interface ChannelSpec {
  signal: SignalName;
  label: string;
  unit: string;
  color: string;
}

const CHANNELS: ChannelSpec[] = [
  { signal: "knee_angle_deg", label: "knee angle", unit: "deg", color: "#4fc3f7" },
  { signal: "knee_vel_dps", label: "knee velocity", unit: "deg/s", color: "#81c784" },
  { signal: "knee_acc_dps2", label: "knee acceleration", unit: "deg/s2", color: "#ffb74d" },
  { signal: "emg1_v", label: "EMG ch1 vastus lateralis", unit: "V", color: "#e57373" },
  { signal: "emg2_v", label: "EMG ch2 semitendinosus", unit: "V", color: "#ba68c8" },
];

function pageTemplate(): string {
  return `
  <header>
    <h1>squatlink</h1>
    <span id="session-label" class="muted">no session</span>
    <span id="stale" class="stale" hidden>live feed stalled</span>
  </header>

  <section class="card">
    <h2>session metadata</h2>
    <form id="metadata-form">
      <label>subject id <input name="subject_id" placeholder="S01" autocomplete="off"></label>
      <label>age range <input name="age_range" placeholder="18-25"></label>
      <label>sex <input name="sex" placeholder="f"></label>
      <label>dominant leg
        <select name="dominant_leg">
          <option value="">choose</option>
          <option value="left">left</option>
          <option value="right">right</option>
        </select>
      </label>
      <button type="submit">create session</button>
    </form>
    <ul id="form-errors" class="errors"></ul>
  </section>

  <section class="card">
    <h2>lifecycle</h2>
    <div class="row">
      ${ACTIONS.map((a) => `<button data-action="${a}" disabled>${a}</button>`).join("")}
      <span>state: <strong id="state-label">idle</strong></span>
    </div>
    <div id="service-error" class="errors"></div>
  </section>

  <section class="card">
    <h2>live signals, last ${WINDOW_S} s</h2>
    <div id="charts">
      ${CHANNELS.map(
        (c) => `
      <figure>
        <canvas data-signal="${c.signal}" width="640" height="110"></canvas>
        <figcaption>${c.label}:
          <span class="last-value" data-signal="${c.signal}">-</span> ${c.unit}
        </figcaption>
      </figure>`,
      ).join("")}
    </div>
  </section>

  <section class="card">
    <h2>summary</h2>
    <div class="row">
      <button id="load-summary" disabled>load summary</button>
      <button id="export-trial" disabled>export csv</button>
      <span id="export-note" class="muted"></span>
    </div>
    <dl id="summary-fields"></dl>
  </section>`;
}

/** EventSource hands over MessageEvents; the feed only needs .data. */
function openStream(url: string): EventStream {
  const source = new EventSource(url);
  const stream: EventStream = {
    onmessage: null,
    onerror: null,
    close: () => source.close(),
  };
  source.onmessage = (event) => stream.onmessage?.({ data: String(event.data) });
  source.onerror = (event) => stream.onerror?.(event);
  return stream;
}

function fmt(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(3);
}

function mustFind<T extends Element>(root: ParentNode, selector: string): T {
  const found = root.querySelector<T>(selector);
  if (!found) {
    throw new Error(`missing element: ${selector}`);
  }
  return found;
}

async function boot(): Promise<void> {
  const root = mustFind<HTMLDivElement>(document, "#app");
  root.innerHTML = pageTemplate();

  const api = new ApiClient("");
  // The service's transition table is the one authority on what the
  // buttons may do; the model is rebuilt from it on every page load.
  const model = new LifecycleModel(await api.lifecycle());
  for (const problem of model.check()) {
    console.warn("lifecycle table:", problem);
  }
  const board = new Dashboard(api, model, WINDOW_S);

  const staleEl = mustFind<HTMLElement>(root, "#stale");
  const stateLabel = mustFind<HTMLElement>(root, "#state-label");
  const sessionLabel = mustFind<HTMLElement>(root, "#session-label");
  const serviceError = mustFind<HTMLElement>(root, "#service-error");
  const formErrors = mustFind<HTMLElement>(root, "#form-errors");
  const summaryFields = mustFind<HTMLElement>(root, "#summary-fields");
  const exportNote = mustFind<HTMLElement>(root, "#export-note");
  const loadSummaryBtn = mustFind<HTMLButtonElement>(root, "#load-summary");
  const exportBtn = mustFind<HTMLButtonElement>(root, "#export-trial");

  const actionButtons = new Map<LifecycleAction, HTMLButtonElement>();
  for (const action of ACTIONS) {
    actionButtons.set(
      action,
      mustFind<HTMLButtonElement>(root, `button[data-action="${action}"]`),
    );
  }

  const charts = new Map<SignalName, StripChart>();
  const valueLabels = new Map<SignalName, HTMLElement>();
  for (const spec of CHANNELS) {
    const canvas = mustFind<HTMLCanvasElement>(
      root,
      `canvas[data-signal="${spec.signal}"]`,
    );
    charts.set(spec.signal, new StripChart(canvas, spec.color, WINDOW_S));
    valueLabels.set(
      spec.signal,
      mustFind<HTMLElement>(root, `.last-value[data-signal="${spec.signal}"]`),
    );
  }

  function render(): void {
    stateLabel.textContent = board.sessionId === null ? "idle" : board.state;
    sessionLabel.textContent = board.sessionId ?? "no session";
    serviceError.textContent = board.serviceError ?? "";
    formErrors.innerHTML = board.formErrors
      .map((problem) => `<li>${problem}</li>`)
      .join("");

    const enabled = new Set(board.enabledActions());
    for (const [action, button] of actionButtons) {
      button.disabled = !enabled.has(action);
    }

    const blocked = board.summaryBlockedReason;
    for (const button of [loadSummaryBtn, exportBtn]) {
      button.disabled = blocked !== null;
      button.title = blocked ?? "";
    }

    exportNote.textContent =
      board.exportPaths === null ? "" : `exported ${board.exportPaths.csv_path}`;
    if (board.summary !== null) {
      summaryFields.innerHTML = Object.entries(board.summary)
        .map(([key, value]) => `<div><dt>${key}</dt><dd>${fmt(value)}</dd></div>`)
        .join("");
    } else {
      summaryFields.innerHTML = "";
    }
  }

  const form = mustFind<HTMLFormElement>(root, "#metadata-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const fields: MetadataFields = {
      subject_id: String(data.get("subject_id") ?? ""),
      age_range: String(data.get("age_range") ?? ""),
      sex: String(data.get("sex") ?? ""),
      dominant_leg: String(data.get("dominant_leg") ?? ""),
    };
    void board.submitMetadata(fields).then(render);
  });

  for (const [action, button] of actionButtons) {
    button.addEventListener("click", () => {
      void board.act(action).then(() => {
        // Stopping ends the trial; pull the summary without another click.
        if (action === "stop" && board.summaryAvailable) {
          void board.loadSummary().then(render);
        }
        render();
      });
    });
  }
  loadSummaryBtn.addEventListener("click", () => {
    void board.loadSummary().then(render);
  });
  exportBtn.addEventListener("click", () => {
    void board.exportTrial().then(render);
  });

  const feed = new LiveFeed(openStream);
  feed.onStale = (stale) => {
    staleEl.hidden = !stale;
  };
  feed.connect(api.liveFeedUrl());
  window.setInterval(() => feed.tick(), STALE_POLL_MS);

  function frame(): void {
    const batch = feed.drain();
    for (const event of batch) {
      board.applyEvent(event);
    }
    if (batch.length > 0 && board.lastEvent !== null) {
      const last = board.lastEvent;
      for (const spec of CHANNELS) {
        // Labels show the event's numbers exactly as they arrived.
        const label = valueLabels.get(spec.signal);
        if (label) {
          label.textContent = String(last[spec.signal]);
        }
        charts.get(spec.signal)?.draw(board.buffers[spec.signal]);
      }
    }
    window.requestAnimationFrame(frame);
  }
  window.requestAnimationFrame(frame);

  render();
}

boot().catch((error: unknown) => {
  document.body.innerHTML = `<pre class="errors">failed to start: ${String(error)}</pre>`;
});
