/** Dashboard state: form, lifecycle, rolling signal buffers, summary.
 *
 * Everything the page renders lives here, DOM-free, so the whole operator
 * workflow is testable without a browser. Display code reads these fields
 * back untouched; in particular the last-value labels show the most recent
 * LiveFeedEvent's numbers exactly, with no client-side re-derivation.
 */

import { type CreateSessionFields, type CreatedSession } from "./api.js";
import { RollingBuffer } from "./buffer.js";
import { validateMetadata, type MetadataFields } from "./form.js";
import { LifecycleModel, type LifecycleAction } from "./lifecycle.js";
import type {
  ExportPaths,
  LiveFeedEvent,
  SessionSummary,
  SessionView,
} from "./types.js";

/** The five plotted signals, keyed by their event field names. */
export const SIGNALS = [
  "knee_angle_deg",
  "knee_vel_dps",
  "knee_acc_dps2",
  "emg1_v",
  "emg2_v",
] as const;

export type SignalName = (typeof SIGNALS)[number];

/** What the dashboard needs from the service; ApiClient satisfies it. */
export interface ControlApi {
  createSession(fields: CreateSessionFields): Promise<CreatedSession>;
  calibrate(sessionId: string): Promise<SessionView>;
  record(sessionId: string): Promise<SessionView>;
  stop(sessionId: string): Promise<SessionView>;
  summary(sessionId: string): Promise<SessionSummary>;
  exportSession(sessionId: string): Promise<ExportPaths>;
}

export class Dashboard {
  sessionId: string | null = null;
  state = "idle";
  formErrors: string[] = [];
  serviceError: string | null = null;
  lastEvent: LiveFeedEvent | null = null;
  summary: SessionSummary | null = null;
  exportPaths: ExportPaths | null = null;
  readonly buffers: Record<SignalName, RollingBuffer>;

  constructor(
    private readonly api: ControlApi,
    private readonly lifecycle: LifecycleModel,
    windowS = 10,
  ) {
    const buffers = {} as Record<SignalName, RollingBuffer>;
    for (const name of SIGNALS) {
      buffers[name] = new RollingBuffer(windowS);
    }
    this.buffers = buffers;
  }

  /** Create a session from the form; invalid forms never reach the API. */
  async submitMetadata(fields: MetadataFields): Promise<boolean> {
    this.formErrors = validateMetadata(fields);
    if (this.formErrors.length > 0) {
      return false;
    }
    this.serviceError = null;
    try {
      const created = await this.api.createSession(fields);
      this.sessionId = created.session_id;
      this.state = created.state;
      this.summary = null;
      this.exportPaths = null;
      this.lastEvent = null;
      for (const name of SIGNALS) {
        this.buffers[name].clear();
      }
      return true;
    } catch (error) {
      this.serviceError = describe(error);
      return false;
    }
  }

  enabledActions(): LifecycleAction[] {
    if (this.sessionId === null) {
      return [];
    }
    return this.lifecycle.enabledActions(this.state);
  }

  /** Drive one lifecycle transition; illegal ones are refused locally. */
  async act(action: LifecycleAction): Promise<boolean> {
    if (this.sessionId === null || !this.lifecycle.allows(this.state, action)) {
      // The buttons should make this branch unreachable.
      this.serviceError = `illegal transition: ${this.state} -> ${action}`;
      return false;
    }
    this.serviceError = null;
    try {
      const view = await this.api[action](this.sessionId);
      this.state = view.state;
      return true;
    } catch (error) {
      this.serviceError = describe(error);
      return false;
    }
  }

  get summaryAvailable(): boolean {
    return this.state === "stopped";
  }

  /** Tooltip for the summary and export controls while disabled. */
  get summaryBlockedReason(): string | null {
    if (this.summaryAvailable) {
      return null;
    }
    return "available once the session is stopped";
  }

  async loadSummary(): Promise<SessionSummary | null> {
    if (this.sessionId === null || !this.summaryAvailable) {
      return null;
    }
    try {
      this.summary = await this.api.summary(this.sessionId);
      return this.summary;
    } catch (error) {
      this.serviceError = describe(error);
      return null;
    }
  }

  async exportTrial(): Promise<ExportPaths | null> {
    if (this.sessionId === null || !this.summaryAvailable) {
      return null;
    }
    try {
      this.exportPaths = await this.api.exportSession(this.sessionId);
      return this.exportPaths;
    } catch (error) {
      this.serviceError = describe(error);
      return null;
    }
  }

  /** Append one live event to the plots. Events for other sessions (say,
   * a stream that outlived a restart) are dropped. */
  applyEvent(event: LiveFeedEvent): void {
    if (event.session_id !== this.sessionId) {
      return;
    }
    this.lastEvent = event;
    for (const name of SIGNALS) {
      this.buffers[name].push(event.t_s, event[name]);
    }
  }
}

function describe(error: unknown): string {
  // ApiError messages already lead with the service's error code.
  return error instanceof Error ? error.message : String(error);
}
