import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { LifecycleModel } from "../src/lifecycle.js";
import { Dashboard, SIGNALS, type ControlApi } from "../src/store.js";
import type {
  LifecycleTable,
  LiveFeedEvent,
  SessionSummary,
  SessionView,
} from "../src/types.js";

const TABLE: LifecycleTable = {
  created: ["calibrating"],
  calibrating: ["recording"],
  recording: ["stopped"],
  stopped: [],
};

const SUMMARY: SessionSummary = {
  rep_count: 5,
  rom_deg: 118.2,
  peak_flexion_deg: 120.5,
  peak_velocity_dps: 151.3,
  peak_accel_dps2: 902.4,
  emg1_peak_v: 1.6,
  emg1_mean_v: 0.42,
  emg2_peak_v: 0.93,
  emg2_mean_v: 0.31,
};

const FIELDS = {
  subject_id: "S01",
  age_range: "18-25",
  sex: "f",
  dominant_leg: "left",
};

const EVENT: LiveFeedEvent = {
  session_id: "s0001",
  seq: 42,
  t_s: 0.63,
  knee_angle_deg: 118.30000000000001,
  knee_vel_dps: -87.25,
  knee_acc_dps2: 412.0625,
  emg1_v: 1.5998,
  emg2_v: 0.7441,
};

function makeBoard() {
  const calls: string[] = [];
  let nextError: ApiError | null = null;
  const view = (state: string): SessionView => ({
    session_id: "s0001",
    state,
    metadata: {
      subject_id: "S01",
      age_range: "18-25",
      sex: "f",
      dominant_leg: "left",
      created_at: "",
    },
    sample_count: 0,
    offset_deg: null,
  });
  const gate = () => {
    if (nextError) {
      const raised = nextError;
      nextError = null;
      throw raised;
    }
  };
  const api: ControlApi = {
    async createSession() {
      calls.push("create");
      gate();
      return { session_id: "s0001", state: "created" };
    },
    async calibrate() {
      calls.push("calibrate");
      gate();
      return view("calibrating");
    },
    async record() {
      calls.push("record");
      gate();
      return view("recording");
    },
    async stop() {
      calls.push("stop");
      gate();
      return view("stopped");
    },
    async summary() {
      calls.push("summary");
      gate();
      return SUMMARY;
    },
    async exportSession() {
      calls.push("export");
      gate();
      return { csv_path: "/data/S01/trial_001.csv", meta_path: "/data/S01/trial_001.meta.json" };
    },
  };
  const board = new Dashboard(api, new LifecycleModel(TABLE), 10);
  return {
    board,
    calls,
    fail: (error: ApiError) => {
      nextError = error;
    },
  };
}

describe("dashboard state", () => {
  it("refuses an empty subject without calling the service", async () => {
    const { board, calls } = makeBoard();
    const ok = await board.submitMetadata({ ...FIELDS, subject_id: "  " });
    expect(ok).toBe(false);
    expect(board.formErrors).toContain("subject_id is required");
    // The invalid form never reached the network.
    expect(calls).toEqual([]);
  });

  it("requires a dominant leg choice", async () => {
    const { board, calls } = makeBoard();
    expect(await board.submitMetadata({ ...FIELDS, dominant_leg: "" })).toBe(false);
    expect(board.formErrors).toContain("choose a dominant leg");
    expect(calls).toEqual([]);
  });

  it("walks the full lifecycle, enabling only legal buttons", async () => {
    const { board, calls } = makeBoard();
    expect(board.enabledActions()).toEqual([]); // no session yet

    expect(await board.submitMetadata(FIELDS)).toBe(true);
    expect(board.state).toBe("created");
    expect(board.enabledActions()).toEqual(["calibrate"]);

    await board.act("calibrate");
    expect(board.enabledActions()).toEqual(["record"]);
    await board.act("record");
    expect(board.enabledActions()).toEqual(["stop"]);
    await board.act("stop");
    expect(board.enabledActions()).toEqual([]);

    expect(calls).toEqual(["create", "calibrate", "record", "stop"]);
  });

  it("blocks illegal transitions locally", async () => {
    const { board, calls } = makeBoard();
    await board.submitMetadata(FIELDS);
    // created -> stopped is not an edge of the table.
    expect(await board.act("stop")).toBe(false);
    expect(calls).toEqual(["create"]);
    expect(board.serviceError).toContain("illegal transition");
    expect(board.state).toBe("created");
  });

  it("renders service rejections verbatim with their code", async () => {
    const { board, fail } = makeBoard();
    await board.submitMetadata(FIELDS);
    fail(new ApiError("state_error", "cannot calibrate twice", 409));
    expect(await board.act("calibrate")).toBe(false);
    expect(board.serviceError).toBe("state_error: cannot calibrate twice");
  });

  it("keeps the latest event's values exactly, no re-derivation", async () => {
    const { board } = makeBoard();
    await board.submitMetadata(FIELDS);
    board.applyEvent(EVENT);
    // Same object, field for field; labels read these values back as-is.
    expect(board.lastEvent).toBe(EVENT);
    for (const name of SIGNALS) {
      expect(board.buffers[name].latest()).toEqual({
        t: EVENT.t_s,
        value: EVENT[name],
      });
    }
  });

  it("ignores events from other sessions", async () => {
    const { board } = makeBoard();
    await board.submitMetadata(FIELDS);
    board.applyEvent({ ...EVENT, session_id: "s0999" });
    expect(board.lastEvent).toBeNull();
    expect(board.buffers.knee_angle_deg.length).toBe(0);
  });

  it("gates summary and export on the stopped state", async () => {
    const { board, calls } = makeBoard();
    await board.submitMetadata(FIELDS);

    expect(board.summaryAvailable).toBe(false);
    expect(board.summaryBlockedReason).toBeTruthy();
    expect(await board.loadSummary()).toBeNull();
    expect(await board.exportTrial()).toBeNull();
    // Neither gated call went out before the stop.
    expect(calls).toEqual(["create"]);

    await board.act("calibrate");
    await board.act("record");
    await board.act("stop");
    expect(board.summaryBlockedReason).toBeNull();

    const summary = await board.loadSummary();
    expect(summary?.rep_count).toBe(5);
    const paths = await board.exportTrial();
    expect(paths?.csv_path).toMatch(/trial_001\.csv$/);
    expect(board.exportPaths).toEqual(paths);
  });

  it("starting a new session clears the previous trial's traces", async () => {
    const { board } = makeBoard();
    await board.submitMetadata(FIELDS);
    board.applyEvent(EVENT);
    await board.act("calibrate");
    await board.act("record");
    await board.act("stop");
    await board.loadSummary();

    await board.submitMetadata(FIELDS);
    expect(board.summary).toBeNull();
    expect(board.lastEvent).toBeNull();
    expect(board.buffers.emg1_v.length).toBe(0);
  });
});
