/** Wire shapes exchanged with the ingestion service. Field names match the
 * JSON bodies verbatim so nothing gets renamed in transit. */

export interface LiveFeedEvent {
  session_id: string;
  seq: number;
  t_s: number;
  knee_angle_deg: number;
  knee_vel_dps: number;
  knee_acc_dps2: number;
  emg1_v: number;
  emg2_v: number;
}

export interface SessionMetadata {
  subject_id: string;
  age_range: string;
  sex: string;
  dominant_leg: string;
  created_at: string;
}

export interface SessionView {
  session_id: string;
  state: string;
  metadata: SessionMetadata;
  sample_count: number;
  offset_deg: number | null;
}

export interface SessionSummary {
  rep_count: number;
  rom_deg: number;
  peak_flexion_deg: number;
  peak_velocity_dps: number;
  peak_accel_dps2: number;
  emg1_peak_v: number;
  emg1_mean_v: number;
  emg2_peak_v: number;
  emg2_mean_v: number;
}

export interface ExportPaths {
  csv_path: string;
  meta_path: string;
}

export interface IngestStats {
  received: number;
  dropped: number;
  crc_failures: number;
  observed_rate_hz: number;
  orphaned: number;
  suspect: number;
  sessions: number;
  active_session: string | null;
  subscribers: number;
}

/** State name to the list of states it may enter, as served by the API. */
export type LifecycleTable = Record<string, string[]>;
