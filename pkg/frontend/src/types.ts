// Shapes mirrored from the review service's JSON contract.

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type Verdict = "tp" | "fp";
export type ReviewLabel = Verdict | "unreviewed";

export interface TrackSummary {
  track_id: number;
  state: string;
  review_label: ReviewLabel;
  point_count: number;
  first_frame_id: number;
  last_frame_id: number;
  first_timestamp_ms: number | null;
  best_confidence: number;
  last_box: Box;
  last_provenance: string;
  geo: { lat: number; lon: number } | null;
  updated_seq: number;
}

export interface TracksPage {
  tracks: TrackSummary[];
  page: number;
  page_size: number;
  total: number;
}

export interface TrackPoint {
  frame_id: number;
  x: number;
  y: number;
  w: number;
  h: number;
  conf: number;
  provenance: string;
}

export interface CropRef {
  index: number;
  frame_id: number;
  provenance: string;
  confidence: number;
  placeholder: boolean;
  url: string;
}

export interface TrackDetail {
  summary: TrackSummary;
  points: TrackPoint[];
  crops: CropRef[];
}

export interface LabelAck {
  track_id: number;
  verdict: Verdict;
  reviewer: string;
  labeled_at_ms: number;
}

export interface Metrics {
  frames_in: number;
  frames_detected: number;
  frames_propagated: number;
  frames_dropped: number;
  end_to_end_fps: number;
  queue_depths: { frame_queue: number; result_queue: number };
  status: string;
  [key: string]: unknown;
}

export interface StatsResponse {
  metrics: Metrics;
  review: { tracks: number; reviewed: number; unreviewed: number };
}

/** One parsed server-sent event. */
export interface ServerEvent {
  id: number | null;
  type: string; // TrackCreated | TrackUpdated | TrackLost | TrackLabeled | MetricsTick | gap
  data: Record<string, unknown>;
}
