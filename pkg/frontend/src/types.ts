// Shapes of the station control API payloads. The panel never invents
// telemetry: everything rendered comes from these responses and events.

export interface ObjectRow {
    name: string;
    frame_number: number;
    capture_time: number;
    occluded: boolean;
    position_capture_m: [number, number, number];
    velocity_m_s: [number, number, number];
    position_ned_m: [number, number, number];
    orientation_wxyz: [number, number, number, number];
    capture_rate_hz: number;
    drop_rate: number | null;
    last_seen: number;
    stale: boolean;
}

export interface SenderStats {
    ticks_total: number;
    frames_sent: number;
    deadline_misses: number;
    stale_skips: number;
    measured_output_rate_hz: number;
}

export interface SenderRow {
    id: number;
    object: string;
    host: string;
    port: number;
    rate_hz: number;
    messages: string[];
    protocol_version: number;
    stats: SenderStats;
}

export interface StationSummary {
    origin: { latitude_deg: number; longitude_deg: number; altitude_m: number };
    frame_mapping: number[];
    ingest_source: string;
    api_bind: string;
    uptime_s: number;
    objects: string[];
    sender_count: number;
}

export interface SenderCreateRequest {
    object: string;
    host: string;
    port: number;
    rate_hz?: number;
    messages?: string[];
    protocol_version?: number;
}

export interface SenderPatchRequest {
    rate_hz?: number;
    messages?: string[];
    host?: string;
    port?: number;
    protocol_version?: number;
}

export type StreamEvent =
    | { type: "objects"; t: number; objects: ObjectRow[] }
    | { type: "senders"; t: number; senders: SenderRow[] };

export const MESSAGE_TYPES = ["HIL_GPS", "LOCAL_POSITION_NED", "ATT_POS_MOCAP"] as const;

export type ConnectionState = "connecting" | "live" | "reconnecting";
