// WebSocket stream with automatic reconnect and exponential backoff.

import type { StreamEvent } from "./types.js";

export interface StreamHandlers {
    onEvent(event: StreamEvent): void;
    onState(state: "connecting" | "live" | "reconnecting"): void;
}

interface WebSocketLike {
    onopen: (() => void) | null;
    onclose: (() => void) | null;
    onerror: (() => void) | null;
    onmessage: ((event: { data: string }) => void) | null;
    close(): void;
}

type WsFactory = (url: string) => WebSocketLike;

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 8000;

export class StreamClient {
    private ws: WebSocketLike | null = null;
    private backoffMs = BACKOFF_START_MS;
    private timer: ReturnType<typeof setTimeout> | null = null;
    private closed = false;

    constructor(
        private readonly url: string,
        private readonly handlers: StreamHandlers,
        private readonly wsFactory: WsFactory = (url) =>
            new (globalThis as any).WebSocket(url) as WebSocketLike,
    ) {}

    connect(): void {
        if (this.closed) return;
        this.handlers.onState(this.backoffMs === BACKOFF_START_MS ? "connecting" : "reconnecting");
        const ws = this.wsFactory(this.url);
        this.ws = ws;
        ws.onopen = () => {
            this.backoffMs = BACKOFF_START_MS;
            this.handlers.onState("live");
        };
        ws.onmessage = (event) => {
            let parsed: StreamEvent;
            try {
                parsed = JSON.parse(event.data) as StreamEvent;
            } catch {
                return; // ignore malformed frames
            }
            this.handlers.onEvent(parsed);
        };
        ws.onerror = () => ws.close();
        ws.onclose = () => this.scheduleReconnect();
    }

    private scheduleReconnect(): void {
        if (this.closed || this.timer !== null) return;
        this.handlers.onState("reconnecting");
        this.timer = setTimeout(() => {
            this.timer = null;
            this.connect();
        }, this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_CAP_MS);
    }

    close(): void {
        this.closed = true;
        if (this.timer !== null) clearTimeout(this.timer);
        this.ws?.close();
    }
}
