// Panel view-model: a plain state container fed exclusively by control-API
// responses and stream events. Rendering reads from here; nothing in this
// file talks to the network.

import type {
    ConnectionState,
    ObjectRow,
    SenderRow,
    StationSummary,
    StreamEvent,
} from "./types.js";

export const STALE_AFTER_S = 2.0;

interface TimedObjectRow {
    row: ObjectRow;
    receivedAt: number; // panel clock seconds
}

export interface StoppedSender {
    row: SenderRow;
    stoppedAt: number;
}

export class PanelModel {
    private objects = new Map<string, TimedObjectRow>();
    private senders = new Map<number, SenderRow>();
    stopped: StoppedSender[] = [];
    station: StationSummary | null = null;
    connection: ConnectionState = "connecting";
    lastError = "";

    applyEvent(event: StreamEvent, now: number): void {
        if (event.type === "objects") {
            for (const row of event.objects) {
                this.objects.set(row.name, { row, receivedAt: now });
            }
        } else {
            this.applySenders(event.senders);
        }
    }

    applyObjectsSnapshot(rows: ObjectRow[], now: number): void {
        this.objects.clear();
        for (const row of rows) {
            this.objects.set(row.name, { row, receivedAt: now });
        }
    }

    applySenders(rows: SenderRow[]): void {
        this.senders.clear();
        for (const row of rows) {
            this.senders.set(row.id, row);
        }
    }

    applySenderRow(row: SenderRow): void {
        this.senders.set(row.id, row);
    }

    markStopped(row: SenderRow, now: number): void {
        this.senders.delete(row.id);
        this.stopped.push({ row, stoppedAt: now });
    }

    setConnection(state: ConnectionState): void {
        this.connection = state;
    }

    objectRows(now: number): Array<ObjectRow & { noEventFor: number }> {
        return [...this.objects.values()]
            .map(({ row, receivedAt }) => ({
                ...row,
                // flag rows the stream has gone quiet on, on top of the
                // station's own staleness flag
                stale: row.stale || now - receivedAt > STALE_AFTER_S,
                noEventFor: now - receivedAt,
            }))
            .sort((a, b) => a.name.localeCompare(b.name));
    }

    senderRows(): SenderRow[] {
        return [...this.senders.values()].sort((a, b) => a.id - b.id);
    }

    sender(id: number): SenderRow | undefined {
        return this.senders.get(id);
    }
}

/**
 * Client-side mirror of the sender invariant: the enabled message set must
 * never become empty. Returns the new message list, or an error string when
 * the toggle must be blocked (the PATCH is then not sent at all).
 */
export function toggleMessage(
    current: string[],
    message: string,
    enabled: boolean,
): { messages?: string[]; error?: string } {
    const set = new Set(current);
    if (enabled) {
        set.add(message);
    } else {
        set.delete(message);
        if (set.size === 0) {
            return { error: "at least one message type must stay enabled" };
        }
    }
    return { messages: [...set].sort() };
}
