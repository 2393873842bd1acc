// Panel actions: every mutation goes through the control API and only the
// acknowledged response lands in the model (optimistic updates forbidden).

import type { ApiClient } from "./api.js";
import { PanelModel, toggleMessage } from "./model.js";
import type { SenderCreateRequest } from "./types.js";

export type Clock = () => number;

export class PanelController {
    constructor(
        readonly api: ApiClient,
        readonly model: PanelModel,
        private readonly now: Clock = () => Date.now() / 1000,
    ) {}

    /** Rebuild the whole model from GET endpoints (page load / reload). */
    async refresh(): Promise<void> {
        const [station, objects, senders] = await Promise.all([
            this.api.getStation(),
            this.api.getObjects(),
            this.api.getSenders(),
        ]);
        this.model.station = station;
        this.model.applyObjectsSnapshot(objects, this.now());
        this.model.applySenders(senders);
    }

    async refreshSenders(): Promise<void> {
        this.model.applySenders(await this.api.getSenders());
    }

    async createSender(request: SenderCreateRequest): Promise<number> {
        const id = await this.api.createSender(request);
        await this.refreshSenders(); // render the acknowledged server state
        return id;
    }

    async setRate(id: number, rateHz: number): Promise<void> {
        const acknowledged = await this.api.patchSender(id, { rate_hz: rateHz });
        this.model.applySenderRow({ ...this.requireSender(id), ...acknowledged });
    }

    /**
     * Check-box toggle for one message type; blocked client-side when it
     * would empty the enabled set (the server would reject it anyway).
     */
    async toggleMessage(id: number, message: string, enabled: boolean): Promise<string | null> {
        const current = this.requireSender(id);
        const result = toggleMessage(current.messages, message, enabled);
        if (result.error) {
            return result.error;
        }
        const acknowledged = await this.api.patchSender(id, { messages: result.messages });
        this.model.applySenderRow({ ...current, ...acknowledged });
        return null;
    }

    async stopSender(id: number): Promise<void> {
        const row = this.requireSender(id);
        const finalState = await this.api.deleteSender(id);
        this.model.markStopped({ ...row, stats: finalState.final_stats }, this.now());
    }

    private requireSender(id: number) {
        const row = this.model.sender(id);
        if (!row) throw new Error(`unknown sender ${id}`);
        return row;
    }
}
