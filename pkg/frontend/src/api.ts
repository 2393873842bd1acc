// Thin typed wrapper over the station control API.

import type {
    ObjectRow,
    SenderCreateRequest,
    SenderPatchRequest,
    SenderRow,
    StationSummary,
} from "./types.js";

export class ApiError extends Error {
    constructor(
        readonly status: number,
        detail: string,
    ) {
        super(detail);
    }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    constructor(
        private readonly base: string = "",
        private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchImpl(this.base + path, init);
        if (!response.ok) {
            let detail = `${response.status}`;
            try {
                const body = await response.json();
                detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body);
            } catch {
                // keep the bare status
            }
            throw new ApiError(response.status, detail);
        }
        return (await response.json()) as T;
    }

    getStation(): Promise<StationSummary> {
        return this.request("/api/station");
    }

    getObjects(): Promise<ObjectRow[]> {
        return this.request("/api/objects");
    }

    getSenders(): Promise<SenderRow[]> {
        return this.request("/api/senders");
    }

    async createSender(body: SenderCreateRequest): Promise<number> {
        const created = await this.request<{ id: number }>("/api/senders", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        });
        return created.id;
    }

    patchSender(id: number, patch: SenderPatchRequest): Promise<SenderRow> {
        return this.request(`/api/senders/${id}`, {
            method: "PATCH",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(patch),
        });
    }

    deleteSender(id: number): Promise<{ id: number; final_stats: SenderRow["stats"] }> {
        return this.request(`/api/senders/${id}`, { method: "DELETE" });
    }
}
