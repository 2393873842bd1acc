// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { PanelController } from "../src/controller.js";
import { PanelModel } from "../src/model.js";
import { PanelView } from "../src/view.js";
import type { ObjectRow, SenderRow } from "../src/types.js";

function objectRow(name: string, overrides: Partial<ObjectRow> = {}): ObjectRow {
    return {
        name,
        frame_number: 10,
        capture_time: 0.1,
        occluded: false,
        position_capture_m: [1, 2, 3],
        velocity_m_s: [0.5, 0, 0],
        position_ned_m: [1, -2, -3],
        orientation_wxyz: [1, 0, 0, 0],
        capture_rate_hz: 100,
        drop_rate: 0,
        last_seen: 0.1,
        stale: false,
        ...overrides,
    };
}

function senderRow(id: number, overrides: Partial<SenderRow> = {}): SenderRow {
    return {
        id,
        object: "uav1",
        host: "127.0.0.1",
        port: 14550,
        rate_hz: 50,
        messages: ["HIL_GPS", "LOCAL_POSITION_NED", "ATT_POS_MOCAP"],
        protocol_version: 2,
        stats: {
            ticks_total: 100,
            frames_sent: 300,
            deadline_misses: 0,
            stale_skips: 0,
            measured_output_rate_hz: 49.97,
        },
        ...overrides,
    };
}

describe("PanelView", () => {
    let model: PanelModel;
    let view: PanelView;
    let patches: Array<{ id: number; body: unknown }>;
    let now: number;

    beforeEach(() => {
        document.body.innerHTML = '<div id="app"></div>';
        model = new PanelModel();
        patches = [];
        now = 100;
        const fetchImpl = async (url: string, init?: RequestInit) => {
            if (init?.method === "PATCH") {
                const id = Number(url.split("/").pop());
                const body = JSON.parse(String(init.body));
                patches.push({ id, body });
                const current = model.sender(id)!;
                return new Response(
                    JSON.stringify({
                        ...current,
                        ...(body.rate_hz !== undefined ? { rate_hz: body.rate_hz } : {}),
                        ...(body.messages !== undefined ? { messages: body.messages } : {}),
                    }),
                    { status: 200 },
                );
            }
            return new Response("[]", { status: 200 });
        };
        const controller = new PanelController(new ApiClient("", fetchImpl), model, () => now);
        view = new PanelView(document.getElementById("app")!, controller, model, () => now);
    });

    it("renders an empty state without errors", () => {
        view.render();
        expect(document.querySelector("tr.empty")?.textContent).toMatch(/no objects/);
    });

    it("renders object rows with capture and NED positions", () => {
        model.applyEvent({ type: "objects", t: 1, objects: [objectRow("uav1")] }, now);
        view.render();
        const row = document.querySelector('tr[data-name="uav1"]')!;
        const cells = [...row.querySelectorAll("td")].map((td) => td.textContent);
        expect(cells[1]).toBe("1.000, 2.000, 3.000");
        expect(cells[2]).toBe("1.000, -2.000, -3.000");
        expect(row.className).toBe("live");
    });

    it("marks quiet rows stale in the table", () => {
        model.applyEvent({ type: "objects", t: 1, objects: [objectRow("uav1")] }, now);
        now += 3;
        view.render();
        expect(document.querySelector('tr[data-name="uav1"]')!.className).toBe("stale");
        expect(document.querySelector('tr[data-name="uav1"] td:last-child')!.textContent).toBe("STALE");
    });

    it("shows the reconnect banner when the stream drops", () => {
        model.setConnection("reconnecting");
        view.render();
        expect(document.getElementById("banner")!.textContent).toMatch(/reconnecting/);
        model.setConnection("live");
        view.render();
        expect(document.getElementById("banner")!.textContent).toBe("");
    });

    it("sends a PATCH when the rate input changes", async () => {
        model.applySenders([senderRow(1)]);
        view.render();
        const input = document.querySelector<HTMLInputElement>('input.rate[data-id="1"]')!;
        input.value = "100";
        input.dispatchEvent(new Event("change"));
        await vi.waitFor(() => expect(model.sender(1)!.rate_hz).toBe(100));
        expect(patches).toEqual([{ id: 1, body: { rate_hz: 100 } }]);
    });

    it("unchecking the last message box is blocked client-side", async () => {
        model.applySenders([senderRow(1, { messages: ["HIL_GPS"] })]);
        view.render();
        const box = document.querySelector<HTMLInputElement>('input[data-message="HIL_GPS"]')!;
        box.checked = false;
        box.dispatchEvent(new Event("change"));
        await vi.waitFor(() =>
            expect(document.getElementById("error")!.textContent).toMatch(/at least one/),
        );
        expect(patches).toHaveLength(0); // no request went out
        expect(model.sender(1)!.messages).toEqual(["HIL_GPS"]);
    });

    it("unchecking one of several messages issues a PATCH", async () => {
        model.applySenders([senderRow(1)]);
        view.render();
        const box = document.querySelector<HTMLInputElement>('input[data-message="HIL_GPS"]')!;
        box.checked = false;
        box.dispatchEvent(new Event("change"));
        await vi.waitFor(() => expect(patches).toHaveLength(1));
        expect(patches[0].body).toEqual({ messages: ["ATT_POS_MOCAP", "LOCAL_POSITION_NED"] });
    });

    it("stop moves the sender to the stopped list with final stats", async () => {
        const finalStats = {
            ticks_total: 500, frames_sent: 1500, deadline_misses: 2,
            stale_skips: 0, measured_output_rate_hz: 50,
        };
        const fetchImpl = async (url: string, init?: RequestInit) => {
            if (init?.method === "DELETE") {
                return new Response(JSON.stringify({ id: 1, final_stats: finalStats }), { status: 200 });
            }
            return new Response("[]", { status: 200 });
        };
        document.body.innerHTML = '<div id="app"></div>';
        const controller = new PanelController(new ApiClient("", fetchImpl), model, () => now);
        view = new PanelView(document.getElementById("app")!, controller, model, () => now);
        model.applySenders([senderRow(1)]);
        view.render();
        document.querySelector<HTMLButtonElement>("button.stop")!.click();
        await vi.waitFor(() => expect(model.stopped).toHaveLength(1));
        view.render();
        expect(document.querySelector(".stopped-sender")!.textContent).toMatch(/1500 frames/);
        expect(document.querySelectorAll(".sender")).toHaveLength(0);
    });
});
