// DOM rendering. Reads the model, never the network; all inputs dispatch
// through the controller.

import type { PanelController } from "./controller.js";
import type { PanelModel } from "./model.js";
import { MESSAGE_TYPES } from "./types.js";

const fmt = (v: number, digits = 3) => v.toFixed(digits);

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [k, v] of Object.entries(attrs)) {
        if (k === "class") node.className = v;
        else node.setAttribute(k, v);
    }
    node.append(...children);
    return node;
}

export class PanelView {
    private banner: HTMLElement;
    private objectsBody: HTMLElement;
    private sendersBox: HTMLElement;
    private stoppedBox: HTMLElement;
    private createForm: HTMLFormElement;
    private errorBox: HTMLElement;

    constructor(
        root: HTMLElement,
        private readonly controller: PanelController,
        private readonly model: PanelModel,
        private readonly now: () => number = () => Date.now() / 1000,
    ) {
        this.banner = el("div", { id: "banner", class: "banner" });
        this.errorBox = el("div", { id: "error", class: "error" });
        this.objectsBody = el("tbody", { id: "objects-body" });
        this.sendersBox = el("div", { id: "senders" });
        this.stoppedBox = el("div", { id: "stopped" });
        this.createForm = this.buildCreateForm();

        root.append(
            this.banner,
            this.errorBox,
            el("h2", {}, "Objects"),
            el(
                "table",
                { class: "objects" },
                el(
                    "thead",
                    {},
                    el(
                        "tr",
                        {},
                        ...["object", "capture (m)", "NED (m)", "velocity (m/s)",
                            "rate (Hz)", "drop", "state"].map((h) => el("th", {}, h)),
                    ),
                ),
                this.objectsBody,
            ),
            el("h2", {}, "Senders"),
            this.createForm,
            this.sendersBox,
            el("h2", {}, "Stopped senders"),
            this.stoppedBox,
        );
    }

    private buildCreateForm(): HTMLFormElement {
        const form = el("form", { id: "create-sender", class: "create" });
        const object = el("input", { name: "object", placeholder: "object", required: "" });
        const host = el("input", { name: "host", value: "127.0.0.1" });
        const port = el("input", { name: "port", type: "number", value: "14550" });
        const rate = el("input", { name: "rate_hz", type: "number", value: "50", step: "any" });
        const button = el("button", { type: "submit" }, "launch sender");
        form.append(object, host, port, rate, button);
        form.addEventListener("submit", (ev) => {
            ev.preventDefault();
            this.run(async () => {
                await this.controller.createSender({
                    object: object.value,
                    host: host.value,
                    port: Number(port.value),
                    rate_hz: Number(rate.value),
                });
                this.render();
            });
        });
        return form;
    }

    private run(action: () => Promise<void>): void {
        action().catch((err) => {
            this.errorBox.textContent = String(err?.message ?? err);
        });
    }

    render(): void {
        const now = this.now();
        this.renderBanner();
        this.renderObjects(now);
        this.renderSenders();
        this.renderStopped();
    }

    private renderBanner(): void {
        const state = this.model.connection;
        this.banner.textContent =
            state === "live" ? "" : state === "connecting" ? "connecting to station..." : "connection lost, reconnecting...";
        this.banner.className = `banner ${state}`;
    }

    private renderObjects(now: number): void {
        const rows = this.model.objectRows(now);
        this.objectsBody.replaceChildren(
            ...(rows.length
                ? rows.map((o) =>
                      el(
                          "tr",
                          { class: o.stale ? "stale" : "live", "data-name": o.name },
                          el("td", {}, o.name),
                          el("td", {}, o.position_capture_m.map((v) => fmt(v)).join(", ")),
                          el("td", {}, o.position_ned_m.map((v) => fmt(v)).join(", ")),
                          el("td", {}, o.velocity_m_s.map((v) => fmt(v, 2)).join(", ")),
                          el("td", {}, fmt(o.capture_rate_hz, 1)),
                          el("td", {}, o.drop_rate === null ? "n/a" : fmt(o.drop_rate, 4)),
                          el("td", {}, o.stale ? "STALE" : o.occluded ? "occluded" : "live"),
                      ),
                  )
                : [el("tr", { class: "empty" }, el("td", { colspan: "7" }, "no objects tracked yet"))]),
        );
    }

    private renderSenders(): void {
        this.sendersBox.replaceChildren(
            ...this.model.senderRows().map((s) => {
                const rate = el("input", {
                    type: "number", value: String(s.rate_hz), step: "any", min: "0.1", max: "1000",
                    class: "rate", "data-id": String(s.id),
                });
                rate.addEventListener("change", () =>
                    this.run(async () => {
                        await this.controller.setRate(s.id, Number(rate.value));
                        this.render();
                    }),
                );
                const boxes = MESSAGE_TYPES.map((m) => {
                    const box = el("input", { type: "checkbox", "data-message": m }) as HTMLInputElement;
                    box.checked = s.messages.includes(m);
                    box.addEventListener("change", () =>
                        this.run(async () => {
                            const error = await this.controller.toggleMessage(s.id, m, box.checked);
                            if (error) {
                                box.checked = true; // blocked: revert the click
                                this.errorBox.textContent = error;
                            }
                            this.render();
                        }),
                    );
                    return el("label", { class: "msg" }, box, m);
                });
                const stop = el("button", { class: "stop" }, "stop");
                stop.addEventListener("click", () =>
                    this.run(async () => {
                        await this.controller.stopSender(s.id);
                        this.render();
                    }),
                );
                return el(
                    "div",
                    { class: "sender", "data-id": String(s.id) },
                    el("span", { class: "title" }, `#${s.id} ${s.object} -> ${s.host}:${s.port}`),
                    el("label", {}, "rate (Hz): ", rate),
                    el("span", { class: "measured" },
                       `measured ${fmt(s.stats.measured_output_rate_hz, 2)} Hz, ` +
                       `${s.stats.frames_sent} frames, ${s.stats.deadline_misses} misses`),
                    ...boxes,
                    stop,
                );
            }),
        );
    }

    private renderStopped(): void {
        this.stoppedBox.replaceChildren(
            ...this.model.stopped.map(({ row }) =>
                el(
                    "div",
                    { class: "stopped-sender", "data-id": String(row.id) },
                    `#${row.id} ${row.object}: ${row.stats.frames_sent} frames sent, ` +
                        `${row.stats.deadline_misses} misses, ${row.stats.stale_skips} stale skips`,
                ),
            ),
        );
    }
}
