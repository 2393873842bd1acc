import { ApiClient } from "./api.js";
import { PanelController } from "./controller.js";
import { PanelModel } from "./model.js";
import { StreamClient } from "./stream.js";
import { PanelView } from "./view.js";

const model = new PanelModel();
const api = new ApiClient("");
const controller = new PanelController(api, model);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
const view = new PanelView(root, controller, model);

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/api/stream`;
const stream = new StreamClient(wsUrl, {
    onEvent: (event) => {
        model.applyEvent(event, Date.now() / 1000);
        view.render();
    },
    onState: (state) => {
        model.setConnection(state);
        view.render();
    },
});

controller
    .refresh()
    .then(() => view.render())
    .catch((err) => console.error("initial refresh failed", err));
stream.connect();

// re-render once a second so staleness flags advance between events
setInterval(() => view.render(), 1000);
