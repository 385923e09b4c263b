import { SessionClient } from "./api.js";
import { App } from "./app.js";

const client = new SessionClient("");
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void new App(client, root).start();
