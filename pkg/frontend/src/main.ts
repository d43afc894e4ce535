import { ApiClient } from "./api.js";
import { startApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const annotator = params.get("annotator") ?? "anonymous";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
startApp(root, new ApiClient(""), annotator);
