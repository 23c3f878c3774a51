/**
 * Browser bootstrap: point it at a running service
 * (`advtext serve --model topic=topic.ckpt --htp topic=white.json`),
 * paste a document, pick a target class, and start crafting.
 *
 * Query parameters: ?base=http://127.0.0.1:8970&model=topic&mode=white
 */

import { WorkbenchClient } from "./api.js";
import { renderWorkbench } from "./render.js";
import { WorkbenchSession } from "./state.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("base") ?? "http://127.0.0.1:8970";
const model = params.get("model") ?? "topic";
const mode = params.get("mode") ?? "white";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const client = new WorkbenchClient(base);

function draw(session: WorkbenchSession): void {
  renderWorkbench(root as HTMLElement, session.state, {
    onSuggest: (strategies) =>
      session.requestSuggestions(strategies, session.state.target).then(() => draw(session)),
    onApply: (id) => session.applyCandidate(id).then(() => draw(session)),
    onUndo: () => session.undo().then(() => draw(session)),
    onTargetChange: (target) => {
      session.state.target = target;
      session.requestSuggestions(["insert", "modify", "remove"], target)
        .then(() => draw(session));
    },
    onSnippet: (text, offset) =>
      session.submitSnippet(text, offset).then(() => draw(session)),
  });
}

function renderLauncher(): void {
  const launcher = document.createElement("div");
  launcher.className = "launcher";
  const textarea = document.createElement("textarea");
  textarea.placeholder = "paste the document to perturb";
  textarea.rows = 6;
  const targetInput = document.createElement("input");
  targetInput.type = "text";
  targetInput.placeholder = "target class";
  const button = document.createElement("button");
  button.textContent = "open session";
  button.addEventListener("click", async () => {
    try {
      const session = await WorkbenchSession.open(
        client, model, textarea.value, targetInput.value, mode);
      draw(session);
    } catch (err) {
      const banner = document.createElement("div");
      banner.className = "banner banner-offline";
      banner.textContent = `cannot open session: ${String(err)}`;
      (root as HTMLElement).prepend(banner);
    }
  });
  launcher.append(textarea, targetInput, button);
  (root as HTMLElement).appendChild(launcher);
}

renderLauncher();
