import { TaskLoop, type LoopState, type TaskClient } from "./controller.js";
import { canSubmit, keyBindings, selectLabel, setFocus, setTag } from "./state.js";
import { isPosPayload, TASK_KINDS } from "./types.js";

export interface AppOptions {
  annotator: string;
  variantLabels?: readonly string[];
  sleep?: (ms: number) => Promise<void>;
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/**
 * Build the page inside `root` and return the TaskLoop driving it.
 * Rendering happens on every loop state change; all mutation goes back
 * through the loop so its guarantees (gated submit, single in-flight
 * submit, exactly-once progress) hold for clicks and keys alike.
 */
export function mountApp(
  root: HTMLElement,
  client: TaskClient,
  options: AppOptions,
): TaskLoop {
  root.innerHTML = `
    <header>
      <nav id="kinds"></nav>
      <span id="progress"></span>
    </header>
    <main id="task"></main>
    <div id="message" role="status"></div>
    <footer>
      <button id="submit" type="button" disabled>submit</button>
      <span class="hint">keys: 1-9, 0, a-g pick a label &middot; arrows move &middot; enter submits</span>
    </footer>
  `;

  const kindsEl = root.querySelector("#kinds") as HTMLElement;
  const progressEl = root.querySelector("#progress") as HTMLElement;
  const taskEl = root.querySelector("#task") as HTMLElement;
  const messageEl = root.querySelector("#message") as HTMLElement;
  const submitEl = root.querySelector("#submit") as HTMLButtonElement;

  const loop = new TaskLoop(
    client,
    {
      onState: (state) => {
        render(state);
      },
      sleep: options.sleep ?? defaultSleep,
      annotator: options.annotator,
    },
    { variantLabels: options.variantLabels },
  );

  for (const kind of TASK_KINDS) {
    const button = document.createElement("button");
    button.type = "button";
    button.dataset.kind = kind;
    button.textContent = kind;
    button.addEventListener("click", () => {
      void loop.setKind(kind);
    });
    kindsEl.appendChild(button);
  }

  submitEl.addEventListener("click", () => {
    void loop.submit();
  });

  document.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    loop.handleKey(event.key);
  });

  render(loop.current());
  return loop;

  function render(state: LoopState): void {
    for (const button of kindsEl.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.kind === state.kind);
    }
    progressEl.textContent = `${state.labeled} / ${state.total} labeled`;
    messageEl.textContent = state.message;
    submitEl.disabled =
      state.phase !== "annotating" || state.view === null || !canSubmit(state.view);
    renderTask(state);
  }

  function renderTask(state: LoopState): void {
    taskEl.innerHTML = "";
    if (state.phase === "done") {
      const done = document.createElement("p");
      done.className = "done";
      done.textContent = "all tasks labeled";
      taskEl.appendChild(done);
      return;
    }
    if (state.phase === "loading") {
      const note = document.createElement("p");
      note.textContent = "loading…";
      taskEl.appendChild(note);
      return;
    }
    const view = state.view;
    if (view === null) {
      return;
    }
    const heading = document.createElement("h2");
    heading.textContent = view.task.task_id;
    taskEl.appendChild(heading);

    if (view.task.kind === "pos") {
      renderPos(state);
    } else {
      renderChoice(state);
    }
  }

  function renderChoice(state: LoopState): void {
    const view = state.view;
    if (view === null || isPosPayload(view.task.payload)) {
      return;
    }
    const text = document.createElement("p");
    text.className = "chunk";
    text.textContent = view.task.payload.text;
    taskEl.appendChild(text);

    const list = document.createElement("div");
    list.className = "options";
    const keys = invert(keyBindings(view.options));
    for (const option of view.options) {
      const button = document.createElement("button");
      button.type = "button";
      button.dataset.option = option;
      button.textContent = `${keys.get(option) ?? ""} ${option}`.trim();
      button.classList.toggle("selected", view.selection === option);
      button.addEventListener("click", () => {
        loop.setView(selectLabel(view, option));
      });
      list.appendChild(button);
    }
    taskEl.appendChild(list);
  }

  function renderPos(state: LoopState): void {
    const view = state.view;
    if (view === null || !isPosPayload(view.task.payload)) {
      return;
    }
    const keys = invert(keyBindings(view.options));
    const table = document.createElement("div");
    table.className = "tokens";
    view.task.payload.tokens.forEach((token, i) => {
      const row = document.createElement("div");
      row.className = "token-row";
      row.classList.toggle("focused", view.focus === i);

      const word = document.createElement("span");
      word.className = "token";
      word.textContent = token;
      word.addEventListener("click", () => {
        loop.setView(setFocus(view, i));
      });
      row.appendChild(word);

      const picker = document.createElement("span");
      picker.className = "tags";
      for (const tag of view.options) {
        const button = document.createElement("button");
        button.type = "button";
        button.dataset.token = String(i);
        button.dataset.tag = tag;
        button.title = `${keys.get(tag) ?? ""} ${tag}`.trim();
        button.textContent = tag;
        button.classList.toggle("selected", view.tags[i] === tag);
        button.addEventListener("click", () => {
          loop.setView(setTag(view, i, tag));
        });
        picker.appendChild(button);
      }
      row.appendChild(picker);
      table.appendChild(row);
    });
    taskEl.appendChild(table);
  }

  function invert(bindings: Map<string, string>): Map<string, string> {
    const out = new Map<string, string>();
    for (const [key, option] of bindings) {
      if (!out.has(option)) {
        out.set(option, key);
      }
    }
    return out;
  }
}
