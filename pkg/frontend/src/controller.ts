import { ApiError } from "./client.js";
import {
  applyKey,
  backoffDelay,
  canSubmit,
  labelOf,
  viewOf,
  type TaskView,
} from "./state.js";
import {
  DEFAULT_VARIANT_LABELS,
  QUALITY_LABELS,
  UNIVERSAL_TAGS,
  type KindProgress,
  type LabelValue,
  type Progress,
  type SubmitAck,
  type Task,
  type TaskKind,
} from "./types.js";

/** The slice of the service API the task loop needs. */
export interface TaskClient {
  nextTask(kind: TaskKind): Promise<Task | null>;
  submitLabel(taskId: string, label: LabelValue, annotator: string): Promise<SubmitAck>;
  progress(): Promise<Progress>;
}

export type Phase =
  | "idle"
  | "loading"
  | "annotating"
  | "submitting"
  | "retrying"
  | "done";

export interface LoopState {
  phase: Phase;
  kind: TaskKind;
  view: TaskView | null;
  /** Non-blocking status/error message, empty when there is nothing to say. */
  message: string;
  labeled: number;
  total: number;
  byKind: Record<TaskKind, KindProgress>;
}

export interface LoopHooks {
  onState: (state: LoopState) => void;
  sleep: (ms: number) => Promise<void>;
  annotator: string;
}

export interface LoopOptions {
  variantLabels?: readonly string[];
}

function emptyByKind(): Record<TaskKind, KindProgress> {
  return {
    quality: { total: 0, labeled: 0 },
    variant: { total: 0, labeled: 0 },
    pos: { total: 0, labeled: 0 },
  };
}

/**
 * Drives the annotate/submit/next cycle for one task kind at a time.
 *
 * Guarantees: at most one submit is in flight; the displayed labeled
 * count increments exactly once per server acknowledgement; a rejected
 * submit (validation or conflict) surfaces as a message without losing
 * other state; a network failure retries with exponential backoff and
 * never discards the unsent annotation.
 */
export class TaskLoop {
  private readonly client: TaskClient;
  private readonly hooks: LoopHooks;
  private readonly variantLabels: readonly string[];
  private state: LoopState;

  constructor(client: TaskClient, hooks: LoopHooks, options: LoopOptions = {}) {
    this.client = client;
    this.hooks = hooks;
    this.variantLabels = options.variantLabels ?? DEFAULT_VARIANT_LABELS;
    this.state = {
      phase: "idle",
      kind: "quality",
      view: null,
      message: "",
      labeled: 0,
      total: 0,
      byKind: emptyByKind(),
    };
  }

  current(): LoopState {
    return this.state;
  }

  optionsFor(kind: TaskKind): readonly string[] {
    if (kind === "quality") {
      return QUALITY_LABELS;
    }
    if (kind === "variant") {
      return this.variantLabels;
    }
    return UNIVERSAL_TAGS;
  }

  /** Fetch server progress, then load the first task of the current kind. */
  async start(kind: TaskKind = "quality"): Promise<void> {
    this.state = { ...this.state, kind };
    await this.refreshProgress();
    await this.loadNext();
  }

  /** Switch kinds, dropping the current (unsubmitted) view. */
  async setKind(kind: TaskKind): Promise<void> {
    if (this.state.phase === "submitting" || this.state.phase === "retrying") {
      return;
    }
    this.state = { ...this.state, kind, view: null, message: "" };
    await this.loadNext();
  }

  handleKey(key: string): void {
    if (this.state.phase !== "annotating" || this.state.view === null) {
      return;
    }
    if (key === "Enter") {
      void this.submit();
      return;
    }
    const next = applyKey(this.state.view, key);
    if (next !== this.state.view) {
      this.update({ view: next });
    }
  }

  /** Replace the view after a direct UI interaction (click). */
  setView(view: TaskView): void {
    if (this.state.phase !== "annotating") {
      return;
    }
    this.update({ view });
  }

  async submit(): Promise<void> {
    if (this.state.phase !== "annotating") {
      return;
    }
    const view = this.state.view;
    if (view === null || !canSubmit(view)) {
      return;
    }
    const label = labelOf(view);
    if (label === null) {
      return;
    }
    this.update({ phase: "submitting", message: "" });

    let attempt = 0;
    for (;;) {
      try {
        await this.client.submitLabel(view.task.task_id, label, this.hooks.annotator);
        this.bumpProgress(view.task.kind);
        this.update({ message: "saved" });
        await this.loadNext();
        return;
      } catch (err) {
        if (err instanceof ApiError) {
          if (err.status === 409 || err.status === 404) {
            // Labeled elsewhere or gone: tell the user, move on.
            await this.resyncProgress();
            this.update({ message: err.message });
            await this.loadNext();
            return;
          }
          // Validation or server error: keep the annotation for retry.
          this.update({ phase: "annotating", message: err.message });
          return;
        }
        attempt += 1;
        this.update({
          phase: "retrying",
          message: `connection lost, retrying (attempt ${attempt})`,
        });
        await this.hooks.sleep(backoffDelay(attempt - 1));
        this.update({ phase: "submitting" });
      }
    }
  }

  private async loadNext(): Promise<void> {
    this.update({ phase: "loading", view: null });
    let attempt = 0;
    for (;;) {
      try {
        const task = await this.client.nextTask(this.state.kind);
        if (task === null) {
          this.update({ phase: "done", view: null, message: "all tasks labeled" });
          return;
        }
        const view = viewOf(task, this.optionsFor(task.kind));
        this.update({ phase: "annotating", view });
        return;
      } catch (err) {
        if (err instanceof ApiError) {
          this.update({ phase: "idle", message: err.message });
          return;
        }
        attempt += 1;
        this.update({
          phase: "retrying",
          message: `connection lost, retrying (attempt ${attempt})`,
        });
        await this.hooks.sleep(backoffDelay(attempt - 1));
        this.update({ phase: "loading" });
      }
    }
  }

  private bumpProgress(kind: TaskKind): void {
    const byKind = { ...this.state.byKind };
    byKind[kind] = { ...byKind[kind], labeled: byKind[kind].labeled + 1 };
    this.state = { ...this.state, labeled: this.state.labeled + 1, byKind };
  }

  private async refreshProgress(): Promise<void> {
    const progress = await this.client.progress();
    this.update({
      labeled: progress.labeled,
      total: progress.total,
      byKind: { ...emptyByKind(), ...progress.by_kind },
    });
  }

  private async resyncProgress(): Promise<void> {
    try {
      await this.refreshProgress();
    } catch {
      // Best effort: the next successful call will correct the counts.
    }
  }

  private update(patch: Partial<LoopState>): void {
    this.state = { ...this.state, ...patch };
    this.hooks.onState(this.state);
  }
}
