import { ApiError } from "../src/client.js";
import type { TaskClient } from "../src/controller.js";
import type {
  LabelValue,
  Progress,
  SubmitAck,
  Task,
  TaskKind,
} from "../src/types.js";

export function qualityTask(id: string, text: string): Task {
  return {
    task_id: `quality-${id}`,
    kind: "quality",
    payload: { id, text, source: "test" },
    status: "open",
  };
}

export function variantTask(id: string, text: string): Task {
  return {
    task_id: `variant-${id}`,
    kind: "variant",
    payload: { id, text, source: "test" },
    status: "open",
  };
}

export function posTask(id: string, tokens: string[]): Task {
  return {
    task_id: `pos-${id}`,
    kind: "pos",
    payload: { chunk_id: id, tokens },
    status: "open",
  };
}

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (error: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (error: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export type SubmitAction =
  | "ok"
  | "conflict"
  | "badrequest"
  | "notfound"
  | "network"
  | Deferred<SubmitAck>;

export interface SubmitCall {
  taskId: string;
  label: LabelValue;
  annotator: string;
}

/**
 * Scripted in-memory stand-in for the service client.  Tasks are
 * dispensed per kind in order; submit outcomes follow `submitScript`
 * (default "ok"); `nextScript` can inject network failures before
 * task fetches.
 */
export class ScriptedClient implements TaskClient {
  tasks: Record<TaskKind, Task[]>;
  submitScript: SubmitAction[] = [];
  nextScript: "network"[] = [];
  submitCalls: SubmitCall[] = [];
  progressValue: Progress;

  constructor(tasks: Task[], progress?: Progress) {
    this.tasks = { quality: [], variant: [], pos: [] };
    for (const task of tasks) {
      this.tasks[task.kind].push(task);
    }
    this.progressValue = progress ?? {
      total: tasks.length,
      labeled: 0,
      by_kind: {
        quality: { total: this.tasks.quality.length, labeled: 0 },
        variant: { total: this.tasks.variant.length, labeled: 0 },
        pos: { total: this.tasks.pos.length, labeled: 0 },
      },
    };
  }

  async nextTask(kind: TaskKind): Promise<Task | null> {
    if (this.nextScript.shift() === "network") {
      throw new TypeError("fetch failed");
    }
    return this.tasks[kind].shift() ?? null;
  }

  async submitLabel(
    taskId: string,
    label: LabelValue,
    annotator: string,
  ): Promise<SubmitAck> {
    this.submitCalls.push({ taskId, label, annotator });
    const action = this.submitScript.shift() ?? "ok";
    if (action === "network") {
      throw new TypeError("fetch failed");
    }
    if (action === "conflict") {
      throw new ApiError(409, `task '${taskId}' is already labeled`);
    }
    if (action === "badrequest") {
      throw new ApiError(400, "pos label must be a list of 4 tags");
    }
    if (action === "notfound") {
      throw new ApiError(404, `no task '${taskId}'`);
    }
    if (typeof action === "object") {
      return action.promise;
    }
    return { ok: true, task_id: taskId, submitted_at: "2026-08-16T12:00:00+00:00" };
  }

  async progress(): Promise<Progress> {
    return this.progressValue;
  }
}

/** Let queued microtasks and zero-delay timers run. */
export async function flush(rounds = 3): Promise<void> {
  for (let i = 0; i < rounds; i += 1) {
    await new Promise<void>((resolve) => setTimeout(resolve, 0));
  }
}
