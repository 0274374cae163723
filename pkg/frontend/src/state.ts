import { isPosPayload, type LabelValue, type Task } from "./types.js";

/**
 * Pure view state for one task being annotated.
 *
 * quality/variant tasks use `selection`; pos tasks use `tags` (one slot
 * per token, null until chosen) plus `focus` (the token the keyboard
 * edits next).
 */
export interface TaskView {
  task: Task;
  options: readonly string[];
  selection: string | null;
  tags: (string | null)[];
  focus: number;
}

export function tokensOf(task: Task): string[] {
  return isPosPayload(task.payload) ? task.payload.tokens : [];
}

export function viewOf(task: Task, options: readonly string[]): TaskView {
  return {
    task,
    options,
    selection: null,
    tags: tokensOf(task).map(() => null),
    focus: 0,
  };
}

/** Submit is allowed only when the annotation is complete. */
export function canSubmit(view: TaskView): boolean {
  if (view.task.kind === "pos") {
    return view.tags.length > 0 && view.tags.every((tag) => tag !== null);
  }
  return view.selection !== null;
}

/**
 * The label to submit, or null while incomplete.  A pos label is only
 * ever produced with exactly one tag per token — partial vectors are
 * never returned.
 */
export function labelOf(view: TaskView): LabelValue | null {
  if (!canSubmit(view)) {
    return null;
  }
  if (view.task.kind === "pos") {
    return view.tags.map((tag) => tag as string);
  }
  return view.selection as string;
}

export function selectLabel(view: TaskView, option: string): TaskView {
  if (!view.options.includes(option)) {
    return view;
  }
  return { ...view, selection: option };
}

export function setTag(view: TaskView, index: number, tag: string): TaskView {
  if (index < 0 || index >= view.tags.length || !view.options.includes(tag)) {
    return view;
  }
  const tags = view.tags.slice();
  tags[index] = tag;
  const focus = Math.min(index + 1, view.tags.length - 1);
  return { ...view, tags, focus };
}

export function setFocus(view: TaskView, index: number): TaskView {
  if (index < 0 || index >= view.tags.length) {
    return view;
  }
  return { ...view, focus: index };
}

/**
 * Keyboard shortcuts for an option list: digits 1-9 then 0 cover the
 * first ten options, letters a, b, c, ... cover the rest.
 */
export function keyBindings(options: readonly string[]): Map<string, string> {
  const bindings = new Map<string, string>();
  options.forEach((option, i) => {
    let key: string;
    if (i < 9) {
      key = String(i + 1);
    } else if (i === 9) {
      key = "0";
    } else {
      key = String.fromCharCode("a".charCodeAt(0) + (i - 10));
    }
    bindings.set(key, option);
  });
  return bindings;
}

/**
 * Apply one keypress: pick the bound option for the focused token (pos)
 * or the whole task (quality/variant).  Arrow keys move pos focus.
 * Unbound keys leave the view unchanged.
 */
export function applyKey(view: TaskView, key: string): TaskView {
  if (view.task.kind === "pos") {
    if (key === "ArrowRight") {
      return setFocus(view, view.focus + 1);
    }
    if (key === "ArrowLeft") {
      return setFocus(view, view.focus - 1);
    }
    const option = keyBindings(view.options).get(key.toLowerCase());
    if (option === undefined) {
      return view;
    }
    return setTag(view, view.focus, option);
  }
  const option = keyBindings(view.options).get(key.toLowerCase());
  if (option === undefined) {
    return view;
  }
  return selectLabel(view, option);
}

/** Retry delays in ms: 500, 1000, 2000, ... capped at 8000. */
export function backoffDelay(attempt: number): number {
  return Math.min(500 * 2 ** attempt, 8000);
}
