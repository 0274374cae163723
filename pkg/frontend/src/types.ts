/** Wire shapes of the annotation service HTTP+JSON API. */

export type TaskKind = "quality" | "variant" | "pos";

export const TASK_KINDS: readonly TaskKind[] = ["quality", "variant", "pos"];

/** Payload of quality/variant tasks: the text chunk record. */
export interface ChunkPayload {
  id: string;
  text: string;
  source: string;
  language?: string | null;
  variant?: string | null;
  quality?: string | null;
}

/** Payload of pos tasks: whitespace tokens of one chunk. */
export interface PosPayload {
  chunk_id: string;
  tokens: string[];
}

export interface Task {
  task_id: string;
  kind: TaskKind;
  payload: ChunkPayload | PosPayload;
  status: "open" | "labeled";
}

/** quality/variant labels are one string; pos labels are one tag per token. */
export type LabelValue = string | string[];

export interface SubmitAck {
  ok: boolean;
  task_id: string;
  submitted_at: string;
}

export interface KindProgress {
  total: number;
  labeled: number;
}

export interface Progress {
  total: number;
  labeled: number;
  by_kind: Record<TaskKind, KindProgress>;
}

export const QUALITY_LABELS: readonly string[] = ["high", "low"];

export const DEFAULT_VARIANT_LABELS: readonly string[] = [
  "logudorese",
  "campidanese",
  "mesania",
  "italian",
  "other",
];

/** The 17-tag universal part-of-speech inventory, in server order. */
export const UNIVERSAL_TAGS: readonly string[] = [
  "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
  "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

export function isPosPayload(payload: Task["payload"]): payload is PosPayload {
  return Array.isArray((payload as PosPayload).tokens);
}
