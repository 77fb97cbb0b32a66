// Session state: the flattened task list, the cursor, and per-task drafts.
// Drafts live in localStorage so a refresh mid-task keeps unsubmitted picks;
// submitted work is the server's to remember.

import type { Batch, Draft, TaskView } from "./types.js";
import { draftComplete, emptyDraft } from "./types.js";

const DRAFT_KEY = "annotation_drafts_v1";

function storage(): Storage | null {
  try {
    return typeof localStorage === "undefined" ? null : localStorage;
  } catch {
    return null;
  }
}

export class Session {
  tasks: TaskView[] = [];
  batchLanguage = "";
  private cursor = 0;
  private drafts: Record<string, Draft> = {};

  constructor(public annotatorId: string) {
    const s = storage();
    if (s) {
      try {
        this.drafts = JSON.parse(s.getItem(DRAFT_KEY) || "{}");
      } catch {
        this.drafts = {};
      }
    }
  }

  loadBatches(batches: Batch[]): void {
    this.tasks = batches.flatMap((b) => b.tasks);
    this.batchLanguage = batches[0]?.language ?? "";
    const firstOpen = this.tasks.findIndex((t) => !t.annotated);
    this.cursor = firstOpen === -1 ? Math.max(0, this.tasks.length - 1) : firstOpen;
  }

  current(): TaskView | null {
    return this.tasks[this.cursor] ?? null;
  }

  completedCount(): number {
    return this.tasks.filter((t) => t.annotated).length;
  }

  totalCount(): number {
    return this.tasks.length;
  }

  /** 1-based position of the current task, for "k of n" progress. */
  position(): number {
    return this.tasks.length ? this.cursor + 1 : 0;
  }

  draftFor(qaId: string): Draft {
    if (!this.drafts[qaId]) this.drafts[qaId] = emptyDraft();
    return this.drafts[qaId];
  }

  setScore(qaId: string, dimension: keyof Draft, value: number): void {
    const draft = this.draftFor(qaId);
    draft[dimension] = value;
    storage()?.setItem(DRAFT_KEY, JSON.stringify(this.drafts));
  }

  canSubmit(qaId: string): boolean {
    return draftComplete(this.draftFor(qaId));
  }

  markAnnotated(qaId: string): void {
    const task = this.tasks.find((t) => t.qa_id === qaId);
    if (task) task.annotated = true;
    delete this.drafts[qaId];
    storage()?.setItem(DRAFT_KEY, JSON.stringify(this.drafts));
  }

  advance(): TaskView | null {
    const next = this.tasks.findIndex((t, i) => i > this.cursor && !t.annotated);
    if (next !== -1) {
      this.cursor = next;
    } else {
      const anyOpen = this.tasks.findIndex((t) => !t.annotated);
      if (anyOpen !== -1) this.cursor = anyOpen;
    }
    return this.current();
  }

  /** Keyboard mapping: digits set quality, y/n the binary dimensions. */
  applyKey(qaId: string, key: string, binaryTarget: "clarity" | "relevance"): boolean {
    if (/^[0-5]$/.test(key)) {
      this.setScore(qaId, "answer_quality", Number(key));
      return true;
    }
    if (key === "y" || key === "Y") {
      this.setScore(qaId, binaryTarget, 1);
      return true;
    }
    if (key === "n" || key === "N") {
      this.setScore(qaId, binaryTarget, 0);
      return true;
    }
    return false;
  }
}
