// Wires session state, the API client, the offline queue, and the DOM together.

import { ApiClient, ApiError } from "./api.js";
import { SubmissionQueue } from "./queue.js";
import { Session } from "./state.js";
import type { Draft, Rubric } from "./types.js";
import { renderDone, renderProgressSummary, renderTask } from "./view.js";

export class App {
  session: Session;
  queue: SubmissionQueue;
  private rubric: Rubric | null = null;
  private banner = "";

  constructor(
    private api: ApiClient,
    annotatorId: string,
    private taskRoot: HTMLElement,
    private progressRoot: HTMLElement,
  ) {
    this.session = new Session(annotatorId);
    this.queue = new SubmissionQueue((body) => this.api.submit(body));
  }

  async start(): Promise<void> {
    this.rubric = await this.api.rubric();
    const payload = await this.api.batches();
    this.session.loadBatches(payload.batches);
    await this.queue.flush();
    this.render();
  }

  handleKey(key: string, binaryTarget: "clarity" | "relevance"): void {
    const task = this.session.current();
    if (!task || task.annotated) return;
    if (this.session.applyKey(task.qa_id, key, binaryTarget)) this.render();
  }

  score(dimension: keyof Draft, value: number): void {
    const task = this.session.current();
    if (!task) return;
    this.session.setScore(task.qa_id, dimension, value);
    this.banner = "";
    this.render();
  }

  async submitCurrent(): Promise<void> {
    const task = this.session.current();
    if (!task || !this.session.canSubmit(task.qa_id)) return;
    const draft = this.session.draftFor(task.qa_id);
    const body = {
      qa_id: task.qa_id,
      annotator_id: this.session.annotatorId,
      clarity: draft.clarity as number,
      relevance: draft.relevance as number,
      answer_quality: draft.answer_quality as number,
    };
    try {
      const outcome = await this.queue.submit(body);
      this.banner = outcome === "queued" ? "offline: submission queued, will retry" : "";
      this.session.markAnnotated(task.qa_id);
      this.session.advance();
    } catch (err) {
      this.banner = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      // draft intentionally preserved
    }
    this.render();
  }

  render(): void {
    const task = this.session.current();
    if (!task) {
      renderDone(this.taskRoot, this.session.totalCount());
    } else if (this.session.completedCount() === this.session.totalCount() && this.session.totalCount() > 0) {
      renderDone(this.taskRoot, this.session.totalCount());
    } else if (this.rubric) {
      renderTask(
        this.taskRoot,
        task,
        this.session.draftFor(task.qa_id),
        this.rubric,
        {
          position: this.session.position(),
          completed: this.session.completedCount(),
          total: this.session.totalCount(),
        },
        {
          onScore: (dimension, value) => this.score(dimension, value),
          onSubmit: () => void this.submitCurrent(),
        },
        this.banner,
      );
    }
    renderProgressSummary(
      this.progressRoot,
      this.session.completedCount(),
      this.session.totalCount(),
      this.queue.pendingCount(),
      null,
    );
  }
}
