// Offline-tolerant submission queue. Drafts that fail with a network error are
// persisted to localStorage and flushed on "online"; server-rejected bodies
// (4xx) are surfaced, never retried blindly.

import { ApiError } from "./api.js";
import type { AnnotationBody } from "./types.js";

const KEY = "annotation_queue_v1";

export type Sender = (body: AnnotationBody) => Promise<number>;

function storage(): Storage | null {
  try {
    return typeof localStorage === "undefined" ? null : localStorage;
  } catch {
    return null;
  }
}

export function loadQueue(): AnnotationBody[] {
  const s = storage();
  if (!s) return [];
  try {
    return JSON.parse(s.getItem(KEY) || "[]");
  } catch {
    return [];
  }
}

function saveQueue(items: AnnotationBody[]): void {
  storage()?.setItem(KEY, JSON.stringify(items));
}

export class SubmissionQueue {
  constructor(private send: Sender) {}

  /** Submits immediately; on network failure the body is queued and the error rethrown. */
  async submit(body: AnnotationBody): Promise<number | "queued"> {
    try {
      return await this.send(body);
    } catch (err) {
      if (err instanceof ApiError) throw err; // service verdicts are final
      saveQueue([...loadQueue(), body]);
      return "queued";
    }
  }

  /** Replays queued bodies in order; stops queueing again on further network failure. */
  async flush(): Promise<number> {
    const pending = loadQueue();
    if (!pending.length) return 0;
    const remaining: AnnotationBody[] = [];
    let sent = 0;
    for (const body of pending) {
      try {
        await this.send(body);
        sent += 1;
      } catch (err) {
        if (err instanceof ApiError) {
          sent += 0; // rejected by the service; drop rather than loop forever
        } else {
          remaining.push(body);
        }
      }
    }
    saveQueue(remaining);
    return sent;
  }

  pendingCount(): number {
    return loadQueue().length;
  }

  installOnlineFlush(target: Window = window): void {
    target.addEventListener("online", () => {
      void this.flush();
    });
  }
}
