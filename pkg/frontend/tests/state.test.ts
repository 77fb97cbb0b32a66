import { beforeEach, describe, expect, it } from "vitest";

import { Session } from "../src/state.js";
import { makeTasks } from "./fakeService.js";

function session(n = 5): Session {
  const s = new Session("alice");
  s.loadBatches([
    { batch_id: "ja-1", language: "ja", size: n, completed: 0, tasks: makeTasks(n) },
  ]);
  return s;
}

describe("Session", () => {
  beforeEach(() => localStorage.clear());

  it("starts on the first unannotated task", () => {
    const s = session();
    expect(s.current()?.qa_id).toBe("qa-0");
    expect(s.position()).toBe(1);
    expect(s.totalCount()).toBe(5);
  });

  it("blocks submission until all three dimensions are set", () => {
    const s = session();
    expect(s.canSubmit("qa-0")).toBe(false);
    s.setScore("qa-0", "clarity", 1);
    s.setScore("qa-0", "relevance", 0);
    expect(s.canSubmit("qa-0")).toBe(false);
    s.setScore("qa-0", "answer_quality", 4);
    expect(s.canSubmit("qa-0")).toBe(true);
  });

  it("advances past annotated tasks and counts progress", () => {
    const s = session(3);
    s.markAnnotated("qa-0");
    s.advance();
    expect(s.current()?.qa_id).toBe("qa-1");
    s.markAnnotated("qa-1");
    s.advance();
    expect(s.current()?.qa_id).toBe("qa-2");
    expect(s.completedCount()).toBe(2);
  });

  it("maps digit keys to quality and y/n to the binary dimensions", () => {
    const s = session();
    expect(s.applyKey("qa-0", "4", "clarity")).toBe(true);
    expect(s.draftFor("qa-0").answer_quality).toBe(4);
    expect(s.applyKey("qa-0", "y", "clarity")).toBe(true);
    expect(s.draftFor("qa-0").clarity).toBe(1);
    expect(s.applyKey("qa-0", "n", "relevance")).toBe(true);
    expect(s.draftFor("qa-0").relevance).toBe(0);
    expect(s.applyKey("qa-0", "x", "clarity")).toBe(false);
    expect(s.applyKey("qa-0", "7", "clarity")).toBe(false); // out of the 0-5 scale
  });

  it("persists drafts across a reload and clears them on submit", () => {
    const s = session();
    s.setScore("qa-1", "clarity", 1);
    const reloaded = new Session("alice");
    expect(reloaded.draftFor("qa-1").clarity).toBe(1);
    reloaded.markAnnotated("qa-1");
    const again = new Session("alice");
    expect(again.draftFor("qa-1").clarity).toBeNull();
  });
});
