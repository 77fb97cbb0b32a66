// In-memory stand-in for the annotation service, mirroring its JSON contract:
// token auth, assignment checks, score ranges, revisions, and rate arithmetic.

import type { AnnotationBody, TaskView } from "../src/types.js";

const RUBRIC = {
  clarity: {
    title: "Question Clarity & Safety",
    description: "Determine if the question is self-contained and adheres to universal ethical standards.",
    scores: {
      "1": "Question is clear, comprehensible, and self-contained",
      "0": "Question requires additional context for comprehension, contains demonstrative pronouns without context, or contains unsafe elements (violence, explicit content, hate speech)",
    },
  },
  relevance: {
    title: "Cultural Relevance",
    description: "Identify cultural distinctiveness through dual dimensions.",
    scores: {
      "1": "Question exhibits either cultural variance (answers differ across cultures/languages) or cultural specificity (containing culture-specific elements such as regional traditions)",
      "0": "Question lacks cultural elements or specificity",
    },
  },
  answer_quality: {
    title: "Answer Quality",
    description: "Assess the quality of the answer relative to the reference knowledge using the 5-point scale; scores of 4 or more count as high quality.",
    scores: {
      "5": "Exceptional answer (comprehensive, accurate, well-structured)",
      "4": "Strong answer (minor improvements possible)",
      "3": "Adequate answer (notable omissions or inaccuracies)",
      "2": "Insufficient answer (major gaps or errors)",
      "1": "Poor answer (significantly flawed)",
      "0": "Unacceptable answer (incorrect or inappropriate)",
    },
  },
};

export interface StoredRecord extends AnnotationBody {
  revision: number;
}

export function makeTasks(n: number, language = "ja"): TaskView[] {
  return Array.from({ length: n }, (_, i) => ({
    qa_id: `qa-${i}`,
    language,
    question: `質問 ${i} です。`,
    answer: `回答 ${i} です。`,
    excerpt: `出典 ${i}`,
    topic_path: ["RSE", "Games", "Traditional Games"],
    setting: "unique",
    annotated: false,
  }));
}

export class FakeService {
  records = new Map<string, StoredRecord>();
  submissions: AnnotationBody[] = [];
  online = true;
  tokens: Record<string, string>;
  tasks: TaskView[];
  annotators: [string, string];
  language: string;

  constructor(taskCount = 5, annotators: [string, string] = ["alice", "bob"], language = "ja") {
    this.tasks = makeTasks(taskCount, language);
    this.annotators = annotators;
    this.language = language;
    this.tokens = Object.fromEntries(annotators.map((a) => [a, `tok-${a}`]));
  }

  private key(qaId: string, annotator: string): string {
    return `${qaId}::${annotator}`;
  }

  recordFor(qaId: string, annotator: string): StoredRecord | undefined {
    return this.records.get(this.key(qaId, annotator));
  }

  private rate(annotator: string, pick: (r: StoredRecord) => boolean): number {
    const mine = [...this.records.values()].filter((r) => r.annotator_id === annotator);
    if (!mine.length) return NaN;
    return (100 * mine.filter(pick).length) / mine.length;
  }

  stats() {
    const dims: Record<string, (r: StoredRecord) => boolean> = {
      clarity: (r) => r.clarity === 1,
      relevance: (r) => r.relevance === 1,
      answer_quality: (r) => r.answer_quality >= 4,
    };
    const dimensions: Record<string, unknown> = {};
    const [a, b] = this.annotators;
    for (const [dim, pick] of Object.entries(dims)) {
      const rateA = this.rate(a, pick);
      const rateB = this.rate(b, pick);
      dimensions[dim] = {
        per_annotator: { [this.language]: { A: rateA, B: rateB } },
        language_average: { [this.language]: (rateA + rateB) / 2 },
        annotator_overall: { A: rateA, B: rateB },
        overall: (rateA + rateB) / 2,
      };
    }
    const expected = this.tasks.length * this.annotators.length;
    return { languages: [this.language], incomplete: this.records.size < expected, dimensions };
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    if (!this.online) throw new TypeError("NetworkError: offline");
    const url = String(input);
    const headers = new Headers(init?.headers);
    const token = headers.get("X-Annotator-Token") ?? "";
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), { status, headers: { "content-type": "application/json" } });

    if (url.includes("/api/rubric")) return json(RUBRIC);

    if (url.includes("/api/batches/")) {
      const annotator = decodeURIComponent(url.split("/api/batches/")[1]);
      if (this.tokens[annotator] !== token) return json({ error: "BadToken" }, 401);
      const tasks = this.tasks.map((t) => ({ ...t, annotated: this.recordFor(t.qa_id, annotator) !== undefined }));
      return json({
        annotator,
        batches: [
          {
            batch_id: `${this.language}-1`,
            language: this.language,
            size: tasks.length,
            completed: tasks.filter((t) => t.annotated).length,
            tasks,
          },
        ],
      });
    }

    if (url.includes("/api/annotations")) {
      const body = JSON.parse(String(init?.body)) as AnnotationBody;
      if (this.tokens[body.annotator_id] !== token) return json({ error: "BadToken" }, 401);
      const assigned = this.tasks.some((t) => t.qa_id === body.qa_id);
      if (!assigned || !this.annotators.includes(body.annotator_id)) {
        return json({ error: "NotAssigned" }, 403);
      }
      const clarityOk = body.clarity === 0 || body.clarity === 1;
      const relevanceOk = body.relevance === 0 || body.relevance === 1;
      const qualityOk = Number.isInteger(body.answer_quality) && body.answer_quality >= 0 && body.answer_quality <= 5;
      if (!clarityOk || !relevanceOk || !qualityOk) return json({ error: "ScoreOutOfRange" }, 400);
      const key = this.key(body.qa_id, body.annotator_id);
      const revision = (this.records.get(key)?.revision ?? 0) + 1;
      this.records.set(key, { ...body, revision });
      this.submissions.push(body);
      return json({ revision });
    }

    if (url.includes("/api/stats")) return json(this.stats());

    return json({ error: "NotFound" }, 404);
  };
}
