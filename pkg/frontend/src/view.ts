// DOM rendering, no framework: one task panel, three scoring controls with the
// rubric text inline, and a progress footer. Arabic batches flip to RTL.

import type { Draft, Rubric, TaskView } from "./types.js";

export interface ViewCallbacks {
  onScore: (dimension: keyof Draft, value: number) => void;
  onSubmit: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function scoreButton(
  label: string,
  value: number,
  dimension: keyof Draft,
  current: number | null,
  onScore: ViewCallbacks["onScore"],
): HTMLButtonElement {
  const button = el("button", { class: "score", "data-dim": dimension, "data-value": String(value) }, label);
  if (current === value) button.classList.add("selected");
  button.addEventListener("click", () => onScore(dimension, value));
  return button;
}

function dimensionPanel(
  dimension: keyof Draft,
  rubric: Rubric,
  draft: Draft,
  values: number[],
  labels: string[],
  onScore: ViewCallbacks["onScore"],
): HTMLElement {
  const panel = el("section", { class: "dimension", "data-dim": dimension });
  const meta = rubric[dimension as keyof Rubric];
  panel.appendChild(el("h3", {}, meta.title));
  panel.appendChild(el("p", { class: "description" }, meta.description));
  const buttons = el("div", { class: "choices" });
  values.forEach((value, i) => buttons.appendChild(scoreButton(labels[i], value, dimension, draft[dimension], onScore)));
  panel.appendChild(buttons);
  const rubricList = el("ul", { class: "rubric" });
  for (const [score, text] of Object.entries(meta.scores).sort((a, b) => Number(b[0]) - Number(a[0]))) {
    rubricList.appendChild(el("li", {}, `Score ${score}: ${text}`));
  }
  panel.appendChild(rubricList);
  return panel;
}

export function renderTask(
  root: HTMLElement,
  task: TaskView,
  draft: Draft,
  rubric: Rubric,
  progress: { position: number; completed: number; total: number },
  callbacks: ViewCallbacks,
  banner = "",
): void {
  root.textContent = "";
  root.dir = task.language === "ar" ? "rtl" : "ltr";

  const header = el("header", { class: "task-header" });
  header.appendChild(el("span", { class: "topic" }, task.topic_path.join(" / ")));
  header.appendChild(
    el("span", { class: "progress" }, `${progress.position}/${progress.total} (${progress.completed} done)`),
  );
  root.appendChild(header);

  if (banner) root.appendChild(el("div", { class: "banner", role: "alert" }, banner));

  const columns = el("div", { class: "columns" });
  const qa = el("section", { class: "qa" });
  qa.appendChild(el("h2", {}, "Question"));
  qa.appendChild(el("p", { class: "question" }, task.question));
  qa.appendChild(el("h2", {}, "Answer"));
  qa.appendChild(el("p", { class: "answer" }, task.answer));
  columns.appendChild(qa);

  const source = el("section", { class: "source" });
  source.appendChild(el("h2", {}, "Source excerpt"));
  source.appendChild(el("p", { class: "excerpt" }, task.excerpt || "(no excerpt on file)"));
  columns.appendChild(source);
  root.appendChild(columns);

  const scores = el("div", { class: "scores" });
  scores.appendChild(dimensionPanel("clarity", rubric, draft, [1, 0], ["Yes (1)", "No (0)"], callbacks.onScore));
  scores.appendChild(dimensionPanel("relevance", rubric, draft, [1, 0], ["Yes (1)", "No (0)"], callbacks.onScore));
  scores.appendChild(
    dimensionPanel("answer_quality", rubric, draft, [5, 4, 3, 2, 1, 0], ["5", "4", "3", "2", "1", "0"], callbacks.onScore),
  );
  root.appendChild(scores);

  const submit = el("button", { class: "submit", type: "button" }, "Submit and next");
  const complete = draft.clarity !== null && draft.relevance !== null && draft.answer_quality !== null;
  submit.disabled = !complete;
  submit.addEventListener("click", () => callbacks.onSubmit());
  root.appendChild(submit);
}

export function renderProgressSummary(
  root: HTMLElement,
  completed: number,
  total: number,
  pending: number,
  statsIncomplete: boolean | null,
): void {
  root.textContent = "";
  root.appendChild(el("h2", {}, "Progress"));
  root.appendChild(el("p", { class: "summary" }, `${completed}/${total} annotated`));
  if (pending > 0) {
    root.appendChild(el("p", { class: "pending" }, `${pending} submission(s) queued offline`));
  }
  const link = el("a", { href: "/api/stats", class: "stats-link" }, "acceptance rates");
  root.appendChild(link);
  if (statsIncomplete) {
    root.appendChild(el("p", { class: "incomplete" }, "rates computed over submitted subset"));
  }
}

export function renderDone(root: HTMLElement, total: number): void {
  root.textContent = "";
  root.appendChild(el("h2", {}, "All tasks annotated"));
  root.appendChild(el("p", {}, `${total}/${total} submitted. Thank you.`));
  root.appendChild(el("a", { href: "/api/stats", class: "stats-link" }, "acceptance rates"));
}
