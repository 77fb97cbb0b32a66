// Shapes of the annotation service's JSON API.

export interface TaskView {
  qa_id: string;
  language: string;
  question: string;
  answer: string;
  excerpt: string;
  topic_path: string[];
  setting: string;
  annotated: boolean;
}

export interface Batch {
  batch_id: string;
  language: string;
  size: number;
  completed: number;
  tasks: TaskView[];
}

export interface BatchesResponse {
  annotator: string;
  batches: Batch[];
}

export interface AnnotationBody {
  qa_id: string;
  annotator_id: string;
  clarity: number;
  relevance: number;
  answer_quality: number;
}

export interface RubricDimension {
  title: string;
  description: string;
  scores: Record<string, string>;
}

export type Rubric = Record<"clarity" | "relevance" | "answer_quality", RubricDimension>;

export interface StatsResponse {
  languages: string[];
  incomplete: boolean;
  dimensions: Record<
    string,
    {
      per_annotator: Record<string, Record<string, number>>;
      language_average: Record<string, number>;
      annotator_overall: Record<string, number>;
      overall: number | null;
    }
  >;
}

export interface Draft {
  clarity: number | null;
  relevance: number | null;
  answer_quality: number | null;
}

export const emptyDraft = (): Draft => ({ clarity: null, relevance: null, answer_quality: null });

export function draftComplete(d: Draft): boolean {
  return d.clarity !== null && d.relevance !== null && d.answer_quality !== null;
}

export function draftInRange(d: Draft): boolean {
  if (!draftComplete(d)) return false;
  return (
    (d.clarity === 0 || d.clarity === 1) &&
    (d.relevance === 0 || d.relevance === 1) &&
    Number.isInteger(d.answer_quality) &&
    (d.answer_quality as number) >= 0 &&
    (d.answer_quality as number) <= 5
  );
}
