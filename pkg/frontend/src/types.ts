export interface VideoInfo {
  id: string;
  label: string;
  frame_count: number;
  height: number;
  width: number;
  annotated: boolean;
}

export interface Annotation {
  video_id: string;
  first_appearance: number;
  ccm: number;
  scm: number;
  annotator: string;
  created_at?: string;
}

/** The three boundary marks, in their required temporal order. */
export type MarkKind = "first_appearance" | "ccm" | "scm";

export const MARK_KINDS: MarkKind[] = ["first_appearance", "ccm", "scm"];
