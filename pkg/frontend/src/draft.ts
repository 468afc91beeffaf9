/*
 * Draft annotation state.
 *
 * Marks can be placed and cleared in any order while scrubbing, so the draft
 * itself is unconstrained; validate() is the single gate deciding whether the
 * draft may be saved.  The server enforces the same ordering invariant
 * (0 <= first_appearance < ccm <= scm < frame_count), this mirror just keeps
 * the save button honest before a round trip.
 */

import { Annotation, MarkKind } from "./types.js";

export interface Draft {
  first_appearance: number | null;
  ccm: number | null;
  scm: number | null;
}

export function emptyDraft(): Draft {
  return { first_appearance: null, ccm: null, scm: null };
}

export function draftFromAnnotation(ann: Annotation): Draft {
  return {
    first_appearance: ann.first_appearance,
    ccm: ann.ccm,
    scm: ann.scm,
  };
}

export function setMark(draft: Draft, kind: MarkKind, frame: number): Draft {
  return { ...draft, [kind]: frame };
}

export function clearMark(draft: Draft, kind: MarkKind): Draft {
  return { ...draft, [kind]: null };
}

/** Human-readable invariant violations; empty list means saveable. */
export function validate(draft: Draft, frameCount: number): string[] {
  const problems: string[] = [];
  const { first_appearance: first, ccm, scm } = draft;
  if (first === null || ccm === null || scm === null) {
    problems.push("all three marks must be set");
    return problems;
  }
  if (first < 0) problems.push("first appearance before frame 0");
  if (scm >= frameCount) problems.push("SCM past the last frame");
  if (first >= ccm) problems.push("CCM must come after first appearance");
  if (ccm > scm) problems.push("SCM cannot precede CCM");
  return problems;
}

export function canSave(draft: Draft, frameCount: number): boolean {
  return validate(draft, frameCount).length === 0;
}

export function toAnnotation(
  draft: Draft,
  videoId: string,
  frameCount: number,
  annotator: string,
): Annotation {
  const problems = validate(draft, frameCount);
  if (problems.length > 0) {
    throw new Error(`draft not saveable: ${problems.join("; ")}`);
  }
  return {
    video_id: videoId,
    first_appearance: draft.first_appearance as number,
    ccm: draft.ccm as number,
    scm: draft.scm as number,
    annotator,
  };
}

/** Segment spans for the timeline bar, as [start, end) frame ranges. */
export function segments(
  draft: Draft,
  frameCount: number,
): { name: string; start: number; end: number }[] {
  if (!canSave(draft, frameCount)) return [];
  const first = draft.first_appearance as number;
  const ccm = draft.ccm as number;
  const scm = draft.scm as number;
  return [
    { name: "pre-crime", start: first, end: ccm },
    { name: "suspicious", start: ccm, end: scm },
    { name: "evidence", start: scm, end: frameCount },
  ];
}
