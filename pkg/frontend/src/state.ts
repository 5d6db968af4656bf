// Single reducer over the server event stream. The view never guesses:
// every field is copied from an event or a status snapshot, and events
// must arrive in sequence or the reducer refuses them.

import type {
  FailureKind,
  ServerEvent,
  SessionState,
  SessionStatus,
  WorldSnapshot,
} from "./events.js";

export interface TranscriptRow {
  seq: number;
  kind: "turn" | "note" | "failure";
  speaker?: string;
  text: string;
  failureKind?: FailureKind;
}

export interface FailureInfo {
  kind: FailureKind;
  explanation: string;
  subject: string | null;
  round: number;
}

export interface SessionView {
  id: string;
  state: SessionState;
  lastSeq: number;
  worldName: string | null;
  world: WorldSnapshot | null;
  transcript: TranscriptRow[];
  currentPlan: string | null;
  lastFailure: FailureInfo | null;
  pendingGuidance: boolean;
}

// States in which the service accepts another user turn. "done" is
// included because a finished session takes a fresh task.
const ACCEPTING: ReadonlySet<SessionState> = new Set([
  "awaiting_user",
  "awaiting_guidance",
  "done",
]);

export function guidanceEnabled(view: SessionView): boolean {
  return ACCEPTING.has(view.state);
}

export class SequenceGapError extends Error {
  constructor(expected: number, got: number) {
    super(`expected event seq ${expected}, got ${got}`);
    this.name = "SequenceGapError";
  }
}

export function initialView(id: string): SessionView {
  return {
    id,
    state: "awaiting_user",
    lastSeq: -1,
    worldName: null,
    world: null,
    transcript: [],
    currentPlan: null,
    lastFailure: null,
    pendingGuidance: false,
  };
}

/** Overwrite the snapshot-backed fields from GET /sessions/{id}.
 *
 * Used on reconnect so the state badge and world panel are correct
 * immediately; the transcript itself catches up through the event
 * stream, which replays from the stored cursor.
 */
export function refreshFromStatus(
  view: SessionView,
  status: SessionStatus,
): SessionView {
  return {
    ...view,
    state: status.state,
    world: status.world,
    worldName: status.world.name,
    pendingGuidance: status.state === "awaiting_guidance",
  };
}

function turn(seq: number, speaker: string, text: string): TranscriptRow {
  return { seq, kind: "turn", speaker, text };
}

function note(seq: number, text: string): TranscriptRow {
  return { seq, kind: "note", text };
}

export function reduce(view: SessionView, event: ServerEvent): SessionView {
  if (event.seq !== view.lastSeq + 1) {
    throw new SequenceGapError(view.lastSeq + 1, event.seq);
  }
  const next: SessionView = {
    ...view,
    lastSeq: event.seq,
    transcript: view.transcript,
  };
  const rows = () => {
    if (next.transcript === view.transcript) {
      next.transcript = view.transcript.slice();
    }
    return next.transcript;
  };

  switch (event.type) {
    case "session_started":
      next.worldName = event.data.world;
      rows().push(note(event.seq, `session started in ${event.data.world}`));
      break;
    case "world":
      next.world = event.data.snapshot;
      break;
    case "state":
      next.state = event.data.state;
      next.pendingGuidance = event.data.state === "awaiting_guidance";
      break;
    case "user_input":
      next.lastFailure = null;
      rows().push(turn(event.seq, "<user>", event.data.text));
      break;
    case "vision_feedback":
      rows().push(turn(event.seq, "<vision>", event.data.text));
      break;
    case "feasibility_feedback": {
      const target = event.data.target;
      const text =
        target === null
          ? String(event.data.score)
          : `${event.data.score} (target ${target})`;
      rows().push(turn(event.seq, "<feasibility>", text));
      break;
    }
    case "backend_reply":
      rows().push(turn(event.seq, "<robot>", event.data.text));
      break;
    case "plan":
      next.currentPlan = event.data.text;
      break;
    case "failure":
      next.currentPlan = null;
      next.lastFailure = {
        kind: event.data.kind,
        explanation: event.data.explanation,
        subject: event.data.subject,
        round: event.data.round,
      };
      rows().push({
        seq: event.seq,
        kind: "failure",
        text: event.data.explanation,
        failureKind: event.data.kind,
      });
      break;
    case "step": {
      const detail = event.data.detail ? `: ${event.data.detail}` : "";
      rows().push(
        note(event.seq, `${event.data.step} -> ${event.data.outcome}${detail}`),
      );
      break;
    }
    case "timeout":
      rows().push(note(event.seq, `timed out after ${event.data.after}`));
      break;
    case "backend_error":
      rows().push(note(event.seq, `planner backend error: ${event.data.error}`));
      break;
  }
  return next;
}
