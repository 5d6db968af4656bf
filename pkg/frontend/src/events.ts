// Wire types for the plan loop service. These mirror the JSON the
// server sends; nothing here is invented on the client side.

export type SessionState =
  | "awaiting_user"
  | "planning"
  | "executing"
  | "awaiting_guidance"
  | "done"
  | "exhausted"
  | "timed_out";

export type FailureKind =
  | "vision"
  | "feasibility"
  | "ambiguous_reference"
  | "ambiguous_task"
  | "execution";

export interface BoxSnapshot {
  lo: number[];
  hi: number[];
}

export interface LocationSnapshot {
  name: string;
  footprint: BoxSnapshot;
  container: boolean;
  open: boolean;
  solid: boolean;
  approach: number[];
}

export interface ObjectSnapshot {
  name: string;
  base: string;
  category: string;
  pose: number[];
  inside: string | null;
  visible: boolean;
}

export interface WorldSnapshot {
  name: string;
  bounds: BoxSnapshot;
  robot: { pose: number[]; holding: string | null };
  locations: LocationSnapshot[];
  objects: ObjectSnapshot[];
}

interface BaseEvent<T extends string, D> {
  seq: number;
  type: T;
  data: D;
}

export type SessionStartedEvent = BaseEvent<"session_started", { world: string }>;
export type WorldEvent = BaseEvent<"world", { snapshot: WorldSnapshot }>;
export type StateEvent = BaseEvent<"state", { state: SessionState }>;
export type UserInputEvent = BaseEvent<"user_input", { text: string }>;
export type VisionFeedbackEvent = BaseEvent<
  "vision_feedback",
  { query: string[]; text: string }
>;
export type FeasibilityFeedbackEvent = BaseEvent<
  "feasibility_feedback",
  { score: number; target: string | null; queried?: string; goal?: number[] }
>;
export type BackendReplyEvent = BaseEvent<
  "backend_reply",
  { text: string; round: number }
>;
export type PlanEvent = BaseEvent<"plan", { text: string; round: number }>;
export type FailureEvent = BaseEvent<
  "failure",
  { kind: FailureKind; explanation: string; subject: string | null; round: number }
>;
export type StepEvent = BaseEvent<
  "step",
  { step: string; outcome: "done" | "failed"; detail: string }
>;
export type TimeoutEvent = BaseEvent<"timeout", { after: string }>;
export type BackendErrorEvent = BaseEvent<"backend_error", { error: string }>;

export type ServerEvent =
  | SessionStartedEvent
  | WorldEvent
  | StateEvent
  | UserInputEvent
  | VisionFeedbackEvent
  | FeasibilityFeedbackEvent
  | BackendReplyEvent
  | PlanEvent
  | FailureEvent
  | StepEvent
  | TimeoutEvent
  | BackendErrorEvent;

export interface TurnSnapshot {
  speaker: "user" | "robot";
  text: string;
}

export interface SessionStatus {
  id: string;
  state: SessionState;
  rounds_used: number;
  max_recovery_rounds: number;
  history: TurnSnapshot[];
  requested: string[];
  timings: Record<string, number>[];
  world: WorldSnapshot;
}
