/** Shared domain types for the operator console. */

export interface Point {
  x: number;
  y: number;
}

export interface Pose extends Point {
  heading: number;
}

/** Parameters of the active path contour, as reported by the station. */
export interface PathParams {
  anchorX: number;
  anchorY: number;
  heading: number;
  a: number;
  b: number;
  c: number;
  d: number;
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface StuckAlert {
  x: number;
  y: number;
  /** Simulated time at which the alert event was emitted. */
  t: number;
  /** Wall-clock ms at which the client processed it (banner latency). */
  seenAtMs: number;
}

/**
 * Everything the UI renders. Mutated only by the reducer, and only from
 * server-acknowledged state: the pose shown is always the station's last
 * word, never a locally extrapolated one.
 */
export interface ViewState {
  connection: ConnectionStatus;
  /** Seconds until the next reconnect attempt, when disconnected. */
  retryInSeconds: number | null;
  scenario: string;
  t: number;
  lastSeq: number;
  pose: Pose | null;
  decision: string;
  coverage: number;
  outcome: string;
  stuck: boolean;
  alert: StuckAlert | null;
  driverBusy: boolean;
  teleopActive: boolean;
  /** Explored-region polygons, most recent last. */
  explored: Point[][];
  /** Latest obstacle cluster hulls. */
  clusters: Point[][];
  path: PathParams | null;
  /** Pose-event history for the trajectory polyline. */
  trajectory: Point[];
}

export function initialViewState(): ViewState {
  return {
    connection: "connecting",
    retryInSeconds: null,
    scenario: "",
    t: 0,
    lastSeq: -1,
    pose: null,
    decision: "none",
    coverage: 0,
    outcome: "running",
    stuck: false,
    alert: null,
    driverBusy: false,
    teleopActive: false,
    explored: [],
    clusters: [],
    path: null,
    trajectory: [],
  };
}

export type CommandKind = "drive" | "goto" | "stop" | "resume_autonomy";

export interface OperatorCommand {
  kind: CommandKind;
  vx?: number;
  vy?: number;
  x?: number;
  y?: number;
}
