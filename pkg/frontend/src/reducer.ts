/**
 * The single reducer: every change to the view state flows through here,
 * driven by server records (snapshot + events) and connection transitions.
 * No optimistic updates — the UI only ever renders what the station said.
 */

import {
  KvRecord,
  kvBool,
  kvNumber,
  numberedValues,
  parsePolygon,
} from "./kvlines.js";
import { ViewState, initialViewState } from "./types.js";

const TRAJECTORY_LIMIT = 5000;

export type Action =
  | { type: "server-record"; record: KvRecord; nowMs: number }
  | { type: "connecting" }
  | { type: "connected" }
  | { type: "disconnected"; retryInSeconds: number };

export function reduce(state: ViewState, action: Action): ViewState {
  switch (action.type) {
    case "connecting":
      return { ...state, connection: "connecting", retryInSeconds: null };
    case "connected":
      return { ...state, connection: "connected", retryInSeconds: null };
    case "disconnected":
      return {
        ...state,
        connection: "disconnected",
        retryInSeconds: action.retryInSeconds,
      };
    case "server-record":
      return applyRecord(state, action.record, action.nowMs);
  }
}

function applyRecord(state: ViewState, rec: KvRecord, nowMs: number): ViewState {
  const event = rec["event"];
  switch (event) {
    case "snapshot":
      return applySnapshot(state, rec, nowMs);
    case "pose": {
      const pose = {
        x: kvNumber(rec, "x"),
        y: kvNumber(rec, "y"),
        heading: kvNumber(rec, "heading"),
      };
      return {
        ...bump(state, rec),
        pose,
        coverage: kvNumber(rec, "coverage", state.coverage),
        decision: rec["decision"] ?? state.decision,
        trajectory: [...state.trajectory, { x: pose.x, y: pose.y }].slice(
          -TRAJECTORY_LIMIT,
        ),
      };
    }
    case "decision": {
      const decision = rec["decision"] ?? state.decision;
      const next = { ...bump(state, rec), decision };
      // leaving teleop for autonomy clears the stuck banner
      if (decision !== "stuck" && decision !== "none") {
        next.stuck = false;
      }
      return next;
    }
    case "alert":
      return {
        ...bump(state, rec),
        stuck: true,
        alert: {
          x: kvNumber(rec, "x"),
          y: kvNumber(rec, "y"),
          t: kvNumber(rec, "t"),
          seenAtMs: nowMs,
        },
      };
    case "path":
      return {
        ...bump(state, rec),
        path: {
          anchorX: kvNumber(rec, "anchor_x"),
          anchorY: kvNumber(rec, "anchor_y"),
          heading: kvNumber(rec, "heading"),
          a: kvNumber(rec, "a"),
          b: kvNumber(rec, "b"),
          c: kvNumber(rec, "c"),
          d: kvNumber(rec, "d"),
        },
      };
    case "map":
      return {
        ...bump(state, rec),
        explored: numberedValues(rec, "polygon").map(parsePolygon),
        clusters: numberedValues(rec, "cluster").map(parsePolygon),
      };
    case "command":
    case "heartbeat":
      return bump(state, rec);
    default:
      // Unknown events still advance time/seq; forward compatibility.
      return bump(state, rec);
  }
}

function bump(state: ViewState, rec: KvRecord): ViewState {
  return {
    ...state,
    t: kvNumber(rec, "t", state.t),
    lastSeq: kvNumber(rec, "seq", state.lastSeq),
  };
}

function applySnapshot(state: ViewState, rec: KvRecord, nowMs: number): ViewState {
  const stuck = kvBool(rec, "stuck");
  const pose = {
    x: kvNumber(rec, "x"),
    y: kvNumber(rec, "y"),
    heading: kvNumber(rec, "heading"),
  };
  const path = rec["path_a"] !== undefined
    ? {
        anchorX: kvNumber(rec, "path_anchor_x"),
        anchorY: kvNumber(rec, "path_anchor_y"),
        heading: kvNumber(rec, "path_heading"),
        a: kvNumber(rec, "path_a"),
        b: kvNumber(rec, "path_b"),
        c: kvNumber(rec, "path_c"),
        d: kvNumber(rec, "path_d"),
      }
    : null;
  return {
    ...initialViewState(),
    connection: state.connection,
    retryInSeconds: state.retryInSeconds,
    scenario: rec["scenario"] ?? "",
    t: kvNumber(rec, "t"),
    lastSeq: state.lastSeq,
    pose,
    decision: rec["decision"] ?? "none",
    coverage: kvNumber(rec, "coverage"),
    outcome: rec["outcome"] ?? "running",
    stuck,
    // A snapshot that still reports stuck keeps (or creates) the banner.
    alert: stuck
      ? state.alert ?? { x: pose.x, y: pose.y, t: kvNumber(rec, "t"), seenAtMs: nowMs }
      : null,
    driverBusy: kvBool(rec, "driver_busy"),
    teleopActive: kvBool(rec, "teleop_active"),
    explored: numberedValues(rec, "polygon").map(parsePolygon),
    clusters: numberedValues(rec, "cluster").map(parsePolygon),
    path,
    trajectory: state.trajectory,
  };
}
