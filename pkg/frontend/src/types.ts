// Shared types for the designer client.

export const GRID_W = 72;
export const GRID_H = 128;

export type Bounds = [number, number, number, number];

export type Provenance = "user" | "suggested" | "accepted";

export interface CanvasElement {
  id: number;
  type: string;
  bounds: Bounds;
  terminal: boolean;
  provenance: Provenance;
  children: CanvasElement[];
}

// Wire schema spoken by the completion service.
export interface WireNode {
  type: string;
  bounds: Bounds;
  terminal: boolean;
  children: WireNode[];
}

export interface PredictedNode extends WireNode {
  predicted: boolean;
  children: PredictedNode[];
}

export interface CompleteRequest {
  root: WireNode;
  order: "bfs" | "dfs";
  numCandidates: number;
  strategy: "greedy" | "beam";
  beamWidth: number;
}

export interface Candidate {
  root: PredictedNode;
  logProb: number;
  newNodeCount: number;
  budgetExhausted: boolean;
}

export interface CompleteResponse {
  candidates: Candidate[];
  modelInfo: {
    variant: string;
    checkpointHash: string;
    gridWidth: number;
    gridHeight: number;
    typeCount: number;
    layers: number;
    hiddenDim: number;
  };
  timingMs: number;
}

export function insideBounds(outer: Bounds, inner: Bounds): boolean {
  return (
    outer[0] <= inner[0] &&
    inner[0] < inner[2] &&
    inner[2] <= outer[2] &&
    outer[1] <= inner[1] &&
    inner[1] < inner[3] &&
    inner[3] <= outer[3]
  );
}

export function boundsEqual(a: Bounds, b: Bounds): boolean {
  return a[0] === b[0] && a[1] === b[1] && a[2] === b[2] && a[3] === b[3];
}
