import { describe, expect, it } from "vitest";

import { Session, insertReadingOrder, mergeCandidate } from "../src/store.js";
import {
  Bounds,
  Candidate,
  CanvasElement,
  CompleteRequest,
  CompleteResponse,
  PredictedNode,
} from "../src/types.js";

const ROOT_TYPE = "Background Image";

function makeSession(): Session {
  return new Session(ROOT_TYPE);
}

function solidKeys(el: CanvasElement): string[] {
  const out: string[] = [];
  const walk = (e: CanvasElement, path: string) => {
    if (e.provenance !== "suggested") {
      out.push(`${path}/${e.type}@${e.bounds.join(",")}#${e.id}`);
    }
    e.children.forEach((c, i) => walk(c, `${path}/${i}`));
  };
  walk(el, "");
  return out;
}

function echoCandidate(el: CanvasElement, extras: PredictedNode[] = []): Candidate {
  const toWire = (e: CanvasElement): PredictedNode => ({
    type: e.type,
    bounds: [...e.bounds] as Bounds,
    terminal: e.terminal,
    predicted: false,
    children: e.children
      .filter((c) => c.provenance !== "suggested")
      .map(toWire),
  });
  const root = toWire(el);
  root.children.push(...extras);
  return { root, logProb: -1.5, newNodeCount: extras.length, budgetExhausted: false };
}

function suggestion(type: string, bounds: Bounds): PredictedNode {
  return { type, bounds, terminal: true, predicted: true, children: [] };
}

class StubClient {
  requests: CompleteRequest[] = [];
  constructor(private reply: (req: CompleteRequest) => CompleteResponse) {}

  async complete(request: CompleteRequest): Promise<CompleteResponse> {
    this.requests.push(JSON.parse(JSON.stringify(request)));
    return this.reply(request);
  }
}

function respond(candidates: Candidate[]): CompleteResponse {
  return {
    candidates,
    modelInfo: {
      variant: "pointer", checkpointHash: "x", gridWidth: 72, gridHeight: 128,
      typeCount: 25, layers: 2, hiddenDim: 64,
    },
    timingMs: 1,
  };
}

describe("placement", () => {
  it("adds a depth-1 node under the canvas root", () => {
    const s = makeSession();
    s.placeElement("Text Button", [4, 8, 20, 16], s.root.id);
    expect(s.root.children).toHaveLength(1);
    expect(s.root.children[0].type).toBe("Text Button");
  });

  it("rejects drops outside the parent and leaves the tree unchanged", () => {
    const s = makeSession();
    const before = JSON.stringify(s.serialize());
    expect(() => s.placeElement("Text", [-2, 0, 10, 10], s.root.id)).toThrow();
    expect(() => s.placeElement("Text", [0, 0, 80, 10], s.root.id)).toThrow();
    expect(JSON.stringify(s.serialize())).toBe(before);
  });

  it("rejects children under terminal elements", () => {
    const s = makeSession();
    const leaf = s.placeElement("Icon", [0, 0, 8, 8], s.root.id);
    expect(() => s.placeElement("Text", [1, 1, 4, 4], leaf.id)).toThrow();
  });

  it("keeps siblings in reading order", () => {
    const s = makeSession();
    s.placeElement("Text", [10, 40, 20, 50], s.root.id);
    s.placeElement("Icon", [5, 5, 15, 15], s.root.id);
    s.placeElement("Card", [30, 5, 60, 25], s.root.id, false);
    expect(s.root.children.map((c) => c.type)).toEqual(["Icon", "Card", "Text"]);
  });

  it("two placements then undo twice returns to the empty canvas", () => {
    const s = makeSession();
    s.placeElement("Text", [0, 0, 10, 10], s.root.id);
    s.placeElement("Icon", [20, 20, 30, 30], s.root.id);
    expect(s.undo()).toBe(true);
    expect(s.undo()).toBe(true);
    expect(s.root.children).toHaveLength(0);
    expect(s.undo()).toBe(false);
  });
});

describe("insertReadingOrder", () => {
  it("orders by y then x", () => {
    const mk = (bounds: Bounds): CanvasElement =>
      ({ id: 0, type: "Text", bounds, terminal: true, provenance: "user",
         children: [] });
    const siblings: CanvasElement[] = [];
    insertReadingOrder(siblings, mk([10, 10, 20, 20]));
    insertReadingOrder(siblings, mk([0, 10, 5, 20]));
    insertReadingOrder(siblings, mk([0, 0, 5, 5]));
    expect(siblings.map((e) => e.bounds[1] * 100 + e.bounds[0]))
      .toEqual([0, 1000, 1010]);
  });
});

describe("completion flow", () => {
  it("sends the solid tree and renders candidates dashed", async () => {
    const s = makeSession();
    s.placeElement("Text", [0, 0, 10, 10], s.root.id);
    const client = new StubClient(() =>
      respond([echoCandidate(s.root, [suggestion("Icon", [20, 20, 30, 30])])]));
    await s.requestCompletion(client);
    expect(client.requests).toHaveLength(1);
    expect(client.requests[0].root.children).toHaveLength(1);
    const dashed = s.root.children.filter((c) => c.provenance === "suggested");
    expect(dashed).toHaveLength(1);
    expect(dashed[0].type).toBe("Icon");
    expect(s.banner).toBeNull();
  });

  it("root-only canvas sends a root-only partial", async () => {
    const s = makeSession();
    const client = new StubClient(() => respond([echoCandidate(s.root)]));
    await s.requestCompletion(client);
    expect(client.requests[0].root.children).toHaveLength(0);
  });

  it("enforces a single in-flight request", async () => {
    const s = makeSession();
    let release: (() => void) | null = null;
    const client = {
      complete: () =>
        new Promise<CompleteResponse>((resolve) => {
          release = () => resolve(respond([echoCandidate(s.root)]));
        }),
    };
    const first = s.requestCompletion(client);
    await expect(s.requestCompletion(client)).rejects.toThrow(/in flight/);
    release!();
    await first;
  });

  it("service failure raises a banner and leaves state untouched", async () => {
    const s = makeSession();
    s.placeElement("Text", [0, 0, 10, 10], s.root.id);
    const before = solidKeys(s.root).join("|");
    const client = {
      complete: async () => {
        throw new Error("service 503: overloaded");
      },
    };
    await s.requestCompletion(client);
    expect(s.banner).toMatch(/503/);
    expect(solidKeys(s.root).join("|")).toBe(before);
    expect(s.candidates).toHaveLength(0);
  });

  it("switches between candidates", async () => {
    const s = makeSession();
    const c1 = echoCandidate(s.root, [suggestion("Icon", [0, 0, 8, 8])]);
    const c2 = echoCandidate(s.root, [suggestion("Text", [0, 0, 8, 8])]);
    const client = new StubClient(() => respond([c1, c2]));
    await s.requestCompletion(client, { strategy: "beam", numCandidates: 2 });
    expect(s.candidates).toHaveLength(2);
    expect(s.root.children[0].type).toBe("Icon");
    s.showCandidate(1);
    expect(s.root.children[0].type).toBe("Text");
    s.showCandidate(0);
    expect(s.root.children[0].type).toBe("Icon");
  });
});

describe("accept and reject", () => {
  async function withSuggestions(): Promise<Session> {
    const s = makeSession();
    s.placeElement("Text", [0, 0, 10, 10], s.root.id);
    const extras = [
      suggestion("Icon", [20, 20, 30, 30]),
      suggestion("Slider", [40, 40, 60, 50]),
    ];
    const client = new StubClient(() => respond([echoCandidate(s.root, extras)]));
    await s.requestCompletion(client);
    return s;
  }

  it("accept all turns every dashed element solid", async () => {
    const s = await withSuggestions();
    s.acceptCandidate();
    const provenances = s.root.children.map((c) => c.provenance);
    expect(provenances).toContain("accepted");
    expect(provenances).not.toContain("suggested");
    expect(s.serialize().children).toHaveLength(3);
  });

  it("accepting one element keeps the rest dashed and re-sends it as given",
     async () => {
    const s = await withSuggestions();
    const icon = s.root.children.find((c) => c.type === "Icon")!;
    s.acceptElement(icon.id);
    expect(icon.provenance).toBe("accepted");
    const stillDashed = s.root.children.filter(
      (c) => c.provenance === "suggested");
    expect(stillDashed.map((c) => c.type)).toEqual(["Slider"]);
    const client = new StubClient(() => respond([echoCandidate(s.root)]));
    await s.requestCompletion(client);
    const sent = client.requests[0].root.children.map((c) => c.type);
    expect(sent).toContain("Icon");
    expect(sent).not.toContain("Slider");
  });

  it("accepting a nested element promotes its dashed ancestors", async () => {
    const s = makeSession();
    const card: PredictedNode = {
      type: "Card", bounds: [10, 10, 40, 40], terminal: false, predicted: true,
      children: [suggestion("Text", [12, 12, 20, 20])],
    };
    const client = new StubClient(() => respond([echoCandidate(s.root, [card])]));
    await s.requestCompletion(client);
    const nested = s.root.children[0].children[0];
    s.acceptElement(nested.id);
    expect(s.root.children[0].provenance).toBe("accepted");
    expect(nested.provenance).toBe("accepted");
  });

  it("reject removes every dashed element", async () => {
    const s = await withSuggestions();
    s.rejectSuggestions();
    expect(s.root.children).toHaveLength(1);
    expect(s.root.children[0].type).toBe("Text");
  });

  it("suggestions never modify user-placed elements", async () => {
    const s = await withSuggestions();
    const before = solidKeys(s.root).join("|");
    s.showCandidate(0);
    s.acceptCandidate();
    expect(solidKeys(s.root).join("|")).toContain(before.split("|")[1]);
    const text = s.root.children.find((c) => c.type === "Text")!;
    expect(text.bounds).toEqual([0, 0, 10, 10]);
    expect(text.provenance).toBe("user");
  });
});

describe("round-trip fidelity", () => {
  it("an echo candidate reproduces the identical client tree", async () => {
    const s = makeSession();
    s.placeElement("Card", [5, 5, 40, 60], s.root.id, false);
    const card = s.root.children[0];
    s.placeElement("Text", [6, 6, 20, 12], card.id);
    const before = JSON.parse(JSON.stringify(s.root));
    const client = new StubClient(() => respond([echoCandidate(s.root)]));
    await s.requestCompletion(client);
    expect(s.root).toEqual(before);  // ids, provenance, everything
  });

  it("mergeCandidate rejects candidates that drop given nodes", () => {
    const s = makeSession();
    s.placeElement("Text", [0, 0, 10, 10], s.root.id);
    const bad: PredictedNode = {
      type: ROOT_TYPE, bounds: [0, 0, 72, 128], terminal: false,
      predicted: false, children: [],
    };
    expect(() => mergeCandidate(s.solidTree(), bad)).toThrow(/dropped/);
  });
});
