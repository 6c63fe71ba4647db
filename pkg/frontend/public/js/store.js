// Session state and every state transition the UI performs.
//
// The store is deliberately DOM-free so the whole interaction loop
// (place, request, accept, reject, undo) is testable in node. Solid
// elements (user or accepted) form the partial layout that is sent to
// the service; suggested elements are the dashed overlay from the
// currently selected candidate.
import { GRID_H, GRID_W, boundsEqual, insideBounds, } from "./types.js";
export class PlacementError extends Error {
}
let nextId = 1;
function makeElement(type, bounds, terminal, provenance) {
    return { id: nextId++, type, bounds, terminal, provenance, children: [] };
}
function clone(el) {
    return {
        ...el,
        bounds: [...el.bounds],
        children: el.children.map(clone),
    };
}
export class Session {
    root;
    selectedParent;
    pending = false;
    candidates = [];
    activeCandidate = 0;
    banner = null;
    undoStack = [];
    constructor(rootType) {
        this.root = makeElement(rootType, [0, 0, GRID_W, GRID_H], false, "user");
        this.selectedParent = this.root.id;
    }
    find(id, from = this.root) {
        if (from.id === id)
            return from;
        for (const child of from.children) {
            const hit = this.find(id, child);
            if (hit)
                return hit;
        }
        return null;
    }
    /** Solid elements only: the partial design entered so far. */
    solidTree() {
        const strip = (el) => ({
            ...el,
            bounds: [...el.bounds],
            children: el.children
                .filter((c) => c.provenance !== "suggested")
                .map(strip),
        });
        return strip(this.root);
    }
    snapshot() {
        this.undoStack.push(clone(this.solidTree()));
    }
    undo() {
        const prior = this.undoStack.pop();
        if (!prior)
            return false;
        this.root = prior;
        this.candidates = [];
        this.activeCandidate = 0;
        if (!this.find(this.selectedParent))
            this.selectedParent = this.root.id;
        return true;
    }
    placeElement(type, bounds, parentId, terminal = true) {
        const parent = this.find(parentId);
        if (!parent)
            throw new PlacementError(`no element ${parentId}`);
        if (parent.terminal) {
            throw new PlacementError(`${parent.type} cannot contain elements`);
        }
        if (!insideBounds(parent.bounds, bounds)) {
            throw new PlacementError("placement lies outside its parent");
        }
        this.snapshot();
        this.discardSuggestions();
        const el = makeElement(type, bounds, terminal, "user");
        insertReadingOrder(parent.children, el);
        return el;
    }
    discardSuggestions() {
        const prune = (el) => {
            el.children = el.children.filter((c) => c.provenance !== "suggested");
            el.children.forEach(prune);
        };
        prune(this.root);
        this.candidates = [];
        this.activeCandidate = 0;
    }
    serialize() {
        const toWire = (el) => ({
            type: el.type,
            bounds: [...el.bounds],
            terminal: el.terminal,
            children: el.children
                .filter((c) => c.provenance !== "suggested")
                .map(toWire),
        });
        return toWire(this.root);
    }
    async requestCompletion(client, options = {}) {
        if (this.pending)
            throw new Error("a completion request is in flight");
        const request = {
            root: this.serialize(),
            order: options.order ?? "bfs",
            numCandidates: options.numCandidates ?? 3,
            strategy: options.strategy ?? "greedy",
            beamWidth: options.beamWidth ?? 3,
        };
        if (request.strategy === "greedy")
            request.numCandidates = 1;
        this.pending = true;
        this.banner = null;
        try {
            const response = await client.complete(request);
            this.candidates = response.candidates;
            this.activeCandidate = 0;
            this.showCandidate(0);
        }
        catch (err) {
            // the design itself is untouched on any failure
            this.banner = err instanceof Error ? err.message : String(err);
        }
        finally {
            this.pending = false;
        }
    }
    showCandidate(index) {
        if (!this.candidates.length)
            return;
        this.activeCandidate =
            ((index % this.candidates.length) + this.candidates.length) %
                this.candidates.length;
        const candidate = this.candidates[this.activeCandidate];
        this.root = mergeCandidate(this.solidTree(), candidate.root);
        if (!this.find(this.selectedParent))
            this.selectedParent = this.root.id;
    }
    /** Promote every dashed element of the active candidate to solid. */
    acceptCandidate() {
        this.snapshot();
        const promote = (el) => {
            if (el.provenance === "suggested")
                el.provenance = "accepted";
            el.children.forEach(promote);
        };
        promote(this.root);
        this.candidates = [];
        this.activeCandidate = 0;
    }
    /**
     * Promote one dashed element (and any dashed ancestors it needs to
     * stay attached); the remaining suggestions stay dashed.
     */
    acceptElement(id) {
        const path = [];
        const dig = (el) => {
            path.push(el);
            if (el.id === id)
                return true;
            for (const child of el.children) {
                if (dig(child))
                    return true;
            }
            path.pop();
            return false;
        };
        if (!dig(this.root))
            throw new PlacementError(`no element ${id}`);
        if (path[path.length - 1].provenance !== "suggested") {
            throw new PlacementError("only suggested elements can be accepted");
        }
        this.snapshot();
        for (const el of path) {
            if (el.provenance === "suggested")
                el.provenance = "accepted";
        }
    }
    rejectSuggestions() {
        this.discardSuggestions();
    }
}
export function insertReadingOrder(siblings, el) {
    const key = (b) => [b[1], b[0]];
    let at = siblings.length;
    for (let i = 0; i < siblings.length; i++) {
        const [sy, sx] = key(siblings[i].bounds);
        const [ey, ex] = key(el.bounds);
        if (ey < sy || (ey === sy && ex < sx)) {
            at = i;
            break;
        }
    }
    siblings.splice(at, 0, el);
}
/**
 * Merge a candidate tree onto the solid design. Non-predicted response
 * nodes pair 1:1 with solid elements (the service returns given nodes
 * verbatim, both sides in reading order); predicted nodes become
 * dashed elements.
 */
export function mergeCandidate(solid, candidate) {
    if (candidate.predicted)
        throw new Error("candidate root must be given");
    if (candidate.type !== solid.type ||
        !boundsEqual(candidate.bounds, solid.bounds)) {
        throw new Error("candidate does not echo the given root");
    }
    const merged = {
        ...solid,
        bounds: [...solid.bounds],
        children: [],
    };
    const givenPool = solid.children.filter((c) => c.provenance !== "suggested");
    const used = new Set();
    for (const child of candidate.children) {
        if (child.predicted) {
            merged.children.push(asSuggested(child));
            continue;
        }
        const at = givenPool.findIndex((g, i) => !used.has(i) &&
            g.type === child.type &&
            g.terminal === child.terminal &&
            boundsEqual(g.bounds, child.bounds));
        if (at < 0)
            throw new Error("candidate invents a non-predicted node");
        used.add(at);
        merged.children.push(mergeCandidate(givenPool[at], child));
    }
    if (used.size !== givenPool.length) {
        throw new Error("candidate dropped a given node");
    }
    return merged;
}
function asSuggested(node) {
    const el = makeElement(node.type, [...node.bounds], node.terminal, "suggested");
    el.children = node.children.map(asSuggested);
    return el;
}
