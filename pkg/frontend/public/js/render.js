// SVG canvas and tree panel rendering, kept dumb: read the session,
// paint, and forward events to callbacks.
import { GRID_H, GRID_W } from "./types.js";
const SVG_NS = "http://www.w3.org/2000/svg";
export class CanvasView {
    host;
    callbacks;
    svg;
    zoom;
    constructor(host, callbacks, zoom = 6) {
        this.host = host;
        this.callbacks = callbacks;
        this.zoom = zoom;
        this.svg = document.createElementNS(SVG_NS, "svg");
        this.host.appendChild(this.svg);
        this.attachDrawHandlers();
        this.applySize();
    }
    setZoom(zoom) {
        this.zoom = Math.max(2, Math.min(12, zoom));
        this.applySize();
    }
    get currentZoom() {
        return this.zoom;
    }
    applySize() {
        this.svg.setAttribute("width", String(GRID_W * this.zoom));
        this.svg.setAttribute("height", String(GRID_H * this.zoom));
        this.svg.setAttribute("viewBox", `0 0 ${GRID_W * this.zoom} ${GRID_H * this.zoom}`);
    }
    toGrid(ev) {
        const rect = this.svg.getBoundingClientRect();
        const gx = Math.round((ev.clientX - rect.left) / this.zoom);
        const gy = Math.round((ev.clientY - rect.top) / this.zoom);
        return [Math.max(0, Math.min(GRID_W, gx)), Math.max(0, Math.min(GRID_H, gy))];
    }
    attachDrawHandlers() {
        let start = null;
        let rubber = null;
        this.svg.addEventListener("mousedown", (ev) => {
            start = this.toGrid(ev);
            rubber = document.createElementNS(SVG_NS, "rect");
            rubber.setAttribute("class", "rubber");
            this.svg.appendChild(rubber);
        });
        this.svg.addEventListener("mousemove", (ev) => {
            if (!start || !rubber)
                return;
            const [x, y] = this.toGrid(ev);
            const b = normalize(start, [x, y]);
            rubber.setAttribute("x", String(b[0] * this.zoom));
            rubber.setAttribute("y", String(b[1] * this.zoom));
            rubber.setAttribute("width", String((b[2] - b[0]) * this.zoom));
            rubber.setAttribute("height", String((b[3] - b[1]) * this.zoom));
        });
        this.svg.addEventListener("mouseup", (ev) => {
            if (!start)
                return;
            const bounds = normalize(start, this.toGrid(ev));
            start = null;
            rubber?.remove();
            rubber = null;
            if (bounds[2] > bounds[0] && bounds[3] > bounds[1]) {
                this.callbacks.onDraw(bounds);
            }
        });
    }
    paint(session) {
        for (const el of Array.from(this.svg.querySelectorAll("g")))
            el.remove();
        const group = document.createElementNS(SVG_NS, "g");
        this.svg.appendChild(group);
        const draw = (el, depth) => {
            const rect = document.createElementNS(SVG_NS, "rect");
            const [x, y, xh, yh] = el.bounds;
            rect.setAttribute("x", String(x * this.zoom));
            rect.setAttribute("y", String(y * this.zoom));
            rect.setAttribute("width", String((xh - x) * this.zoom));
            rect.setAttribute("height", String((yh - y) * this.zoom));
            rect.setAttribute("class", `el ${el.provenance}${el.id === session.selectedParent ? " selected" : ""}`);
            rect.dataset.id = String(el.id);
            rect.addEventListener("click", (ev) => {
                ev.stopPropagation();
                if (el.provenance === "suggested" && ev.altKey) {
                    this.callbacks.onAcceptElement(el.id);
                }
                else if (!el.terminal) {
                    this.callbacks.onSelect(el.id);
                }
            });
            group.appendChild(rect);
            if (depth < 12) {
                const label = document.createElementNS(SVG_NS, "text");
                label.setAttribute("x", String(x * this.zoom + 2));
                label.setAttribute("y", String(y * this.zoom + 10));
                label.setAttribute("class", `label ${el.provenance}`);
                label.textContent = el.type;
                group.appendChild(label);
            }
            el.children.forEach((c) => draw(c, depth + 1));
        };
        draw(session.root, 0);
    }
}
function normalize(a, b) {
    return [
        Math.min(a[0], b[0]),
        Math.min(a[1], b[1]),
        Math.max(a[0], b[0]),
        Math.max(a[1], b[1]),
    ];
}
export class TreePanel {
    host;
    callbacks;
    constructor(host, callbacks) {
        this.host = host;
        this.callbacks = callbacks;
    }
    paint(session) {
        this.host.innerHTML = "";
        const build = (el) => {
            const li = document.createElement("li");
            const row = document.createElement("span");
            row.textContent = `${el.type} [${el.bounds.join(", ")}]`;
            row.className =
                `node ${el.provenance}${el.id === session.selectedParent ? " selected" : ""}`;
            row.addEventListener("click", () => {
                if (el.provenance === "suggested")
                    this.callbacks.onAcceptElement(el.id);
                else if (!el.terminal)
                    this.callbacks.onSelect(el.id);
            });
            li.appendChild(row);
            if (el.children.length) {
                const ul = document.createElement("ul");
                for (const child of el.children)
                    ul.appendChild(build(child));
                li.appendChild(ul);
            }
            return li;
        };
        const ul = document.createElement("ul");
        ul.appendChild(build(session.root));
        this.host.appendChild(ul);
    }
}
