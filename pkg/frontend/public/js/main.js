// Wiring: palette, session, canvas, tree panel, service client.
import { HttpClient } from "./api.js";
import { CanvasView, TreePanel } from "./render.js";
import { PlacementError, Session } from "./store.js";
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8000";
const client = new HttpClient(baseUrl);
async function loadManifest() {
    const resp = await fetch("./types.txt");
    const text = await resp.text();
    return text.split("\n").map((l) => l.trim()).filter(Boolean);
}
function flash(message, kind = "error") {
    const banner = document.getElementById("banner");
    banner.textContent = message;
    banner.className = kind;
    banner.style.display = message ? "block" : "none";
}
async function boot() {
    const manifest = await loadManifest();
    const session = new Session("Background Image");
    let selectedType = manifest.includes("Text") ? "Text" : manifest[0];
    const palette = document.getElementById("palette");
    for (const name of manifest) {
        const btn = document.createElement("button");
        btn.textContent = name;
        btn.className = name === selectedType ? "type selected" : "type";
        btn.addEventListener("click", () => {
            selectedType = name;
            for (const other of Array.from(palette.children)) {
                other.className = other === btn ? "type selected" : "type";
            }
        });
        palette.appendChild(btn);
    }
    const callbacks = {
        onSelect(id) {
            session.selectedParent = id;
            repaint();
        },
        onDraw(bounds) {
            try {
                // containers get drawn as non-terminal so they can be filled
                const terminal = !["Card", "List Item", "Toolbar", "Modal", "Drawer",
                    "Button Bar", "Multi-Tab", "Bottom Navigation"]
                    .includes(selectedType);
                session.placeElement(selectedType, bounds, session.selectedParent, terminal);
                flash("", "info");
            }
            catch (err) {
                if (err instanceof PlacementError)
                    flash(err.message);
                else
                    throw err;
            }
            repaint();
        },
        onAcceptElement(id) {
            try {
                session.acceptElement(id);
            }
            catch (err) {
                flash(err instanceof Error ? err.message : String(err));
            }
            repaint();
        },
    };
    const canvas = new CanvasView(document.getElementById("canvas"), callbacks);
    const tree = new TreePanel(document.getElementById("tree"), callbacks);
    function repaint() {
        canvas.paint(session);
        tree.paint(session);
        const switcher = document.getElementById("switcher");
        if (session.candidates.length > 1) {
            switcher.style.display = "inline";
            switcher.textContent =
                ` candidate ${session.activeCandidate + 1}/${session.candidates.length} `;
        }
        else {
            switcher.style.display = "none";
        }
        if (session.banner)
            flash(session.banner);
    }
    function hook(id, fn) {
        document.getElementById(id).addEventListener("click", () => {
            Promise.resolve(fn()).then(repaint, (err) => {
                flash(err instanceof Error ? err.message : String(err));
                repaint();
            });
        });
    }
    hook("complete", async () => {
        if (session.pending)
            return;
        const order = document.getElementById("order").value;
        const strategy = document.getElementById("strategy").value;
        await session.requestCompletion(client, {
            order: order,
            strategy: strategy,
            numCandidates: strategy === "beam" ? 3 : 1,
            beamWidth: 3,
        });
    });
    hook("accept", () => session.acceptCandidate());
    hook("reject", () => session.rejectSuggestions());
    hook("undo", () => void session.undo());
    hook("prev", () => session.showCandidate(session.activeCandidate - 1));
    hook("next", () => session.showCandidate(session.activeCandidate + 1));
    hook("zoom-in", () => canvas.setZoom(canvas.currentZoom + 1));
    hook("zoom-out", () => canvas.setZoom(canvas.currentZoom - 1));
    hook("export", () => {
        const blob = new Blob([JSON.stringify(session.serialize(), null, 2)], { type: "application/json" });
        const a = document.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = "design.json";
        a.click();
    });
    const ok = await client.health();
    flash(ok ? "" : `completion service unreachable at ${baseUrl}`, "error");
    repaint();
}
boot().catch((err) => flash(String(err)));
