// Thin HTTP client for the completion service.
export class ServiceError extends Error {
    status;
    constructor(status, message) {
        super(`service ${status}: ${message}`);
        this.status = status;
    }
}
export class HttpClient {
    baseUrl;
    constructor(baseUrl) {
        this.baseUrl = baseUrl;
    }
    async complete(request) {
        const resp = await fetch(`${this.baseUrl}/complete`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(request),
        });
        if (!resp.ok) {
            let detail = resp.statusText;
            try {
                const doc = await resp.json();
                detail = typeof doc.detail === "string" ? doc.detail : JSON.stringify(doc.detail);
            }
            catch {
                // keep the status text
            }
            throw new ServiceError(resp.status, detail);
        }
        return (await resp.json());
    }
    async health() {
        try {
            const resp = await fetch(`${this.baseUrl}/healthz`);
            return resp.ok;
        }
        catch {
            return false;
        }
    }
    async modelInfo() {
        const resp = await fetch(`${this.baseUrl}/model`);
        if (!resp.ok)
            throw new ServiceError(resp.status, resp.statusText);
        return (await resp.json());
    }
}
