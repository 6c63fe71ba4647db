// Thin HTTP client for the completion service.

import { CompleteRequest, CompleteResponse } from "./types.js";
import { CompletionClient } from "./store.js";

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(`service ${status}: ${message}`);
  }
}

export class HttpClient implements CompletionClient {
  constructor(readonly baseUrl: string) {}

  async complete(request: CompleteRequest): Promise<CompleteResponse> {
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
      } catch {
        // keep the status text
      }
      throw new ServiceError(resp.status, detail);
    }
    return (await resp.json()) as CompleteResponse;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await fetch(`${this.baseUrl}/healthz`);
      return resp.ok;
    } catch {
      return false;
    }
  }

  async modelInfo(): Promise<CompleteResponse["modelInfo"]> {
    const resp = await fetch(`${this.baseUrl}/model`);
    if (!resp.ok) throw new ServiceError(resp.status, resp.statusText);
    return (await resp.json()) as CompleteResponse["modelInfo"];
  }
}
