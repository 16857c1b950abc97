/** Thin typed client for the arena session API, with one retry on network failure. */

import type {
  CreateSessionRequest,
  CreatedSession,
  MessageResult,
  SessionView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get outOfTurn(): boolean {
    return this.status === 409;
  }

  get sessionClosed(): boolean {
    return this.status === 410;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  fetchFn?: FetchLike;
  /** called before the single retry after a network failure, for user feedback */
  onRetry?: (error: unknown) => void;
}

export class ArenaClient {
  private readonly fetchFn: FetchLike;
  private readonly onRetry?: (error: unknown) => void;

  constructor(
    readonly baseUrl: string,
    options: ClientOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
    this.onRetry = options.onRetry;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    };
    const url = this.baseUrl.replace(/\/$/, "") + path;
    let response: Response;
    try {
      response = await this.fetchFn(url, init);
    } catch (error) {
      this.onRetry?.(error);
      response = await this.fetchFn(url, init); // one retry, then surface
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const payload = (await response.json()) as { detail?: string };
        if (payload.detail) detail = payload.detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(request: CreateSessionRequest): Promise<CreatedSession> {
    return this.request<CreatedSession>("POST", "/sessions", request);
  }

  submitConsent(token: string, demographics?: Record<string, string>): Promise<unknown> {
    return this.request("POST", `/sessions/${token}/consent`, {
      accepted: true,
      demographics: demographics ?? null,
    });
  }

  postMessage(token: string, text: string): Promise<MessageResult> {
    return this.request<MessageResult>("POST", `/sessions/${token}/messages`, { text });
  }

  getState(token: string): Promise<SessionView> {
    return this.request<SessionView>("GET", `/sessions/${token}`);
  }
}
