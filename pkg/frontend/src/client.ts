/**
 * Typed client for the sandbox service.
 *
 * A pure transport/typing layer: no reward math, no observation rewriting.
 * Every response body is kept byte-faithful in `RawResponse.bodyText` so
 * callers (and parity tests) can compare exchanges with raw HTTP.
 */

import { apiErrorFor, TransportError, UnknownToolError } from "./errors.js";
import type {
  ClientConfig,
  HealthInfo,
  RawResponse,
  RewardBreakdown,
  RewardConfigName,
  SampleJson,
  ToolResponse,
  ToolSchema,
  TraceJson,
} from "./types.js";

const DEFAULT_TIMEOUT_MS = 10_000;
const DEFAULT_RETRIES = 3;

export class SandboxClient {
  readonly baseUrl: string;
  readonly timeoutMs: number;
  readonly retries: number;

  constructor(config: ClientConfig) {
    if ((config.timeoutMs ?? DEFAULT_TIMEOUT_MS) <= 0) {
      throw new RangeError("timeoutMs must be positive");
    }
    this.baseUrl = config.baseUrl.replace(/\/+$/, "");
    this.timeoutMs = config.timeoutMs ?? DEFAULT_TIMEOUT_MS;
    this.retries = config.retries ?? DEFAULT_RETRIES;
  }

  /**
   * Issue one HTTP request with retries on network failures and 5xx.
   * Returns the raw status and body text without interpretation.
   */
  async request(method: string, path: string, body?: unknown): Promise<RawResponse> {
    const url = `${this.baseUrl}${path}`;
    let lastFailure: unknown;
    for (let attempt = 0; attempt < this.retries; attempt++) {
      let response: Response;
      try {
        response = await fetch(url, {
          method,
          headers: body === undefined ? undefined : { "Content-Type": "application/json" },
          body: body === undefined ? undefined : JSON.stringify(body),
          signal: AbortSignal.timeout(this.timeoutMs),
        });
      } catch (err) {
        lastFailure = err;
        continue;
      }
      const bodyText = await response.text();
      if (response.status >= 500) {
        lastFailure = apiErrorFor(response.status, bodyText);
        continue;
      }
      return { status: response.status, bodyText };
    }
    throw new TransportError(
      `${method} ${url} failed after ${this.retries} attempts`,
      this.retries,
      lastFailure,
    );
  }

  private async requestJson<T>(method: string, path: string, body?: unknown): Promise<T> {
    const raw = await this.request(method, path, body);
    if (raw.status >= 400) {
      throw apiErrorFor(raw.status, raw.bodyText);
    }
    return JSON.parse(raw.bodyText) as T;
  }

  async health(): Promise<HealthInfo> {
    return this.requestJson<HealthInfo>("GET", "/health");
  }

  async schemas(): Promise<ToolSchema[]> {
    return this.requestJson<ToolSchema[]>("GET", "/schemas");
  }

  async createEpisode(sampleId?: string): Promise<string> {
    const body = sampleId === undefined ? {} : { sample_id: sampleId };
    const data = await this.requestJson<{ episode_id: string }>("POST", "/episodes", body);
    return data.episode_id;
  }

  /**
   * Execute one tool call and return the observation exactly as served.
   * Sandbox-state errors (once-only image tool, empty results, unavailable
   * search) pass through as observations; an unknown tool name throws.
   */
  async executeTool(
    episodeId: string,
    name: string,
    args: Record<string, unknown> = {},
  ): Promise<string> {
    const data = await this.requestJson<ToolResponse>(
      "POST",
      `/episodes/${encodeURIComponent(episodeId)}/tool`,
      { name, arguments: args },
    );
    if (data.error === "unknown_tool") {
      throw new UnknownToolError(data.observation);
    }
    return data.observation;
  }

  async deleteEpisode(episodeId: string): Promise<void> {
    await this.requestJson<{ deleted: boolean }>(
      "DELETE",
      `/episodes/${encodeURIComponent(episodeId)}`,
    );
  }

  async scoreTrace(
    trace: TraceJson,
    sample: SampleJson,
    config: RewardConfigName = "decomposed",
  ): Promise<RewardBreakdown> {
    return this.requestJson<RewardBreakdown>("POST", "/score", {
      trace,
      sample,
      config,
    });
  }
}
