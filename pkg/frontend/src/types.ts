/** Wire types mirrored from the sandbox service JSON bodies. */

export interface ClientConfig {
  /** Service root, e.g. "http://127.0.0.1:8810". */
  baseUrl: string;
  /** Per-request timeout in milliseconds. */
  timeoutMs?: number;
  /** Attempts per request (network failures and 5xx are retried). */
  retries?: number;
}

export interface HealthInfo {
  status: string;
  mode: string;
}

export interface ToolFunctionSchema {
  name: string;
  description: string;
  parameters: {
    type: string;
    properties: Record<string, unknown>;
    required: string[];
  };
}

export interface ToolSchema {
  type: "function";
  function: ToolFunctionSchema;
}

export interface ToolResponse {
  observation: string;
  error: string | null;
}

export interface RewardBreakdown {
  outcome: number;
  behavior: number;
  format: number;
  tool_used: number;
  composite: number;
  config_kind: string;
}

export type RewardConfigName =
  | "decomposed"
  | "conf"
  | "no_behavior"
  | "naive_behavior"
  | "higher_behavior";

export interface TraceAction {
  type: "tool_call" | "answer" | "malformed";
  name?: string;
  arguments?: Record<string, unknown>;
  answer?: string;
  violations?: string[];
}

export interface TraceTurn {
  raw: string;
  think: string | null;
  action: TraceAction;
}

export interface TraceJson {
  turns: TraceTurn[];
  observations: string[];
  terminal: "answered" | "truncated";
}

export interface SampleJson {
  sample_id: string;
  question: string;
  answer: string;
  image_ref?: string;
  metadata?: "tool_required" | "tool_free" | null;
}

/** Raw HTTP exchange as seen on the wire; bodyText is byte-faithful. */
export interface RawResponse {
  status: number;
  bodyText: string;
}
