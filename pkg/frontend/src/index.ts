export { SandboxClient } from "./client.js";
export {
  ApiError,
  EpisodeNotFoundError,
  TransportError,
  UnknownToolError,
  ValidationError,
} from "./errors.js";
export type {
  ClientConfig,
  HealthInfo,
  RawResponse,
  RewardBreakdown,
  RewardConfigName,
  SampleJson,
  ToolResponse,
  ToolSchema,
  TraceAction,
  TraceJson,
  TraceTurn,
} from "./types.js";
