/** Typed client errors: transport problems vs HTTP 4xx vs tool misuse. */

export class TransportError extends Error {
  readonly attempts: number;

  constructor(message: string, attempts: number, cause?: unknown) {
    super(message, { cause });
    this.name = "TransportError";
    this.attempts = attempts;
  }
}

export class ApiError extends Error {
  readonly status: number;
  readonly bodyText: string;

  constructor(message: string, status: number, bodyText: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.bodyText = bodyText;
  }
}

export class EpisodeNotFoundError extends ApiError {
  constructor(bodyText: string) {
    super("episode not found", 404, bodyText);
    this.name = "EpisodeNotFoundError";
  }
}

export class ValidationError extends ApiError {
  constructor(status: number, bodyText: string) {
    super(`request rejected by the service (${status})`, status, bodyText);
    this.name = "ValidationError";
  }
}

/** The service reported a tool name missing from its registry. */
export class UnknownToolError extends Error {
  readonly observation: string;

  constructor(observation: string) {
    super(observation);
    this.name = "UnknownToolError";
    this.observation = observation;
  }
}

export function apiErrorFor(status: number, bodyText: string): ApiError {
  if (status === 404) {
    return new EpisodeNotFoundError(bodyText);
  }
  if (status === 400 || status === 422) {
    return new ValidationError(status, bodyText);
  }
  return new ApiError(`unexpected status ${status}`, status, bodyText);
}
