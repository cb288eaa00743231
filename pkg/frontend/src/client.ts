// Thin gateway client: REST calls plus a resumable envelope stream. The
// fetch and WebSocket implementations are injectable so tests can run under
// Node against a real server (or a fake).

import {
  Envelope,
  GatewayError,
  LiveMetrics,
  PROTOCOL_VERSION,
  StreamEvent,
  TraceRecord,
} from './protocol.js';

export class GatewayRequestError extends Error {
  constructor(
    readonly status: number,
    readonly detail: GatewayError,
  ) {
    super(`${detail.code}: ${detail.message}`);
  }
}

export interface WebSocketLike {
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: ((event: unknown) => void) | null;
  onerror: ((event: unknown) => void) | null;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface GatewayClientOptions {
  baseUrl: string;
  fetchImpl?: typeof fetch;
  webSocketFactory?: WebSocketFactory;
}

export interface StreamHandle {
  close(): void;
}

export class GatewayClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;
  private readonly webSocketFactory: WebSocketFactory;

  constructor(options: GatewayClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, '');
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.webSocketFactory =
      options.webSocketFactory ??
      ((url) => new WebSocket(url) as unknown as WebSocketLike);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const parsed = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      const detail = (parsed.error ?? {
        code: 'unknown',
        message: response.statusText,
      }) as GatewayError;
      throw new GatewayRequestError(response.status, detail);
    }
    return parsed as T;
  }

  async createSession(config?: Record<string, unknown>, baseDir?: string): Promise<string> {
    const body: Record<string, unknown> = { protocol_version: PROTOCOL_VERSION };
    if (config !== undefined) body.config = config;
    if (baseDir !== undefined) body.base_dir = baseDir;
    const result = await this.request<{ session_id: string }>('POST', '/v1/sessions', body);
    return result.session_id;
  }

  async submitEvents(sessionId: string, events: StreamEvent[]): Promise<number[]> {
    const result = await this.request<{ turns_completed: number[] }>(
      'POST',
      `/v1/sessions/${sessionId}/events`,
      { protocol_version: PROTOCOL_VERSION, events },
    );
    return result.turns_completed;
  }

  async updateConsent(
    sessionId: string,
    scope: string,
    action: 'grant' | 'revoke',
  ): Promise<number> {
    const result = await this.request<{ effective_from_turn: number }>(
      'POST',
      `/v1/sessions/${sessionId}/consent`,
      { protocol_version: PROTOCOL_VERSION, scope, action },
    );
    return result.effective_from_turn;
  }

  async consentScopes(sessionId: string): Promise<string[]> {
    const result = await this.request<{ scopes: string[] }>(
      'GET',
      `/v1/sessions/${sessionId}/scopes`,
    );
    return result.scopes;
  }

  async metrics(sessionId: string): Promise<LiveMetrics> {
    const result = await this.request<{ metrics: LiveMetrics }>(
      'GET',
      `/v1/sessions/${sessionId}/metrics`,
    );
    return result.metrics;
  }

  async trace(sessionId: string, turnIndex: number): Promise<TraceRecord> {
    const result = await this.request<{ trace: TraceRecord }>(
      'GET',
      `/v1/sessions/${sessionId}/trace/${turnIndex}`,
    );
    return result.trace;
  }

  /** Subscribe to the envelope stream from `since` (exclusive). */
  openStream(
    sessionId: string,
    since: number,
    onEnvelope: (envelope: Envelope) => void,
    onClose?: () => void,
  ): StreamHandle {
    const wsUrl =
      this.baseUrl.replace(/^http/, 'ws') +
      `/v1/sessions/${sessionId}/stream?version=${PROTOCOL_VERSION}&since=${since}`;
    const socket = this.webSocketFactory(wsUrl);
    socket.onmessage = (event) => {
      onEnvelope(JSON.parse(String(event.data)) as Envelope);
    };
    socket.onclose = () => onClose?.();
    socket.onerror = () => onClose?.();
    return { close: () => socket.close() };
  }
}
