// Wire types for the convoke gateway. The console renders these payloads
// verbatim; nothing here re-derives a decision the server already made.

export const PROTOCOL_VERSION = 1;

export interface TokenEvent {
  kind: 'token';
  surface: string;
  start_ms: number;
  end_ms: number;
  language_tag?: string;
}

export interface SilenceEvent {
  kind: 'silence';
  delta_ms: number;
}

export type StreamEvent = TokenEvent | SilenceEvent;

export interface TraceStep {
  agent: string;
  in: string;
  out: string;
  summary: string;
  t_ms: number;
}

export interface TraceRecord {
  correlation_id: string;
  steps: TraceStep[];
}

export interface ActionResultBody {
  status: string;
  effects: string;
  updated_entities: string[];
}

export interface TurnOutcome {
  turn_index: number;
  correlation_id: string;
  utterance_text: string;
  intent: string;
  polarity: string;
  resolved_intent: string | null;
  repair_reason: string | null;
  escalated: boolean;
  actions: ActionResultBody[];
  delivered: string | null;
  response_kind: string;
  cancelled: boolean;
  response_gap_ms: number;
  trace: TraceRecord;
}

export interface RatioMetric {
  value: number | null;
  [key: string]: number | null;
}

export interface LiveMetrics {
  turns: number;
  breakdowns: number;
  escalations: number;
  latency_conformance: RatioMetric;
  consent_compliance: RatioMetric;
}

export interface ConsentAck {
  scope: string;
  action: 'grant' | 'revoke';
  effective_from_turn: number;
}

export type EnvelopeKind = 'turn_outcome' | 'trace_step' | 'consent_ack' | 'error' | 'metrics';

export interface Envelope {
  protocol_version: number;
  kind: EnvelopeKind;
  seq: number;
  body: Record<string, unknown>;
}

export interface GatewayError {
  code: string;
  message: string;
  field?: string;
}
