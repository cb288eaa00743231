// Console state, driven exclusively by received envelopes (unidirectional
// flow). Sequence numbers gate every apply, so replays and reconnects cannot
// duplicate or reorder anything. Consent toggles change only on consent_ack
// envelopes or REST acknowledgments, never optimistically.

import type {
  ConsentAck,
  Envelope,
  LiveMetrics,
  TraceStep,
  TurnOutcome,
} from './protocol.js';

export interface TranscriptEntry {
  role: 'user' | 'system';
  text: string;
  turnIndex: number;
  responseKind?: string;
  cancelled?: boolean;
}

export interface TurnTrace {
  correlationId: string;
  steps: TraceStep[];
  complete: boolean;
}

export interface ConsoleState {
  sessionId: string | null;
  lastSeq: number;
  transcript: TranscriptEntry[];
  traces: Map<string, TurnTrace>;
  turnOrder: string[];
  selectedTurn: string | null;
  consent: Map<string, boolean>;
  metrics: LiveMetrics | null;
  connection: 'idle' | 'connecting' | 'open' | 'error';
  lastError: string | null;
}

export function initialState(): ConsoleState {
  return {
    sessionId: null,
    lastSeq: 0,
    transcript: [],
    traces: new Map(),
    turnOrder: [],
    selectedTurn: null,
    consent: new Map(),
    metrics: null,
    connection: 'idle',
    lastError: null,
  };
}

export class ConsoleStore {
  state: ConsoleState = initialState();
  private listeners: Array<() => void> = [];

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  reset(sessionId: string, scopes: string[]): void {
    this.state = initialState();
    this.state.sessionId = sessionId;
    for (const scope of scopes) this.state.consent.set(scope, false);
    this.notify();
  }

  setConnection(connection: ConsoleState['connection'], error?: string): void {
    this.state.connection = connection;
    this.state.lastError = error ?? null;
    this.notify();
  }

  noteUserUtterance(text: string, turnHint: number): void {
    this.state.transcript.push({ role: 'user', text, turnIndex: turnHint });
    this.notify();
  }

  /** Apply one envelope; stale or duplicate sequence numbers are dropped. */
  applyEnvelope(envelope: Envelope): boolean {
    if (envelope.kind !== 'error' && envelope.seq <= this.state.lastSeq) {
      return false;
    }
    switch (envelope.kind) {
      case 'trace_step': {
        const body = envelope.body as unknown as {
          correlation_id: string;
          step: TraceStep;
        };
        let trace = this.state.traces.get(body.correlation_id);
        if (!trace) {
          trace = { correlationId: body.correlation_id, steps: [], complete: false };
          this.state.traces.set(body.correlation_id, trace);
          this.state.turnOrder.push(body.correlation_id);
        }
        trace.steps.push(body.step);
        break;
      }
      case 'turn_outcome': {
        const outcome = envelope.body as unknown as TurnOutcome;
        // The authoritative trace arrives with the outcome; replace any
        // incrementally accumulated steps with the server's record.
        if (!this.state.traces.has(outcome.correlation_id)) {
          this.state.turnOrder.push(outcome.correlation_id);
        }
        this.state.traces.set(outcome.correlation_id, {
          correlationId: outcome.correlation_id,
          steps: outcome.trace.steps,
          complete: true,
        });
        this.state.selectedTurn = outcome.correlation_id;
        this.state.transcript.push({
          role: 'system',
          text: outcome.delivered ?? '(delivery cancelled)',
          turnIndex: outcome.turn_index,
          responseKind: outcome.response_kind,
          cancelled: outcome.cancelled,
        });
        break;
      }
      case 'metrics': {
        this.state.metrics = envelope.body as unknown as LiveMetrics;
        break;
      }
      case 'consent_ack': {
        const ack = envelope.body as unknown as ConsentAck;
        this.state.consent.set(ack.scope, ack.action === 'grant');
        break;
      }
      case 'error': {
        const body = envelope.body as { code?: string; message?: string };
        this.state.lastError = `${body.code ?? 'error'}: ${body.message ?? ''}`;
        break;
      }
    }
    if (envelope.kind !== 'error') {
      this.state.lastSeq = envelope.seq;
    }
    this.notify();
    return true;
  }

  /** REST ack path for consent (the stream ack is equivalent and idempotent). */
  acknowledgeConsent(scope: string, granted: boolean): void {
    this.state.consent.set(scope, granted);
    this.notify();
  }

  selectTurn(correlationId: string): void {
    if (this.state.traces.has(correlationId)) {
      this.state.selectedTurn = correlationId;
      this.notify();
    }
  }
}
