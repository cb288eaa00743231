// View models and DOM rendering. The view-model layer is pure (testable in
// Node); every visible string originates from gateway payload fields, so the
// panel can be compared byte-for-byte against what the server sent.

import type { ConsoleState, TurnTrace } from './store.js';

export interface TraceRowView {
  agent: string;
  kinds: string;
  summary: string;
  timeMs: number;
  isGovernance: boolean;
}

export function traceRows(trace: TurnTrace): TraceRowView[] {
  return trace.steps.map((step) => ({
    agent: step.agent,
    kinds: `${step.in} → ${step.out}`,
    summary: step.summary,
    timeMs: step.t_ms,
    isGovernance: step.agent === 'governance',
  }));
}

export function transcriptLines(state: ConsoleState): string[] {
  return state.transcript.map((entry) =>
    entry.role === 'user' ? `you: ${entry.text}` : `system: ${entry.text}`,
  );
}

export function metricsLines(state: ConsoleState): string[] {
  const metrics = state.metrics;
  if (!metrics) return ['no turns yet'];
  const ratio = (m: { value: number | null }): string =>
    m.value === null ? 'n/a' : m.value.toFixed(2);
  return [
    `turns: ${metrics.turns}`,
    `breakdowns: ${metrics.breakdowns}`,
    `escalations: ${metrics.escalations}`,
    `latency conformance: ${ratio(metrics.latency_conformance)}`,
    `consent compliance: ${ratio(metrics.consent_compliance)} (proxy)`,
  ];
}

// -- DOM layer ---------------------------------------------------------------

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTranscript(container: HTMLElement, state: ConsoleState): void {
  container.replaceChildren();
  for (const entry of state.transcript) {
    const row = el('div', `line ${entry.role}${entry.cancelled ? ' cancelled' : ''}`);
    row.append(el('span', 'who', entry.role === 'user' ? 'you' : 'system'));
    row.append(el('span', 'text', entry.text));
    if (entry.responseKind) {
      row.append(el('span', 'kind', entry.responseKind));
    }
    container.append(row);
  }
  container.scrollTop = container.scrollHeight;
}

export function renderTracePanel(container: HTMLElement, state: ConsoleState): void {
  container.replaceChildren();
  const picker = el('div', 'turn-picker');
  for (const correlationId of state.turnOrder) {
    const button = el('button', correlationId === state.selectedTurn ? 'on' : '', correlationId);
    button.addEventListener('click', () => {
      container.dispatchEvent(new CustomEvent('turn-selected', { detail: correlationId, bubbles: true }));
    });
    picker.append(button);
  }
  container.append(picker);
  const selected = state.selectedTurn ? state.traces.get(state.selectedTurn) : undefined;
  if (!selected) {
    container.append(el('div', 'empty', 'no turn selected'));
    return;
  }
  for (const row of traceRows(selected)) {
    const stepNode = el('div', `step${row.isGovernance ? ' governance' : ''}`);
    stepNode.append(el('span', 'time', `${row.timeMs} ms`));
    stepNode.append(el('span', 'agent', row.agent));
    stepNode.append(el('span', 'kinds', row.kinds));
    stepNode.append(el('span', 'summary', row.summary));
    container.append(stepNode);
  }
}

export function renderConsent(
  container: HTMLElement,
  state: ConsoleState,
  onToggle: (scope: string, next: 'grant' | 'revoke') => void,
): void {
  container.replaceChildren();
  for (const [scope, granted] of state.consent) {
    const row = el('label', 'consent-row');
    const box = el('input') as HTMLInputElement;
    box.type = 'checkbox';
    box.checked = granted; // acknowledged state only, never optimistic
    box.addEventListener('change', (event) => {
      event.preventDefault();
      box.checked = granted; // snap back; the ack will move it
      onToggle(scope, granted ? 'revoke' : 'grant');
    });
    row.append(box, el('span', 'scope', scope));
    container.append(row);
  }
}

export function renderMetrics(container: HTMLElement, state: ConsoleState): void {
  container.replaceChildren();
  for (const line of metricsLines(state)) {
    container.append(el('div', 'metric', line));
  }
}

export function renderConnection(container: HTMLElement, state: ConsoleState): void {
  container.textContent =
    state.connection === 'error'
      ? `connection error: ${state.lastError ?? 'unknown'} (retry to reconnect)`
      : state.connection;
  container.className = `status ${state.connection}`;
}
