// Page wiring: one session, one stream, unidirectional updates.

import { GatewayClient } from './client.js';
import { ConsoleStore } from './store.js';
import { eventsEndMs, tokenizeUtterance } from './tokenizer.js';
import {
  renderConnection,
  renderConsent,
  renderMetrics,
  renderTracePanel,
  renderTranscript,
} from './render.js';

const $ = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
};

const store = new ConsoleStore();
const client = new GatewayClient({ baseUrl: window.location.origin });

let streamCursor = 0;
let streamTimeMs = 0;

function rerender(): void {
  renderTranscript($('transcript'), store.state);
  renderTracePanel($('trace'), store.state);
  renderConsent($('consent'), store.state, (scope, action) => {
    void client
      .updateConsent(store.state.sessionId!, scope, action)
      .then(() => store.acknowledgeConsent(scope, action === 'grant'))
      .catch((error) => store.setConnection('error', String(error)));
  });
  renderMetrics($('metrics'), store.state);
  renderConnection($('status'), store.state);
}

store.subscribe(rerender);

function openStream(sessionId: string): void {
  store.setConnection('connecting');
  client.openStream(
    sessionId,
    streamCursor,
    (envelope) => {
      if (store.applyEnvelope(envelope)) {
        streamCursor = store.state.lastSeq;
      }
      if (store.state.connection !== 'open') store.setConnection('open');
    },
    () => {
      if (store.state.connection !== 'error') store.setConnection('error', 'stream closed');
    },
  );
}

async function connect(): Promise<void> {
  try {
    const existing = (($('session-id') as HTMLInputElement).value || '').trim();
    const sessionId = existing || (await client.createSession());
    ($('session-id') as HTMLInputElement).value = sessionId;
    const scopes = await client.consentScopes(sessionId);
    streamCursor = 0;
    streamTimeMs = 0;
    store.reset(sessionId, scopes);
    openStream(sessionId);
  } catch (error) {
    store.setConnection('error', String(error));
  }
}

async function send(): Promise<void> {
  const input = $('utterance') as HTMLInputElement;
  const text = input.value.trim();
  const sessionId = store.state.sessionId;
  if (!text || !sessionId) return;
  const gap = Number(($('gap') as HTMLInputElement).value) || 100;
  const trailing = Number(($('trailing') as HTMLInputElement).value) || 1300;
  const gapsRaw = (($('gaps') as HTMLInputElement).value || '').trim();
  const gapsMs = gapsRaw ? gapsRaw.split(',').map((g) => Number(g.trim()) || gap) : undefined;
  const events = tokenizeUtterance(
    text,
    { defaultGapMs: gap, trailingSilenceMs: trailing, gapsMs },
    streamTimeMs,
  );
  store.noteUserUtterance(text, store.state.turnOrder.length + 1);
  try {
    await client.submitEvents(sessionId, events);
    streamTimeMs = eventsEndMs(events, streamTimeMs);
    input.value = '';
  } catch (error) {
    // keep the text for retry
    store.setConnection('error', String(error));
  }
}

$('connect').addEventListener('click', () => void connect());
$('send').addEventListener('click', () => void send());
($('utterance') as HTMLInputElement).addEventListener('keydown', (event) => {
  if ((event as KeyboardEvent).key === 'Enter') void send();
});
$('utterance').addEventListener('input', () => {
  ($('send') as HTMLButtonElement).disabled =
    (($('utterance') as HTMLInputElement).value.trim() === '');
});
$('trace').addEventListener('turn-selected', ((event: Event) => {
  store.selectTurn((event as CustomEvent<string>).detail);
}) as EventListener);

($('send') as HTMLButtonElement).disabled = true;
