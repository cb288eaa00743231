// Client-side stand-in for a recognizer: split typed text into timed tokens
// with a controllable pause profile, so the endpointer's timing behavior can
// be exercised by hand.

import type { StreamEvent, TokenEvent } from './protocol.js';

export const DEFAULT_GAP_MS = 100;
export const DEFAULT_TOKEN_DURATION_MS = 300;
export const DEFAULT_TRAILING_SILENCE_MS = 1300;

export interface PauseProfile {
  /** Inter-token gaps; padded/truncated to tokens-1 with defaultGapMs. */
  gapsMs?: number[];
  defaultGapMs?: number;
  tokenDurationMs?: number;
  trailingSilenceMs?: number;
}

export function tokenizeUtterance(
  text: string,
  profile: PauseProfile = {},
  startMs = 0,
): StreamEvent[] {
  const words = text.trim().split(/\s+/).filter((w) => w.length > 0);
  if (words.length === 0) {
    return [];
  }
  const defaultGap = profile.defaultGapMs ?? DEFAULT_GAP_MS;
  const duration = profile.tokenDurationMs ?? DEFAULT_TOKEN_DURATION_MS;
  const trailing = profile.trailingSilenceMs ?? DEFAULT_TRAILING_SILENCE_MS;
  const gaps: number[] = [];
  for (let i = 0; i < words.length - 1; i++) {
    gaps.push(profile.gapsMs?.[i] ?? defaultGap);
  }
  const events: StreamEvent[] = [];
  let cursor = startMs;
  words.forEach((word, i) => {
    const token: TokenEvent = {
      kind: 'token',
      surface: word,
      start_ms: cursor,
      end_ms: cursor + duration,
    };
    events.push(token);
    cursor += duration;
    if (i < words.length - 1) {
      cursor += gaps[i]!;
    }
  });
  events.push({ kind: 'silence', delta_ms: trailing });
  return events;
}

/** Stream-time span consumed by the events, used to start the next send. */
export function eventsEndMs(events: StreamEvent[], startMs = 0): number {
  let cursor = startMs;
  for (const event of events) {
    if (event.kind === 'token') {
      cursor = event.end_ms;
    } else {
      cursor += event.delta_ms;
    }
  }
  return cursor;
}
