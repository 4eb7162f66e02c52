/**
 * Candidate pools: token sequences the profiler runs through the model.
 *
 * Text pools are read one sample per line and tokenized byte-level
 * (UTF-8 bytes, so any text fits a 256-token vocab); synthetic pools draw
 * seeded random tokens.  Sequences are truncated to the requested length;
 * shorter samples keep their natural length (minimum 2 tokens so a
 * next-token perplexity exists).
 */

import { readFileSync } from 'node:fs';

import { Rng } from './rng.js';

export interface Pool {
  samples: number[][];
  /** FNV-1a over the token stream; ties a profile to its exact pool. */
  hash: string;
}

function fnv1a(samples: number[][]): string {
  let h = 0x811c9dc5;
  for (const tokens of samples) {
    for (const t of tokens) {
      h ^= t & 0xff;
      h = Math.imul(h, 0x01000193) >>> 0;
    }
    h ^= 0x2e; // sample separator
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, '0');
}

export function syntheticPool(numSamples: number, seqLen: number, seed: number, vocabSize: number): Pool {
  if (numSamples < 1) throw new Error('pool needs at least one sample');
  if (seqLen < 2) throw new Error('sequences need at least 2 tokens');
  const rng = new Rng(seed);
  const samples: number[][] = [];
  for (let s = 0; s < numSamples; s++) {
    const tokens: number[] = [];
    for (let t = 0; t < seqLen; t++) tokens.push(rng.int(vocabSize));
    samples.push(tokens);
  }
  return { samples, hash: fnv1a(samples) };
}

export function textPool(path: string, seqLen: number, vocabSize: number): Pool {
  const lines = readFileSync(path, 'utf-8').split('\n').filter((line) => line.length > 0);
  if (lines.length === 0) throw new Error(`pool file ${path} has no samples`);
  if (seqLen < 2) throw new Error('sequences need at least 2 tokens');
  const samples: number[][] = [];
  for (const line of lines) {
    const bytes = Array.from(Buffer.from(line, 'utf-8')).map((b) => b % vocabSize);
    if (bytes.length < 2) throw new Error(`sample ${JSON.stringify(line)} is shorter than 2 tokens`);
    samples.push(bytes.slice(0, seqLen));
  }
  return { samples, hash: fnv1a(samples) };
}
