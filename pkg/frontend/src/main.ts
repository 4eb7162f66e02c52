#!/usr/bin/env node
/**
 * CLI: profile a candidate pool through the built-in toy causal LM and
 * write a CCAP v1 activation profile plus its sidecar manifest.
 *
 *   node dist/main.js --out pool.ccap --samples 8 --seq-len 32 [--seed 7]
 *   node dist/main.js --out pool.ccap --pool texts.txt --seq-len 32
 */

import { writeFileSync } from 'node:fs';
import { parseArgs } from 'node:util';

import { writeCcap } from './ccap.js';
import { DEFAULT_CONFIG, TinyCausalLM } from './model.js';
import { syntheticPool, textPool } from './pool.js';
import { profilePool } from './profiler.js';

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      out: { type: 'string' },
      pool: { type: 'string' },
      samples: { type: 'string', default: '8' },
      'seq-len': { type: 'string', default: '32' },
      seed: { type: 'string', default: '7' },
      'model-seed': { type: 'string', default: String(DEFAULT_CONFIG.seed) },
    },
  });
  if (!values.out) {
    console.error('usage: main --out FILE [--pool texts.txt | --samples N] [--seq-len T] [--seed S]');
    return 2;
  }
  const seqLen = Number(values['seq-len']);
  const model = new TinyCausalLM({ ...DEFAULT_CONFIG, seed: Number(values['model-seed']) });
  if (seqLen > model.config.maxSeqLen) {
    console.error(`seq-len ${seqLen} exceeds the model's max ${model.config.maxSeqLen}`);
    return 2;
  }

  const pool = values.pool
    ? textPool(values.pool, seqLen, model.config.vocabSize)
    : syntheticPool(Number(values.samples), seqLen, Number(values.seed), model.config.vocabSize);

  const { profile, manifest } = profilePool(model, pool, seqLen);
  const bytes = writeCcap(profile);
  writeFileSync(values.out, bytes);
  writeFileSync(values.out + '.manifest.json', JSON.stringify(manifest, null, 2) + '\n');
  console.error(
    `profiled ${profile.numSamples} samples over ${profile.layers.length} projection sites ` +
    `-> ${values.out} (${bytes.length} bytes)`
  );
  console.log(JSON.stringify({
    path: values.out,
    bytes: bytes.length,
    num_samples: profile.numSamples,
    num_layers: profile.layers.length,
    pool_hash: manifest.pool_hash,
  }));
  return 0;
}

process.exit(main(process.argv.slice(2)));
