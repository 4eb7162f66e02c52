/**
 * Cross-component conformance: the emitted CCAP file must validate with
 * zero diagnostics on the Python side, and the selection CLI must run
 * end-to-end on it.  Requires the covsel package to be installed in the
 * ambient python3 environment (it is, in this repo's dev setup).
 */

import { spawnSync } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { writeCcap } from '../src/ccap.js';
import { TinyCausalLM } from '../src/model.js';
import { syntheticPool } from '../src/pool.js';
import { profilePool } from '../src/profiler.js';

function emitProfile(dir: string): string {
  const model = new TinyCausalLM();
  const pool = syntheticPool(8, 32, 7, model.config.vocabSize);
  const { profile, manifest } = profilePool(model, pool, 32);
  const path = join(dir, 'toy.ccap');
  writeFileSync(path, writeCcap(profile));
  writeFileSync(path + '.manifest.json', JSON.stringify(manifest, null, 2));
  return path;
}

describe('python interop', () => {
  const dir = mkdtempSync(join(tmpdir(), 'ccap-e2e-'));
  const ccapPath = emitProfile(dir);

  it('emitted file passes validate_profile with zero diagnostics', () => {
    const check = spawnSync('python3', ['-c', [
      'import sys',
      'from covsel import load_profile, validate_profile',
      `profile = load_profile(${JSON.stringify(ccapPath)})`,
      'diags = validate_profile(profile)',
      'assert diags == [], diags',
      'print(profile.num_samples, profile.num_layers)',
    ].join('\n')], { encoding: 'utf-8' });
    expect(check.stderr).toBe('');
    expect(check.status).toBe(0);
    expect(check.stdout.trim()).toBe('8 12');
  });

  it('covsel select --method greedy runs end-to-end on the profile', () => {
    const out = join(dir, 'sel.json');
    const run = spawnSync('python3', [
      '-m', 'covsel.cli', 'select', '-i', ccapPath, '-o', out,
      '--method', 'greedy', '-K', '2', '--k-sigma', '3',
    ], { encoding: 'utf-8' });
    expect(run.status).toBe(0);
    const payload = JSON.parse(run.stdout);
    expect(payload.method).toBe('greedy');
    expect(payload.selected.length).toBe(2);
    expect(payload.objective).toBeGreaterThanOrEqual(0);
  });

  it('max_ppl selection sees the emitted perplexities', () => {
    const out = join(dir, 'ppl.json');
    const run = spawnSync('python3', [
      '-m', 'covsel.cli', 'select', '-i', ccapPath, '-o', out,
      '--method', 'max_ppl', '-K', '3', '--k-sigma', '3',
    ], { encoding: 'utf-8' });
    expect(run.status).toBe(0);
    expect(JSON.parse(run.stdout).selected.length).toBe(3);
  });
});
