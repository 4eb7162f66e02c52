/**
 * Activation profiling: run a pool through the model once, recording for
 * every projection input the max-abs activation of each channel per
 * sample, the projection's weight-column norms, and each sample's
 * perplexity.  The result serializes straight to CCAP v1 plus a JSON
 * manifest mapping CCAP layer order back to projection names.
 */

import { CcapProfile } from './ccap.js';
import { Linear, TinyCausalLM, columnNorms } from './model.js';
import { Pool } from './pool.js';

export interface ProfileResult {
  profile: CcapProfile;
  manifest: {
    model: string;
    layers: { name: string; dim: number }[];
    sequence_length: number;
    pool_hash: string;
  };
}

export function profilePool(model: TinyCausalLM, pool: Pool, sequenceLength: number): ProfileResult {
  const sites = model.sites();
  const n = pool.samples.length;
  if (n < 1) throw new Error('refusing to profile an empty pool');

  // One running-max buffer per site, channel-major (d x N).
  const maxAbs = new Map<string, Float32Array>();
  for (const site of sites) maxAbs.set(site.name, new Float32Array(site.inDim * n));

  let current = 0;
  const hook = (site: Linear, input: Float32Array, seqLen: number) => {
    const acc = maxAbs.get(site.name);
    if (!acc) throw new Error(`unexpected projection ${site.name}`);
    const d = site.inDim;
    for (let t = 0; t < seqLen; t++) {
      for (let c = 0; c < d; c++) {
        const v = Math.fround(Math.abs(input[t * d + c]));
        const at = c * n + current;
        if (v > acc[at]) acc[at] = v;
      }
    }
  };

  const perplexities = new Float32Array(n);
  for (let s = 0; s < n; s++) {
    current = s;
    const tokens = pool.samples[s];
    model.forward(tokens, hook);
    perplexities[s] = Math.fround(model.perplexity(tokens));
  }

  const profile: CcapProfile = {
    numSamples: n,
    layers: sites.map((site) => ({
      magnitudes: maxAbs.get(site.name)!,
      dim: site.inDim,
      norms: columnNorms(site),
    })),
    perplexities,
  };
  const c = model.config;
  return {
    profile,
    manifest: {
      model: `tiny-causal-lm(d=${c.dModel},heads=${c.nHeads},layers=${c.nLayers},ff=${c.dFF},vocab=${c.vocabSize},seed=${c.seed})`,
      layers: sites.map((site) => ({ name: site.name, dim: site.inDim })),
      sequence_length: sequenceLength,
      pool_hash: pool.hash,
    },
  };
}
