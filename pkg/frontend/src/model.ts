/**
 * Tiny causal transformer LM with per-projection input hooks.
 *
 * Decoder-only: token embedding, N blocks of (RMSNorm -> causal
 * multi-head attention -> residual, RMSNorm -> SiLU MLP -> residual),
 * final RMSNorm, untied unembedding.  Weights are drawn from a seeded
 * generator, so the same config + seed is the same model everywhere.
 *
 * Every linear projection is a quantization site: a hook receives the
 * projection's input activations (seqLen x inDim, row-major) ahead of the
 * matmul, which is exactly the X whose per-channel dynamic range a PTQ
 * calibration set has to capture.
 */

import { Rng } from './rng.js';

export interface ModelConfig {
  vocabSize: number;
  dModel: number;
  nHeads: number;
  nLayers: number;
  dFF: number;
  maxSeqLen: number;
  seed: number;
}

export const DEFAULT_CONFIG: ModelConfig = {
  vocabSize: 256,
  dModel: 32,
  nHeads: 2,
  nLayers: 2,
  dFF: 64,
  maxSeqLen: 64,
  seed: 1234,
};

/** A linear projection: out = x @ W^T, W stored row-major (outDim x inDim). */
export interface Linear {
  name: string;
  weight: Float32Array;
  inDim: number;
  outDim: number;
}

/** Receives each projection's input before the matmul. */
export type ActivationHook = (site: Linear, input: Float32Array, seqLen: number) => void;

interface Block {
  attnNorm: Float32Array;
  q: Linear;
  k: Linear;
  v: Linear;
  o: Linear;
  mlpNorm: Float32Array;
  up: Linear;
  down: Linear;
}

function makeLinear(name: string, inDim: number, outDim: number, rng: Rng): Linear {
  return { name, weight: rng.normals(outDim * inDim, 1.0 / Math.sqrt(inDim)), inDim, outDim };
}

function rmsnorm(x: Float32Array, seqLen: number, dim: number, gain: Float32Array): Float32Array {
  const out = new Float32Array(seqLen * dim);
  for (let t = 0; t < seqLen; t++) {
    let ss = 0;
    for (let i = 0; i < dim; i++) {
      const v = x[t * dim + i];
      ss += v * v;
    }
    const inv = 1.0 / Math.sqrt(ss / dim + 1e-6);
    for (let i = 0; i < dim; i++) {
      out[t * dim + i] = x[t * dim + i] * inv * gain[i];
    }
  }
  return out;
}

function applyLinear(site: Linear, x: Float32Array, seqLen: number, hook?: ActivationHook): Float32Array {
  if (hook) hook(site, x, seqLen);
  const { weight, inDim, outDim } = site;
  const out = new Float32Array(seqLen * outDim);
  for (let t = 0; t < seqLen; t++) {
    for (let o = 0; o < outDim; o++) {
      let acc = 0;
      const wRow = o * inDim;
      const xRow = t * inDim;
      for (let i = 0; i < inDim; i++) acc += weight[wRow + i] * x[xRow + i];
      out[t * outDim + o] = acc;
    }
  }
  return out;
}

export class TinyCausalLM {
  readonly config: ModelConfig;
  private embedding: Float32Array;      // vocab x dModel
  private posEmbedding: Float32Array;   // maxSeqLen x dModel
  private blocks: Block[];
  private finalNorm: Float32Array;
  private unembed: Linear;

  constructor(config: ModelConfig = DEFAULT_CONFIG) {
    this.config = config;
    const rng = new Rng(config.seed);
    const d = config.dModel;
    this.embedding = rng.normals(config.vocabSize * d, 1.0);
    this.posEmbedding = rng.normals(config.maxSeqLen * d, 0.1);
    this.blocks = [];
    for (let b = 0; b < config.nLayers; b++) {
      this.blocks.push({
        attnNorm: new Float32Array(d).fill(1),
        q: makeLinear(`block${b}.attn.q`, d, d, rng),
        k: makeLinear(`block${b}.attn.k`, d, d, rng),
        v: makeLinear(`block${b}.attn.v`, d, d, rng),
        o: makeLinear(`block${b}.attn.o`, d, d, rng),
        mlpNorm: new Float32Array(d).fill(1),
        up: makeLinear(`block${b}.mlp.up`, d, config.dFF, rng),
        down: makeLinear(`block${b}.mlp.down`, config.dFF, d, rng),
      });
    }
    this.finalNorm = new Float32Array(d).fill(1);
    this.unembed = makeLinear('unembed', d, config.vocabSize, rng);
  }

  /** Every hooked projection, in forward-pass order. */
  sites(): Linear[] {
    const out: Linear[] = [];
    for (const block of this.blocks) {
      out.push(block.q, block.k, block.v, block.o, block.up, block.down);
    }
    return out;
  }

  /**
   * Forward pass over one token sequence; returns logits (seqLen x vocab).
   * The hook fires once per projection per call with that projection's
   * input activations.
   */
  forward(tokens: number[], hook?: ActivationHook): Float32Array {
    const { dModel: d, nHeads, vocabSize, maxSeqLen } = this.config;
    const seqLen = tokens.length;
    if (seqLen === 0 || seqLen > maxSeqLen) {
      throw new Error(`sequence length must be in 1..${maxSeqLen}, got ${seqLen}`);
    }
    const headDim = d / nHeads;

    let hidden = new Float32Array(seqLen * d);
    for (let t = 0; t < seqLen; t++) {
      const tok = tokens[t];
      if (tok < 0 || tok >= vocabSize) throw new Error(`token ${tok} outside vocab`);
      for (let i = 0; i < d; i++) {
        hidden[t * d + i] = this.embedding[tok * d + i] + this.posEmbedding[t * d + i];
      }
    }

    for (const block of this.blocks) {
      const normed = rmsnorm(hidden, seqLen, d, block.attnNorm);
      const q = applyLinear(block.q, normed, seqLen, hook);
      const k = applyLinear(block.k, normed, seqLen, hook);
      const v = applyLinear(block.v, normed, seqLen, hook);

      const attnOut = new Float32Array(seqLen * d);
      const scale = 1.0 / Math.sqrt(headDim);
      const scores = new Float32Array(seqLen);
      for (let h = 0; h < nHeads; h++) {
        const off = h * headDim;
        for (let t = 0; t < seqLen; t++) {
          let maxScore = -Infinity;
          for (let s = 0; s <= t; s++) {
            let dot = 0;
            for (let i = 0; i < headDim; i++) dot += q[t * d + off + i] * k[s * d + off + i];
            scores[s] = dot * scale;
            if (scores[s] > maxScore) maxScore = scores[s];
          }
          let z = 0;
          for (let s = 0; s <= t; s++) {
            scores[s] = Math.exp(scores[s] - maxScore);
            z += scores[s];
          }
          for (let s = 0; s <= t; s++) {
            const w = scores[s] / z;
            for (let i = 0; i < headDim; i++) attnOut[t * d + off + i] += w * v[s * d + off + i];
          }
        }
      }
      const projected = applyLinear(block.o, attnOut, seqLen, hook);
      for (let i = 0; i < hidden.length; i++) hidden[i] += projected[i];

      const mlpNormed = rmsnorm(hidden, seqLen, d, block.mlpNorm);
      const up = applyLinear(block.up, mlpNormed, seqLen, hook);
      for (let i = 0; i < up.length; i++) {
        const x = up[i];
        up[i] = x / (1 + Math.exp(-x)); // SiLU
      }
      const down = applyLinear(block.down, up, seqLen, hook);
      for (let i = 0; i < hidden.length; i++) hidden[i] += down[i];
    }

    const finalNormed = rmsnorm(hidden, seqLen, d, this.finalNorm);
    return applyLinear(this.unembed, finalNormed, seqLen);
  }

  /** exp(mean next-token NLL) for one sequence. */
  perplexity(tokens: number[]): number {
    if (tokens.length < 2) throw new Error('perplexity needs at least 2 tokens');
    const logits = this.forward(tokens);
    const { vocabSize } = this.config;
    let nll = 0;
    for (let t = 0; t + 1 < tokens.length; t++) {
      const row = t * vocabSize;
      let max = -Infinity;
      for (let i = 0; i < vocabSize; i++) if (logits[row + i] > max) max = logits[row + i];
      let z = 0;
      for (let i = 0; i < vocabSize; i++) z += Math.exp(logits[row + i] - max);
      nll -= logits[row + tokens[t + 1]] - max - Math.log(z);
    }
    return Math.exp(nll / (tokens.length - 1));
  }
}

/** L2 norm of each input-channel column of a projection weight. */
export function columnNorms(site: Linear): Float32Array {
  const out = new Float32Array(site.inDim);
  for (let c = 0; c < site.inDim; c++) {
    let ss = 0;
    for (let o = 0; o < site.outDim; o++) {
      const w = site.weight[o * site.inDim + c];
      ss += w * w;
    }
    out[c] = Math.fround(Math.sqrt(ss));
  }
  return out;
}
