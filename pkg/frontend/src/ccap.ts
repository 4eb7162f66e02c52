/**
 * CCAP v1 writer/reader.
 *
 * Layout (everything little-endian): "CCAP" magic, u32 version = 1,
 * u32 N, u32 L, L x u32 layer dims, u32 flags (bit0 perplexities, bit1
 * column norms), per layer d_l x N float32 magnitudes (channel-major,
 * row-major) then d_l float32 norms when present, then N float32
 * perplexities when present.  No trailing bytes.
 */

export const CCAP_MAGIC = 0x50414343; // "CCAP" read as little-endian u32
export const CCAP_VERSION = 1;
export const FLAG_PERPLEXITIES = 0x1;
export const FLAG_COLUMN_NORMS = 0x2;

export interface CcapLayer {
  /** d x N magnitudes, channel-major row-major. */
  magnitudes: Float32Array;
  dim: number;
  /** d column norms; all layers must agree on presence. */
  norms?: Float32Array;
}

export interface CcapProfile {
  numSamples: number;
  layers: CcapLayer[];
  perplexities?: Float32Array;
}

export function expectedSize(profile: CcapProfile): number {
  const hasNorms = profile.layers[0]?.norms !== undefined;
  let size = 4 + 4 + 4 + 4 + 4 * profile.layers.length + 4;
  for (const layer of profile.layers) {
    size += 4 * layer.dim * profile.numSamples;
    if (hasNorms) size += 4 * layer.dim;
  }
  if (profile.perplexities) size += 4 * profile.numSamples;
  return size;
}

function validate(profile: CcapProfile): void {
  const n = profile.numSamples;
  if (n < 1) throw new Error('profile needs at least one sample');
  if (profile.layers.length < 1) throw new Error('profile needs at least one layer');
  const hasNorms = profile.layers[0].norms !== undefined;
  for (const [l, layer] of profile.layers.entries()) {
    if (layer.dim < 1) throw new Error(`layer ${l}: dim must be >= 1`);
    if (layer.magnitudes.length !== layer.dim * n) {
      throw new Error(`layer ${l}: expected ${layer.dim * n} magnitudes, got ${layer.magnitudes.length}`);
    }
    if ((layer.norms !== undefined) !== hasNorms) {
      throw new Error('column norms must be present on every layer or none');
    }
    if (layer.norms && layer.norms.length !== layer.dim) {
      throw new Error(`layer ${l}: expected ${layer.dim} norms, got ${layer.norms.length}`);
    }
    for (let i = 0; i < layer.magnitudes.length; i++) {
      const v = layer.magnitudes[i];
      if (!Number.isFinite(v) || v < 0) throw new Error(`layer ${l}: bad magnitude ${v} at ${i}`);
    }
  }
  if (profile.perplexities) {
    if (profile.perplexities.length !== n) {
      throw new Error(`expected ${n} perplexities, got ${profile.perplexities.length}`);
    }
    for (const v of profile.perplexities) {
      if (!Number.isFinite(v) || v <= 0) throw new Error(`bad perplexity ${v}`);
    }
  }
}

export function writeCcap(profile: CcapProfile): Uint8Array {
  validate(profile);
  const hasNorms = profile.layers[0].norms !== undefined;
  const buffer = new ArrayBuffer(expectedSize(profile));
  const view = new DataView(buffer);
  let at = 0;
  const u32 = (v: number) => { view.setUint32(at, v, true); at += 4; };
  const f32s = (arr: Float32Array) => {
    for (let i = 0; i < arr.length; i++) { view.setFloat32(at, arr[i], true); at += 4; }
  };

  u32(CCAP_MAGIC);
  u32(CCAP_VERSION);
  u32(profile.numSamples);
  u32(profile.layers.length);
  for (const layer of profile.layers) u32(layer.dim);
  u32((profile.perplexities ? FLAG_PERPLEXITIES : 0) | (hasNorms ? FLAG_COLUMN_NORMS : 0));
  for (const layer of profile.layers) {
    f32s(layer.magnitudes);
    if (layer.norms) f32s(layer.norms);
  }
  if (profile.perplexities) f32s(profile.perplexities);
  if (at !== buffer.byteLength) throw new Error(`wrote ${at} of ${buffer.byteLength} bytes`);
  return new Uint8Array(buffer);
}

export function readCcap(bytes: Uint8Array): CcapProfile {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let at = 0;
  const u32 = () => {
    if (at + 4 > bytes.byteLength) throw new Error('truncated header');
    const v = view.getUint32(at, true);
    at += 4;
    return v;
  };
  if (u32() !== CCAP_MAGIC) throw new Error('bad magic');
  if (u32() !== CCAP_VERSION) throw new Error('unsupported version');
  const n = u32();
  const numLayers = u32();
  const dims: number[] = [];
  for (let l = 0; l < numLayers; l++) dims.push(u32());
  const flags = u32();
  if (flags & ~(FLAG_PERPLEXITIES | FLAG_COLUMN_NORMS)) throw new Error('unknown flags');

  const f32s = (count: number): Float32Array => {
    if (at + 4 * count > bytes.byteLength) throw new Error('truncated payload');
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) { out[i] = view.getFloat32(at, true); at += 4; }
    return out;
  };
  const layers: CcapLayer[] = [];
  for (const dim of dims) {
    const magnitudes = f32s(dim * n);
    const norms = flags & FLAG_COLUMN_NORMS ? f32s(dim) : undefined;
    layers.push({ magnitudes, dim, norms });
  }
  const perplexities = flags & FLAG_PERPLEXITIES ? f32s(n) : undefined;
  if (at !== bytes.byteLength) throw new Error('trailing bytes');
  const profile = { numSamples: n, layers, perplexities };
  validate(profile);
  return profile;
}
