import { describe, expect, it } from 'vitest';

import { CcapProfile, expectedSize, readCcap, writeCcap } from '../src/ccap.js';

function minimalProfile(): CcapProfile {
  return { numSamples: 1, layers: [{ magnitudes: new Float32Array([2.0]), dim: 1 }] };
}

describe('ccap writer', () => {
  it('writes the 28-byte minimal layout with exact golden bytes', () => {
    const bytes = writeCcap(minimalProfile());
    expect(bytes.length).toBe(28);
    expect(expectedSize(minimalProfile())).toBe(28);
    const expected = new Uint8Array([
      0x43, 0x43, 0x41, 0x50, // "CCAP"
      0x01, 0x00, 0x00, 0x00, // version
      0x01, 0x00, 0x00, 0x00, // N
      0x01, 0x00, 0x00, 0x00, // L
      0x01, 0x00, 0x00, 0x00, // d_0
      0x00, 0x00, 0x00, 0x00, // flags
      0x00, 0x00, 0x00, 0x40, // 2.0f little-endian
    ]);
    expect(Array.from(bytes)).toEqual(Array.from(expected));
  });

  it('round-trips magnitudes, norms, and perplexities bit-exactly', () => {
    const profile: CcapProfile = {
      numSamples: 3,
      layers: [
        { magnitudes: new Float32Array([0, 1.5, 2.25, 3, 0.125, 7]), dim: 2, norms: new Float32Array([1, 0.5]) },
        { magnitudes: new Float32Array([9, 8, 7]), dim: 1, norms: new Float32Array([2]) },
      ],
      perplexities: new Float32Array([1.25, 2.5, 3.75]),
    };
    const back = readCcap(writeCcap(profile));
    expect(back.numSamples).toBe(3);
    expect(back.layers.length).toBe(2);
    for (const [l, layer] of profile.layers.entries()) {
      expect(Array.from(back.layers[l].magnitudes)).toEqual(Array.from(layer.magnitudes));
      expect(Array.from(back.layers[l].norms!)).toEqual(Array.from(layer.norms!));
    }
    expect(Array.from(back.perplexities!)).toEqual(Array.from(profile.perplexities!));
  });

  it('rejects invalid values before writing', () => {
    expect(() => writeCcap({
      numSamples: 1,
      layers: [{ magnitudes: new Float32Array([-1]), dim: 1 }],
    })).toThrow(/bad magnitude/);
    expect(() => writeCcap({
      numSamples: 1,
      layers: [{ magnitudes: new Float32Array([Number.NaN]), dim: 1 }],
    })).toThrow(/bad magnitude/);
    expect(() => writeCcap({
      numSamples: 2,
      layers: [{ magnitudes: new Float32Array([1]), dim: 1 }],
    })).toThrow(/expected 2 magnitudes/);
    expect(() => writeCcap({
      numSamples: 1,
      layers: [{ magnitudes: new Float32Array([1]), dim: 1 }],
      perplexities: new Float32Array([0]),
    })).toThrow(/bad perplexity/);
  });

  it('reader rejects truncation, bad magic, and trailing bytes', () => {
    const bytes = writeCcap(minimalProfile());
    for (const cut of [0, 3, 8, 20, 27]) {
      expect(() => readCcap(bytes.slice(0, cut))).toThrow(/truncated/);
    }
    const badMagic = bytes.slice();
    badMagic[0] = 0x58;
    expect(() => readCcap(badMagic)).toThrow(/magic/);
    const trailing = new Uint8Array(bytes.length + 1);
    trailing.set(bytes);
    expect(() => readCcap(trailing)).toThrow(/trailing/);
  });
});
